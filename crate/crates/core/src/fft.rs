//! FFT-backed convolutions of real sequences.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn transform(buf: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

fn padded(a: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut v: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    v.resize(n, Complex::new(0.0, 0.0));
    v
}

/// Circular convolution `out[j] = Σ_k a[k] b[(j − k) mod n]`, both inputs of
/// length `n`.
pub(crate) fn circular(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let mut fa = padded(a, n);
    let mut fb = padded(b, n);
    transform(&mut fa, false);
    transform(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    transform(&mut fa, true);
    let scale = 1.0 / n as f64;
    fa.iter().map(|c| c.re * scale).collect()
}

/// First `len` terms of the linear convolution of `a` and `b`.
pub(crate) fn linear(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() || len == 0 {
        return vec![0.0; len];
    }
    let full = a.len() + b.len() - 1;
    let n = full.next_power_of_two();
    let mut fa = padded(a, n);
    let mut fb = padded(b, n);
    transform(&mut fa, false);
    transform(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    transform(&mut fa, true);
    let scale = 1.0 / n as f64;
    let mut out: Vec<f64> = fa.iter().take(full.min(len)).map(|c| c.re * scale).collect();
    out.resize(len, 0.0);
    out
}
