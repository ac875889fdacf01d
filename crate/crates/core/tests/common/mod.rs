//! Test-side statistics, kept apart from the library's own helpers.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Kolmogorov–Smirnov distance scaled by `√n`.
pub fn ks_scaled(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d * n.sqrt()
}

/// 1% critical value of the scaled KS distance.
pub const KS_99: f64 = 1.63;

/// Pearson chi-square p-value, pooling cells with expected count below 5
/// into the last one.
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (i, &p) in probs.iter().enumerate() {
        o_acc += *observed.get(i).unwrap_or(&0) as f64;
        e_acc += p * n as f64;
        if e_acc >= 5.0 {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // Everything beyond the listed probabilities joins the last cell.
    o_acc += observed.iter().skip(probs.len()).sum::<u64>() as f64;
    e_acc += (1.0 - probs.iter().sum::<f64>()).max(0.0) * n as f64;
    if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
        *o += o_acc;
        *e += e_acc;
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = obs.len() - 1;
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}

pub fn poisson_probs(mean: f64, len: usize) -> Vec<f64> {
    let mut p = vec![(-mean).exp()];
    for k in 1..len {
        let prev = p[k - 1];
        p.push(prev * mean / k as f64);
    }
    p
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
