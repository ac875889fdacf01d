mod common;

use common::log_slope;
use hawkeslab::distributions::DisplacementSpec;
use hawkeslab::renewal_calc::{
    convolve, palm_local_finiteness_scan, palm_mean_measure, renewal_function, two_index_mean, Finiteness,
    GridMeasure, PalmSettings, ScanSettings,
};
use hawkeslab::Error;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

/// Measures whose masses are multiples of 2⁻⁸ below 1: every product and
/// partial sum is exact in binary floating point.
fn dyadic() -> impl Strategy<Value = GridMeasure> {
    (-20i64..20, prop::collection::vec(0u32..256, 1..40), 0u32..256).prop_map(|(k_lo, m, a)| GridMeasure {
        h: 0.5,
        k_lo,
        masses: m.into_iter().map(|v| v as f64 / 256.0).collect(),
        atom0: a as f64 / 256.0,
        truncated: 0.0,
    })
}

proptest! {
    #[test]
    fn convolution_is_exactly_commutative(a in dyadic(), b in dyadic()) {
        prop_assert_eq!(convolve(&a, &b).unwrap(), convolve(&b, &a).unwrap());
    }

    #[test]
    fn convolution_is_exactly_associative(a in dyadic(), b in dyadic(), c in dyadic()) {
        let left = convolve(&convolve(&a, &b).unwrap(), &c).unwrap();
        let right = convolve(&a, &convolve(&b, &c).unwrap()).unwrap();
        for k in left.k_lo.min(right.k_lo)..=left.k_hi().max(right.k_hi()) {
            prop_assert_eq!(left.cell(k), right.cell(k));
        }
        prop_assert_eq!(left.atom0, right.atom0);
    }

    #[test]
    fn convolution_multiplies_totals(a in dyadic(), b in dyadic()) {
        let c = convolve(&a, &b).unwrap();
        prop_assert_eq!(c.total(), a.total() * b.total());
    }
}

#[test]
fn large_convolutions_match_direct_sums() {
    // Big enough for the FFT path; compared against a test-side double loop.
    let n = 1200;
    let a: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 + 1.0) / 1e4).collect();
    let b: Vec<f64> = (0..n).map(|i| ((i * 53 % 97) as f64 + 1.0) / 1e4).collect();
    let ga = GridMeasure { h: 0.1, k_lo: 1, masses: a.clone(), atom0: 0.0, truncated: 0.0 };
    let gb = GridMeasure { h: 0.1, k_lo: -3, masses: b.clone(), atom0: 0.0, truncated: 0.0 };
    let c = convolve(&ga, &gb).unwrap();
    let mut direct = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            direct[i + j] += a[i] * b[j];
        }
    }
    for (i, d) in direct.iter().enumerate() {
        assert!((c.cell(i as i64 - 2) - d).abs() < 1e-12 * d.max(1.0), "index {i}");
    }
}

#[test]
fn renewal_of_a_lattice_law_matches_the_recursion() {
    // F = 0.2 δ₁ + 0.5 δ₂ + 0.3 δ₃ on h = 1; u_n = Σ_k f_k u_{n−k}, u_0 = 1.
    let f = [0.0, 0.2, 0.5, 0.3];
    let grid = GridMeasure { h: 1.0, k_lo: 0, masses: f.to_vec(), atom0: 0.0, truncated: 0.0 };
    let n = 200;
    let u = renewal_function(&grid, n as f64).unwrap();
    let mut want = vec![0.0; n + 1];
    want[0] = 1.0;
    for i in 1..=n {
        want[i] = (1..=3).filter(|&k| k <= i).map(|k| f[k] * want[i - k]).sum();
    }
    assert_eq!(u.atom0, 1.0);
    for i in 1..=n {
        assert!((u.cell(i as i64) - want[i]).abs() < 1e-12, "n = {i}");
    }
    // Elementary renewal theorem: u_n → 1/E X = 1/2.1.
    assert!((want[n] - 1.0 / 2.1).abs() < 1e-9);
}

#[test]
fn renewal_function_follows_karamata() {
    // U(x) ~ x^α / (ℓ Γ(1 + α)) with Laplace ℓ = Γ(1 − α) for x_m = 1.
    let alpha = 0.4;
    let spec = DisplacementSpec::pareto(alpha, 1.0).unwrap();
    let (h, x_max) = (0.05, 1e4);
    let u = renewal_function(&GridMeasure::from_spec(&spec, h, x_max), x_max).unwrap();
    let xs: Vec<f64> = (0..=8).map(|i| 10f64.powf(2.0 + 0.25 * i as f64)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| u.cumulative(x)).collect();
    let slope = log_slope(&xs, &ys);
    assert!((slope - alpha).abs() < 0.02, "slope {slope}");
    let asym = x_max.powf(alpha) / (gamma(1.0 - alpha) * gamma(1.0 + alpha));
    let ratio = u.cumulative(x_max) / asym;
    assert!((ratio - 1.0).abs() < 0.1, "constant ratio {ratio}");
}

fn two_index_at(a1: f64, a2: f64, x: f64) -> GridMeasure {
    let h = 0.02;
    let f1 = GridMeasure::from_spec(&DisplacementSpec::pareto_with_laplace_ell(a1, 1.0).unwrap(), h, x);
    let f2 = GridMeasure::from_spec(&DisplacementSpec::pareto_with_laplace_ell(a2, 1.0).unwrap(), h, x);
    two_index_mean(&f1, &f2, x).unwrap()
}

#[test]
fn two_index_mean_is_symmetric_in_the_indices() {
    let x = 2e3;
    let a = two_index_at(0.3, 0.7, x);
    let b = two_index_at(0.7, 0.3, x);
    for probe in [10.0, 100.0, 1000.0, 2000.0] {
        let (u, v) = (a.cumulative(probe), b.cumulative(probe));
        assert!((u - v).abs() < 1e-9 * u, "x = {probe}: {u} vs {v}");
    }
}

#[test]
fn balanced_indices_give_elementary_renewal_behaviour() {
    let x = 1e4;
    let u = two_index_at(0.5, 0.5, x);
    let r = u.cumulative(x) / x;
    assert!((r - 1.0).abs() < 0.1, "ratio {r}");
}

#[test]
fn subcritical_index_sum_grows_like_its_karamata_power() {
    // α₁ + α₂ = 0.8: Ū(x) ~ x^0.8 / Γ(1.8) when ℓ₁ℓ₂ = 1.
    let x_max = 1e4;
    let u = two_index_at(0.3, 0.5, x_max);
    let xs: Vec<f64> = (0..=8).map(|i| 10f64.powf(2.0 + 0.25 * i as f64)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| u.cumulative(x)).collect();
    let slope = log_slope(&xs, &ys);
    assert!((slope - 0.8).abs() < 0.02, "slope {slope}");
    let ratio = u.cumulative(x_max) / (x_max.powf(0.8) / gamma(1.8));
    assert!((ratio - 1.0).abs() < 0.1, "constant ratio {ratio}");
    assert!(u.cumulative(x_max) / x_max < u.cumulative(1e2) / 1e2);
}

#[test]
fn palm_measure_is_symmetric_with_unit_atom() {
    let spec = DisplacementSpec::pareto(0.3, 1.0).unwrap();
    let grid = GridMeasure::from_spec(&spec, 0.1, 2e3);
    let palm = palm_mean_measure(&grid, 2e3, PalmSettings::default()).unwrap();
    let u0 = &palm.measure;
    assert_eq!(u0.atom0, 1.0);
    for k in u0.k_lo..=u0.k_hi() {
        assert_eq!(u0.cell(k), u0.cell(-k));
    }
    assert!(palm.last_increment < 1e-6);
}

#[test]
fn palm_measure_diverges_for_a_recurrent_symmetrization() {
    let spec = DisplacementSpec::exponential(1.0).unwrap();
    let grid = GridMeasure::from_spec(&spec, 0.1, 500.0);
    let settings = PalmSettings { max_doublings: 12, ..PalmSettings::default() };
    match palm_mean_measure(&grid, 500.0, settings) {
        Err(Error::Divergent { terms, .. }) => assert_eq!(terms, 1 << 12),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn scan_separates_the_two_regimes() {
    let scan = palm_local_finiteness_scan(&[0.2, 0.3, 0.7, 0.8], &ScanSettings::default()).unwrap();
    let classes: Vec<Finiteness> = scan.iter().map(|e| e.class).collect();
    assert_eq!(
        classes,
        [Finiteness::Bounded, Finiteness::Bounded, Finiteness::Growing, Finiteness::Growing]
    );
    for e in &scan {
        assert!(e.values.windows(2).all(|w| w[1].1 >= w[0].1), "values grow with the range");
    }
}

#[test]
fn csv_export_has_metadata_and_rows() {
    let g = GridMeasure::from_spec(&DisplacementSpec::exponential(1.0).unwrap(), 0.5, 5.0);
    let mut out = Vec::new();
    g.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert!(text.contains("# h"));
    assert!(text.lines().any(|l| l == "x,mass"));
    assert_eq!(rows, 1 + g.len());
}
