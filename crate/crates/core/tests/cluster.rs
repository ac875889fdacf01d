mod common;

use common::{mean_se, poisson_probs};
use hawkeslab::cluster::{cluster_once, iterate_generations, simulate_family, ClusterField, PointConfiguration};
use hawkeslab::distributions::DisplacementSpec;
use hawkeslab::rng::split_stream;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

#[test]
fn critical_deterministic_field_keeps_the_count_on_average() {
    let field = ClusterField::critical(DisplacementSpec::deterministic(1.0).unwrap());
    let parents = PointConfiguration::from_points((0..1000).map(f64::from).collect(), 0.0, 2000.0, 0.0);
    let counts: Vec<f64> = (0..200)
        .map(|r| cluster_once(&field, &parents, &mut split_stream(31, r)).len() as f64)
        .collect();
    let (m, se) = mean_se(&counts);
    assert!((m - 1000.0).abs() <= 3.0 * se, "{m} +- {se}");
}

#[test]
fn subcritical_intensity_is_eta_over_one_minus_m() {
    let field = ClusterField::new(DisplacementSpec::pareto(0.5, 1.0).unwrap(), 0.5).unwrap();
    let lam: Vec<f64> = (0..20)
        .map(|r| {
            let run = iterate_generations(0.5, &field, 40, 0.0, 1e4, 1e5, 10_000_000, &mut split_stream(32, r)).unwrap();
            run.total.window_count() as f64 / 1e4
        })
        .collect();
    let (m, se) = mean_se(&lam);
    assert!((m - 1.0).abs() <= 3.0 * se, "{m} +- {se}");
}

#[test]
fn generation_intensities_follow_the_branching_mean() {
    let field = ClusterField::new(DisplacementSpec::deterministic(1.0).unwrap(), 0.5).unwrap();
    let runs: Vec<Vec<usize>> = (0..100)
        .map(|r| iterate_generations(1.0, &field, 5, 0.0, 1e3, 10.0, 1_000_000, &mut split_stream(33, r)).unwrap().window_counts)
        .collect();
    for g in 0..=5 {
        let xs: Vec<f64> = runs.iter().map(|c| c[g] as f64 / 1e3).collect();
        let (m, se) = mean_se(&xs);
        let want = 0.5f64.powi(g as i32);
        assert!((m - want).abs() <= 3.0 * se, "g = {g}: {m} +- {se}, want {want}");
    }
}

#[test]
fn subcritical_family_size_is_one_over_one_minus_m() {
    let f = DisplacementSpec::exponential(1.0).unwrap();
    let mut rng = split_stream(34, 0);
    let sizes: Vec<f64> = (0..10_000).map(|_| simulate_family(&f, 0.5, 1_000_000, &mut rng).total_count as f64).collect();
    let (m, se) = mean_se(&sizes);
    assert!((m - 2.0).abs() <= 3.0 * se, "{m} +- {se}");
}

#[test]
fn critical_censoring_matches_galton_watson_totals() {
    // Oracle: plain critical Pois(1) Galton–Watson totals, drawn test-side.
    let budget = 1000;
    let reps = 4000;
    let mut oracle_rng = ChaCha8Rng::seed_from_u64(35);
    let pois = Poisson::new(1.0).unwrap();
    let oracle = (0..reps)
        .filter(|_| {
            let (mut alive, mut total) = (1u64, 1u64);
            while alive > 0 && total <= budget {
                let kids: u64 = (0..alive).map(|_| pois.sample(&mut oracle_rng) as u64).sum();
                total += kids;
                alive = kids;
            }
            total > budget
        })
        .count() as f64
        / reps as f64;
    let f = DisplacementSpec::exponential(1.0).unwrap();
    let mut rng = split_stream(35, 0);
    let censored = (0..reps)
        .filter(|_| simulate_family(&f, 1.0, budget as usize, &mut rng).censored)
        .count() as f64
        / reps as f64;
    let se = (2.0 * oracle * (1.0 - oracle) / reps as f64).sqrt();
    assert!((censored - oracle).abs() <= 3.0 * se, "{censored} vs {oracle} (se {se})");
    // P(total > n) ≈ √(2 / (π n)) for critical Poisson branching.
    let asym = (2.0 / (std::f64::consts::PI * budget as f64)).sqrt();
    assert!((censored / asym - 1.0).abs() < 0.35, "{censored} vs {asym}");
}

#[test]
fn child_counts_are_poisson() {
    let field = ClusterField::new(DisplacementSpec::exponential(1.0).unwrap(), 0.7).unwrap();
    let parent = PointConfiguration::from_points(vec![0.0], 0.0, 1e9, 0.0);
    let mut hist = vec![0u64; 12];
    for r in 0..20_000 {
        let k = cluster_once(&field, &parent, &mut split_stream(36, r)).len();
        hist[k.min(11)] += 1;
    }
    assert!(common::chi_square_p(&hist, &poisson_probs(0.7, 11)) > 0.01);
}

proptest! {
    #[test]
    fn counts_are_additive_over_adjacent_intervals(
        pts in prop::collection::vec(0.0f64..100.0, 0..200),
        a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.0f64..100.0,
    ) {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let conf = PointConfiguration::from_points(pts, 0.0, 100.0, 0.0);
        let whole = conf.count_in(v[0], v[2]);
        let parts = conf.count_in(v[0], v[1]) + conf.count_in(v[1], v[2]) - conf.count_in(v[1], v[1]);
        prop_assert_eq!(whole, parts);
    }
}
