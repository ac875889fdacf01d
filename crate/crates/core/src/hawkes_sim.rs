//! Hawkes processes driven by renewal immigration: the subcritical
//! truncated-mean construction and the critical two-index construction
//! started at time 0.

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{simulate_family_until, PointConfiguration};
use crate::distributions::{DisplacementSpec, Law, TruncatedSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Families are simulated in chunks of this many epochs, each chunk on its
/// own child stream.
const FAMILY_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenewalImmigrationSpec {
    #[serde(skip)]
    pub f: DisplacementSpec,
    pub m: f64,
    pub target_lambda: f64,
    pub horizon: f64,
    /// Length of the discarded prefix before time 0.
    pub burn_in: f64,
    pub family_budget: usize,
}

impl RenewalImmigrationSpec {
    /// Defaults: burn-in of 100 horizons, family budget 10^7.
    pub fn new(f: DisplacementSpec, m: f64, target_lambda: f64, horizon: f64) -> Self {
        Self {
            f,
            m,
            target_lambda,
            horizon,
            burn_in: 100.0 * horizon,
            family_budget: 10_000_000,
        }
    }

    /// Truncation level `c(m)` of the interarrival law.
    pub fn truncation(&self) -> Result<f64> {
        self.f.branching_to_truncation(self.m)
    }

    /// Unscaled interarrival law `F_{c(m)}`.
    pub fn interarrival_law(&self) -> Result<TruncatedSpec> {
        Ok(self.f.truncated(self.truncation()?))
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.m) {
            return Err(Error::invalid("m", "renewal immigration needs m in [0, 1)"));
        }
        if !(self.target_lambda > 0.0) {
            return Err(Error::invalid("target_lambda", "must be positive"));
        }
        if !(self.horizon > 0.0) || !(self.burn_in >= 0.0) {
            return Err(Error::invalid("horizon", "horizon must be positive, burn_in nonnegative"));
        }
        if self.family_budget == 0 {
            return Err(Error::invalid("family_budget", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RenewalRun {
    #[serde(skip)]
    pub points: PointConfiguration,
    /// Immigrant epochs inside `[0, horizon]`.
    pub immigrants_in_window: usize,
    pub immigrants_total: usize,
    pub censored_families: usize,
    pub truncation: f64,
    pub burn_in: f64,
}

impl RenewalRun {
    pub fn intensity(&self) -> f64 {
        self.points.window_count() as f64 / self.points.window_len()
    }

    pub fn immigrant_rate(&self) -> f64 {
        self.immigrants_in_window as f64 / self.points.window_len()
    }
}

struct FamilyBatch {
    points: Vec<f64>,
    censored: usize,
}

/// Superposes families started at `epochs`, keeping only points inside
/// `[0, horizon]`.
fn grow_families(
    epochs: &[f64],
    f: &DisplacementSpec,
    m: f64,
    budget: usize,
    horizon: f64,
    rng: &RngStream,
) -> FamilyBatch {
    let batches: Vec<FamilyBatch> = epochs
        .par_chunks(FAMILY_CHUNK)
        .enumerate()
        .map(|(i, chunk)| {
            let mut stream = rng.child(i as u64);
            let mut points = Vec::new();
            let mut censored = 0;
            for &t in chunk {
                let fam = simulate_family_until(f, m, budget, horizon - t, &mut stream);
                censored += usize::from(fam.censored);
                points.extend(fam.points.iter().map(|x| x + t).filter(|&x| x >= 0.0));
            }
            FamilyBatch { points, censored }
        })
        .collect();
    let mut out = FamilyBatch {
        points: Vec::new(),
        censored: 0,
    };
    for b in batches {
        out.points.extend(b.points);
        out.censored += b.censored;
    }
    out
}

/// Subcritical Hawkes process with branching coefficient `m` whose
/// immigrants form a renewal process with interarrivals `F_{c(m)}/λ`.
pub fn simulate_renewal_hawkes(spec: &RenewalImmigrationSpec, rng: &mut RngStream) -> Result<RenewalRun> {
    spec.validate()?;
    let c = spec.truncation()?;
    let law = spec.f.truncated(c);
    let mut epochs = Vec::new();
    let mut t = -spec.burn_in;
    while t <= spec.horizon {
        epochs.push(t);
        t += law.sample(rng) / spec.target_lambda;
    }
    let immigrants_in_window = epochs.iter().filter(|&&e| e >= 0.0).count();
    let batch = grow_families(&epochs, &spec.f, spec.m, spec.family_budget, spec.horizon, &rng.child(u64::MAX));
    Ok(RenewalRun {
        points: PointConfiguration::from_points(batch.points, 0.0, spec.horizon, 0.0),
        immigrants_in_window,
        immigrants_total: epochs.len(),
        censored_families: batch.censored,
        truncation: c,
        burn_in: spec.burn_in,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoIndexSpec {
    #[serde(skip)]
    pub f1: DisplacementSpec,
    #[serde(skip)]
    pub f2: DisplacementSpec,
    pub horizon: f64,
    pub family_budget: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoIndexRun {
    #[serde(skip)]
    pub points: PointConfiguration,
    pub epochs: usize,
    pub censored_families: usize,
}

impl TwoIndexRun {
    /// `C(x)`, the number of points in `[0, x]`.
    pub fn cumulative(&self, x: f64) -> usize {
        self.points.count_in(0.0, x)
    }
}

/// Renewal epochs from `F1` on `[0, horizon]`, the first at 0, each starting
/// a critical family with displacement law `F2`. Family points beyond the
/// horizon are never generated.
pub fn simulate_two_index(spec: &TwoIndexSpec, rng: &mut RngStream) -> Result<TwoIndexRun> {
    if !(spec.horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be nonnegative"));
    }
    if spec.family_budget == 0 {
        return Err(Error::invalid("family_budget", "must be at least 1"));
    }
    let mut epochs = Vec::new();
    let mut t = 0.0;
    while t <= spec.horizon {
        epochs.push(t);
        t += spec.f1.sample(rng);
    }
    let batch = grow_families(&epochs, &spec.f2, 1.0, spec.family_budget, spec.horizon, &rng.child(u64::MAX));
    Ok(TwoIndexRun {
        points: PointConfiguration::from_points(batch.points, 0.0, spec.horizon, 0.0),
        epochs: epochs.len(),
        censored_families: batch.censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::split_stream;
    use crate::stats::Summary;

    fn pareto(a: f64, x: f64) -> DisplacementSpec {
        DisplacementSpec::pareto(a, x).unwrap()
    }

    #[test]
    fn no_offspring_is_pure_renewal() {
        let mut spec = RenewalImmigrationSpec::new(pareto(0.5, 1.0), 0.0, 2.0, 1e4);
        spec.burn_in = 1e4;
        let run = simulate_renewal_hawkes(&spec, &mut split_stream(1, 0)).unwrap();
        assert_eq!(run.points.window_count(), run.immigrants_in_window);
        // Interarrival mean μ(c(0))/λ = 1/2, so about 2 epochs per unit time.
        assert!((run.immigrant_rate() - 2.0).abs() < 0.1, "{}", run.immigrant_rate());
    }

    #[test]
    fn interarrival_mean_matches_truncated_mean() {
        let spec = RenewalImmigrationSpec::new(pareto(0.5, 1.0), 0.9, 1.0, 1.0);
        let law = spec.interarrival_law().unwrap();
        let mut rng = split_stream(2, 0);
        let s = Summary::from_slice(&(0..100_000).map(|_| law.sample(&mut rng)).collect::<Vec<_>>());
        assert!((s.mean - 10.0).abs() <= 3.0 * s.stderr(), "{} ± {}", s.mean, s.stderr());
    }

    #[test]
    fn rejects_critical_m() {
        let spec = RenewalImmigrationSpec::new(pareto(0.5, 1.0), 1.0, 1.0, 10.0);
        assert!(simulate_renewal_hawkes(&spec, &mut split_stream(0, 0)).is_err());
    }

    #[test]
    fn two_index_empty_and_origin_cases() {
        let spec = TwoIndexSpec {
            f1: DisplacementSpec::deterministic(5.0).unwrap(),
            f2: DisplacementSpec::deterministic(1.0).unwrap(),
            horizon: 0.5,
            family_budget: 100,
        };
        let run = simulate_two_index(&spec, &mut split_stream(3, 0)).unwrap();
        // Only the epoch at 0 falls in the window, and its children land at 1.
        assert_eq!(run.epochs, 1);
        assert_eq!(run.points.points(), &[0.0]);
    }

    #[test]
    fn two_index_points_lie_right_of_first_epoch_and_in_window() {
        let spec = TwoIndexSpec {
            f1: pareto(0.3, 1.0),
            f2: pareto(0.7, 0.5),
            horizon: 1000.0,
            family_budget: 100_000,
        };
        for r in 0..20 {
            let run = simulate_two_index(&spec, &mut split_stream(4, r)).unwrap();
            assert!(run.points.points().iter().all(|&x| (0.0..=1000.0).contains(&x)));
            assert!(run.cumulative(1000.0) >= run.epochs);
        }
    }

    #[test]
    fn same_seed_same_run() {
        let spec = RenewalImmigrationSpec::new(pareto(0.5, 1.0), 0.5, 1.0, 1e3);
        let a = simulate_renewal_hawkes(&spec, &mut split_stream(5, 1)).unwrap();
        let b = simulate_renewal_hawkes(&spec, &mut split_stream(5, 1)).unwrap();
        assert_eq!(a.points, b.points);
    }
}
