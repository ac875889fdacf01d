//! Point configurations, the Poisson clustering operation and budgeted
//! simulation of single Hawkes families.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::Serialize;

use crate::distributions::DisplacementSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Finite sorted multiset of positions. Points live in
/// `[lo − buffer, hi]`; statistics are read on the window `[lo, hi]` only.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfiguration {
    points: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub buffer: f64,
}

impl PointConfiguration {
    pub fn empty(lo: f64, hi: f64, buffer: f64) -> Self {
        assert!(hi >= lo && buffer >= 0.0, "bad window [{lo}, {hi}] buffer {buffer}");
        Self {
            points: Vec::new(),
            lo,
            hi,
            buffer,
        }
    }

    /// Builds a configuration from arbitrary positions, dropping those
    /// outside the stored range.
    pub fn from_points(mut points: Vec<f64>, lo: f64, hi: f64, buffer: f64) -> Self {
        let mut c = Self::empty(lo, hi, buffer);
        points.retain(|&x| c.stores(x));
        points.sort_by(f64::total_cmp);
        c.points = points;
        c
    }

    pub fn stored_lo(&self) -> f64 {
        self.lo - self.buffer
    }

    pub fn stores(&self, x: f64) -> bool {
        x >= self.stored_lo() && x <= self.hi
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn window_len(&self) -> f64 {
        self.hi - self.lo
    }

    /// Number of points in `[a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let start = self.points.partition_point(|&x| x < a);
        let end = self.points.partition_point(|&x| x <= b);
        end.saturating_sub(start)
    }

    pub fn window_count(&self) -> usize {
        self.count_in(self.lo, self.hi)
    }

    pub fn window_points(&self) -> &[f64] {
        let start = self.points.partition_point(|&x| x < self.lo);
        let end = self.points.partition_point(|&x| x <= self.hi);
        &self.points[start..end]
    }

    /// Adds the points of `other` (same geometry assumed).
    pub fn merge(&mut self, other: &PointConfiguration) {
        let mut merged = Vec::with_capacity(self.points.len() + other.points.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.points, &other.points);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                merged.push(a[i]);
                i += 1;
            } else {
                merged.push(b[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend_from_slice(&b[j..]);
        self.points = merged;
    }

    /// One position per line with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for x in &self.points {
            writeln!(out, "{x:.16e}")?;
        }
        Ok(())
    }
}

/// The cluster field `[F, m]`: every point gets `Pois(m)` children displaced
/// by independent draws from `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterField {
    pub f: DisplacementSpec,
    pub m: f64,
}

impl ClusterField {
    pub fn new(f: DisplacementSpec, m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::invalid("m", format!("branching coefficient {m} must be >= 0")));
        }
        Ok(Self { f, m })
    }

    pub fn critical(f: DisplacementSpec) -> Self {
        Self { f, m: 1.0 }
    }
}

/// Children of one clustering step; children outside the stored range are
/// discarded.
pub fn cluster_once(
    field: &ClusterField,
    config: &PointConfiguration,
    rng: &mut RngStream,
) -> PointConfiguration {
    let mut children = Vec::new();
    for &t in config.points() {
        let k = rng.poisson(field.m);
        for _ in 0..k {
            let x = t + field.f.sample(rng);
            if config.stores(x) {
                children.push(x);
            }
        }
    }
    PointConfiguration::from_points(children, config.lo, config.hi, config.buffer)
}

/// Homogeneous Poisson field of intensity `eta` on the stored range.
pub fn poisson_field(
    eta: f64,
    lo: f64,
    hi: f64,
    buffer: f64,
    rng: &mut RngStream,
) -> PointConfiguration {
    let start = lo - buffer;
    let len = hi - start;
    let n = rng.poisson(eta * len);
    let pts = (0..n).map(|_| start + len * rng.unit()).collect();
    PointConfiguration::from_points(pts, lo, hi, buffer)
}

#[derive(Clone, Debug)]
pub struct GenerationRun {
    /// `Σ_{g ≤ g_max} N^(g)`.
    pub total: PointConfiguration,
    /// `N^(g)` window counts for `g = 0..=g_max`.
    pub window_counts: Vec<usize>,
}

/// Iterated construction `N = Σ_g N^(g)` with `N^(0)` Poisson of intensity
/// `eta` and `N^(g)` the children of `N^(g−1)`.
#[allow(clippy::too_many_arguments)]
pub fn iterate_generations(
    eta: f64,
    field: &ClusterField,
    g_max: usize,
    lo: f64,
    hi: f64,
    buffer: f64,
    cap: usize,
    rng: &mut RngStream,
) -> Result<GenerationRun> {
    let mut current = poisson_field(eta, lo, hi, buffer, rng);
    let mut total = current.clone();
    let mut window_counts = vec![current.window_count()];
    if total.len() > cap {
        return Err(Error::BudgetExceeded {
            stored: total.len(),
            cap,
        });
    }
    for _ in 0..g_max {
        if current.is_empty() {
            window_counts.push(0);
            continue;
        }
        current = cluster_once(field, &current, rng);
        window_counts.push(current.window_count());
        if total.len() + current.len() > cap {
            return Err(Error::BudgetExceeded {
                stored: total.len() + current.len(),
                cap,
            });
        }
        total.merge(&current);
    }
    Ok(GenerationRun {
        total,
        window_counts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyResult {
    /// Ancestor-relative positions, sorted, ancestor at 0 included.
    pub points: Vec<f64>,
    pub total_count: usize,
    /// Deepest generation stored.
    pub generations: usize,
    pub censored: bool,
}

/// Breadth-first growth of one family started by an ancestor at 0, stopped
/// at extinction or when `budget` points are stored.
pub fn simulate_family(
    f: &DisplacementSpec,
    m: f64,
    budget: usize,
    rng: &mut RngStream,
) -> FamilyResult {
    simulate_family_until(f, m, budget, f64::INFINITY, rng)
}

/// Like [`simulate_family`], but descendants beyond `cutoff` are neither
/// stored nor expanded. Displacements are nonnegative, so nothing below the
/// cutoff is lost.
pub fn simulate_family_until(
    f: &DisplacementSpec,
    m: f64,
    budget: usize,
    cutoff: f64,
    rng: &mut RngStream,
) -> FamilyResult {
    assert!(budget >= 1, "family budget must be at least 1");
    let mut points = vec![0.0];
    let mut queue: VecDeque<(f64, usize)> = VecDeque::new();
    queue.push_back((0.0, 0));
    let mut generations = 0;
    let mut censored = false;
    'grow: while let Some((pos, depth)) = queue.pop_front() {
        let k = rng.poisson(m);
        for _ in 0..k {
            let x = pos + f.sample(rng);
            if x > cutoff {
                continue;
            }
            if points.len() >= budget {
                censored = true;
                break 'grow;
            }
            points.push(x);
            generations = generations.max(depth + 1);
            queue.push_back((x, depth + 1));
        }
    }
    points.sort_by(f64::total_cmp);
    FamilyResult {
        total_count: points.len(),
        points,
        generations,
        censored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::split_stream;
    use crate::stats::Summary;

    fn det1() -> DisplacementSpec {
        DisplacementSpec::deterministic(1.0).unwrap()
    }

    #[test]
    fn empty_in_empty_out() {
        let mut rng = split_stream(1, 0);
        let field = ClusterField::critical(det1());
        let c = PointConfiguration::empty(0.0, 10.0, 0.0);
        assert!(cluster_once(&field, &c, &mut rng).is_empty());
        let c = PointConfiguration::from_points(vec![1.0, 2.0], 0.0, 10.0, 0.0);
        let dead = ClusterField::new(det1(), 0.0).unwrap();
        assert!(cluster_once(&dead, &c, &mut rng).is_empty());
    }

    #[test]
    fn child_count_mean_is_m_times_input() {
        let field = ClusterField::critical(det1());
        let pts: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let c = PointConfiguration::from_points(pts, 0.0, 2000.0, 0.0);
        let mut s = Summary::new();
        for r in 0..200 {
            let mut rng = split_stream(2, r);
            s.push(cluster_once(&field, &c, &mut rng).len() as f64);
        }
        assert!((s.mean - 1000.0).abs() <= 3.0 * s.stderr(), "{} ± {}", s.mean, s.stderr());
    }

    #[test]
    fn children_lie_right_of_parents() {
        for f in [
            det1(),
            DisplacementSpec::pareto(0.5, 1.0).unwrap(),
            DisplacementSpec::exponential(1.0).unwrap(),
            DisplacementSpec::uniform(0.0, 1.0).unwrap(),
        ] {
            let field = ClusterField::critical(f);
            let c = PointConfiguration::from_points(vec![5.0], 0.0, 1e9, 10.0);
            let mut rng = split_stream(3, 0);
            for _ in 0..50 {
                for &x in cluster_once(&field, &c, &mut rng).points() {
                    assert!(x >= 5.0);
                }
            }
        }
    }

    #[test]
    fn children_outside_storage_dropped() {
        let field = ClusterField::new(det1(), 3.0).unwrap();
        let c = PointConfiguration::from_points(vec![9.5], 0.0, 10.0, 0.0);
        let mut rng = split_stream(4, 0);
        assert!(cluster_once(&field, &c, &mut rng).is_empty());
    }

    #[test]
    fn generation_means_follow_eta_m_pow_g() {
        let field = ClusterField::new(det1(), 0.5).unwrap();
        let len = 1000.0;
        let mut per_g = vec![Summary::new(); 6];
        for r in 0..200 {
            let mut rng = split_stream(5, r);
            // A buffer of 5 keeps generation g ≤ 5 stationary on the window.
            let run = iterate_generations(1.0, &field, 5, 0.0, len, 5.0, usize::MAX, &mut rng).unwrap();
            for (g, &c) in run.window_counts.iter().enumerate() {
                per_g[g].push(c as f64 / len);
            }
        }
        for (g, s) in per_g.iter().enumerate() {
            let expect = 0.5f64.powi(g as i32);
            assert!(
                (s.mean - expect).abs() <= 3.0 * s.stderr(),
                "g={g}: {} vs {expect} ± {}",
                s.mean,
                s.stderr()
            );
        }
    }

    #[test]
    fn no_offspring_is_plain_poisson() {
        let field = ClusterField::new(det1(), 0.0).unwrap();
        let mut rng = split_stream(6, 0);
        let run = iterate_generations(1.0, &field, 5, 0.0, 1e4, 0.0, usize::MAX, &mut rng).unwrap();
        let lam = run.total.window_count() as f64 / 1e4;
        assert!((lam - 1.0).abs() < 0.03);
        assert!(run.window_counts[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn budget_cap_reported() {
        let field = ClusterField::new(det1(), 0.9).unwrap();
        let mut rng = split_stream(7, 0);
        let err = iterate_generations(1.0, &field, 10, 0.0, 1e3, 0.0, 500, &mut rng).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { cap: 500, .. }));
    }

    #[test]
    fn budget_one_family() {
        let f = det1();
        for r in 0..100 {
            let mut a = split_stream(8, r);
            let mut b = a.clone();
            let fam = simulate_family(&f, 1.0, 1, &mut a);
            assert_eq!(fam.total_count, 1);
            assert_eq!(fam.censored, b.poisson(1.0) >= 1);
        }
    }

    #[test]
    fn family_positions_sorted_and_nonnegative() {
        let f = DisplacementSpec::pareto(0.5, 1.0).unwrap();
        let mut rng = split_stream(9, 0);
        for _ in 0..100 {
            let fam = simulate_family(&f, 1.0, 1000, &mut rng);
            assert_eq!(fam.points[0], 0.0);
            assert!(fam.points.windows(2).all(|w| w[0] <= w[1]));
            assert!(fam.total_count <= 1000);
        }
    }

    #[test]
    fn pruned_family_mean_matches_renewal_function() {
        // For exponential(1) displacements the family mean measure of [0, x]
        // is the renewal function 1 + x.
        let f = DisplacementSpec::exponential(1.0).unwrap();
        let mut s = Summary::new();
        for r in 0..4000 {
            let fam = simulate_family_until(&f, 1.0, usize::MAX, 3.0, &mut split_stream(10, r));
            assert!(fam.points.iter().all(|&x| x <= 3.0));
            assert!(!fam.censored);
            s.push(fam.total_count as f64);
        }
        assert!((s.mean - 4.0).abs() <= 3.0 * s.stderr(), "{} ± {}", s.mean, s.stderr());
    }

    #[test]
    fn export_has_17_digits() {
        let c = PointConfiguration::from_points(vec![1.0 / 3.0], 0.0, 1.0, 0.0);
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let back: f64 = line.trim().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
        assert_eq!(line.trim().split('e').next().unwrap().replace('.', "").len(), 17);
    }
}
