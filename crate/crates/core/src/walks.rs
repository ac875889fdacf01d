//! Occupation diagnostics for symmetric random walks: expected visits to
//! `[−h, h]` along dyadic checkpoints and a slope-based transience label.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{Law, SymmetrizedSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{log_log_slope, Summary};

/// A probability law on the integers, `probs[i]` at `k_lo + i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeLaw {
    pub k_lo: i64,
    pub probs: Vec<f64>,
}

impl LatticeLaw {
    pub fn new(k_lo: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("probs", "need a nonempty list of nonnegative weights"));
        }
        Ok(Self { k_lo, probs })
    }

    pub fn pmf(&self, k: i64) -> f64 {
        let i = k - self.k_lo;
        if i < 0 || i >= self.probs.len() as i64 {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.probs.len() as i64 - 1
    }
}

#[derive(Clone, Debug)]
pub enum StepLaw {
    Symmetrized(SymmetrizedSpec),
    Lattice(LatticeLaw),
}

enum Sampler<'a> {
    Continuous(&'a SymmetrizedSpec),
    Lattice(i64, WeightedIndex<f64>),
}

impl Sampler<'_> {
    fn new(law: &StepLaw) -> Result<Sampler<'_>> {
        Ok(match law {
            StepLaw::Symmetrized(s) => Sampler::Continuous(s),
            StepLaw::Lattice(l) => Sampler::Lattice(
                l.k_lo,
                WeightedIndex::new(&l.probs).map_err(|e| Error::invalid("probs", e.to_string()))?,
            ),
        })
    }

    fn step(&self, rng: &mut RngStream) -> f64 {
        match self {
            Sampler::Continuous(s) => s.sample(rng),
            Sampler::Lattice(k_lo, w) => (k_lo + w.sample(rng) as i64) as f64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WalkSpec {
    pub step: StepLaw,
    pub n_steps: u64,
    /// Half-width of the target interval `[−h, h]`.
    pub h: f64,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationCurve {
    pub checkpoints: Vec<u64>,
    /// Mean of `#{g ≤ n : S_g ∈ [−h, h]}` at each checkpoint.
    pub mean_visits: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replications: usize,
    /// Mean visits to `[−h, 0)` and `(0, h]` over the whole walk.
    pub left_visits: f64,
    pub right_visits: f64,
}

impl OccupationCurve {
    /// A curve from given values, with zero standard errors.
    pub fn from_values(checkpoints: Vec<u64>, mean_visits: Vec<f64>) -> Self {
        let n = mean_visits.len();
        Self {
            checkpoints,
            mean_visits,
            stderr: vec![0.0; n],
            replications: 0,
            left_visits: 0.0,
            right_visits: 0.0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,mean_visits,stderr")?;
        for ((n, m), s) in self.checkpoints.iter().zip(&self.mean_visits).zip(&self.stderr) {
            writeln!(out, "{n},{m},{s}")?;
        }
        Ok(())
    }
}

/// Dyadic checkpoints `2⁵, 2⁶, …` up to `n`, ending at `n` itself.
pub fn dyadic_checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut c = 32;
    while c < n {
        out.push(c);
        c *= 2;
    }
    out.push(n);
    out
}

/// Visit counts of one walk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkSample {
    /// Visits to `[−h, h]` up to each checkpoint.
    pub visits: Vec<u64>,
    pub left: u64,
    pub right: u64,
}

fn one_walk(sampler: &Sampler, checkpoints: &[u64], h: f64, rng: &mut RngStream) -> WalkSample {
    let n_max = *checkpoints.last().unwrap();
    let mut at_checkpoints = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let (mut visits, mut left, mut right) = (0u64, 0u64, 0u64);
    let mut s = 0.0;
    for g in 0..=n_max {
        if g > 0 {
            s += sampler.step(rng);
        }
        if s.abs() <= h {
            visits += 1;
            if s < 0.0 {
                left += 1;
            } else if s > 0.0 {
                right += 1;
            }
        }
        while next < checkpoints.len() && checkpoints[next] == g {
            at_checkpoints.push(visits);
            next += 1;
        }
    }
    WalkSample {
        visits: at_checkpoints,
        left,
        right,
    }
}

fn check(spec: &WalkSpec) -> Result<()> {
    if spec.n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be at least 1"));
    }
    if !(spec.h >= 0.0) {
        return Err(Error::invalid("h", "must be nonnegative"));
    }
    Ok(())
}

/// One walk of `spec.n_steps` steps, counted at [`dyadic_checkpoints`].
pub fn sample_walk(spec: &WalkSpec, rng: &mut RngStream) -> Result<WalkSample> {
    check(spec)?;
    let sampler = Sampler::new(&spec.step)?;
    Ok(one_walk(&sampler, &dyadic_checkpoints(spec.n_steps), spec.h, rng))
}

impl OccupationCurve {
    /// Averages walk samples taken at common checkpoints.
    pub fn from_samples(checkpoints: Vec<u64>, samples: &[WalkSample]) -> Self {
        let mut per = vec![Summary::new(); checkpoints.len()];
        let (mut left, mut right) = (Summary::new(), Summary::new());
        for run in samples {
            for (s, &v) in per.iter_mut().zip(&run.visits) {
                s.push(v as f64);
            }
            left.push(run.left as f64);
            right.push(run.right as f64);
        }
        Self {
            checkpoints,
            mean_visits: per.iter().map(|s| s.mean).collect(),
            stderr: per.iter().map(|s| s.stderr()).collect(),
            replications: samples.len(),
            left_visits: left.mean,
            right_visits: right.mean,
        }
    }
}

/// Monte Carlo occupation curve; replicate `r` uses `rng.child(r)`.
pub fn occupation_curve(spec: &WalkSpec, rng: &RngStream) -> Result<OccupationCurve> {
    check(spec)?;
    let sampler = Sampler::new(&spec.step)?;
    let checkpoints = dyadic_checkpoints(spec.n_steps);
    let runs: Vec<WalkSample> = (0..spec.replications)
        .into_par_iter()
        .map(|r| one_walk(&sampler, &checkpoints, spec.h, &mut rng.child(r as u64)))
        .collect();
    Ok(OccupationCurve::from_samples(checkpoints, &runs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transience {
    Transient,
    Recurrent,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassifySettings {
    pub s_lo: f64,
    pub s_hi: f64,
    /// Number of trailing checkpoints in the slope fit.
    pub tail_points: usize,
    /// The last increment must stay below this fraction of the final value
    /// (or within two standard errors of zero).
    pub cauchy_tol: f64,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            s_lo: 0.05,
            s_hi: 0.2,
            tail_points: 4,
            cauchy_tol: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Classification {
    pub label: Transience,
    pub slope: f64,
    pub flat: bool,
}

pub fn classify_transience(curve: &OccupationCurve, settings: &ClassifySettings) -> Result<Classification> {
    let n = curve.checkpoints.len();
    if n < 4 {
        return Err(Error::invalid("curve", "needs at least 4 checkpoints"));
    }
    let k = settings.tail_points.clamp(2, n);
    let xs: Vec<f64> = curve.checkpoints[n - k..].iter().map(|&c| c as f64).collect();
    let slope = log_log_slope(&xs, &curve.mean_visits[n - k..]);
    let last = curve.mean_visits[n - 1];
    let inc = last - curve.mean_visits[n - 2];
    let noise = 2.0 * curve.stderr[n - 1].hypot(curve.stderr[n - 2]);
    let flat = inc <= settings.cauchy_tol * last || inc <= noise;
    let label = if slope < settings.s_lo && flat {
        Transience::Transient
    } else if slope > settings.s_hi {
        Transience::Recurrent
    } else {
        Transience::Inconclusive
    };
    Ok(Classification { label, slope, flat })
}
