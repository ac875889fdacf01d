//! Critical INAR(∞) processes: the Poisson thinning recursion, its
//! autoregressive innovations and the symmetrized lattice step law.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;
use crate::rng::RngStream;
use crate::stats::{chi_square_test, poisson_pmf, Summary};
use crate::walks::LatticeLaw;

/// Default cap on the total number of simulated events.
pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InarSpec {
    /// `alpha[k − 1]` is the weight of lag `k`.
    pub alpha: Vec<f64>,
    pub target_lambda: f64,
    /// Weight removed by truncating the lags at `k_max` before renormalizing.
    pub tail_mass: f64,
}

impl InarSpec {
    pub fn new(alpha: Vec<f64>, target_lambda: f64) -> Result<Self> {
        let spec = Self {
            alpha,
            target_lambda,
            tail_mass: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Critical weights `α_k ∝ k^(−exponent)`, `k ≤ k_max`, renormalized to
    /// sum 1; the tail beyond `k_max` is recorded as `tail_mass`.
    pub fn power_law(exponent: f64, k_max: usize, target_lambda: f64) -> Result<Self> {
        if !(exponent > 1.0) || k_max == 0 {
            return Err(Error::invalid("exponent", "needs exponent > 1 and k_max >= 1"));
        }
        let raw: Vec<f64> = (1..=k_max).map(|k| (k as f64).powf(-exponent)).collect();
        let kept: f64 = raw.iter().sum();
        // Σ_{k>K} k^(−s) ≈ ∫_{K+½}^∞ x^(−s) dx.
        let tail = (k_max as f64 + 0.5).powf(1.0 - exponent) / (exponent - 1.0);
        let mut spec = Self::new(raw.iter().map(|a| a / kept).collect(), target_lambda)?;
        spec.tail_mass = tail / (kept + tail);
        Ok(spec)
    }

    pub fn k_max(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::invalid("alpha", "needs k_max >= 1"));
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::invalid("alpha", "weights must be nonnegative"));
        }
        if self.total() > 1.0 + 1e-12 {
            return Err(Error::invalid("alpha", "weights must sum to at most 1"));
        }
        if !(self.target_lambda > 0.0) {
            return Err(Error::invalid("target_lambda", "must be positive"));
        }
        Ok(())
    }
}

/// How offspring counts are drawn in one recursion step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InarMode {
    /// One `Pois(Σ_k α_k X_{n−k})` draw per time step.
    Aggregate,
    /// One `Pois(α_k)` draw per individual and lag.
    PerIndividual,
}

#[derive(Clone, Debug, Serialize)]
pub struct InarPath {
    /// Time index of `x[0]`.
    pub start: i64,
    pub x: Vec<u64>,
    pub burn_in: usize,
    pub total_events: u64,
}

impl InarPath {
    pub fn at(&self, n: i64) -> u64 {
        self.x[(n - self.start) as usize]
    }

    /// `X_0, …, X_{N−1}`.
    pub fn observed(&self) -> &[u64] {
        let off = (-self.start) as usize;
        &self.x[off..]
    }

    pub fn len(&self) -> usize {
        self.observed().len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed().is_empty()
    }

    /// CSV `n,X,u` over the observed range.
    pub fn write_csv<W: Write>(&self, spec: &InarSpec, mut out: W) -> io::Result<()> {
        let u = innovations(self, spec).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        writeln!(out, "n,X,u")?;
        for (n, (x, u)) in self.observed().iter().zip(&u).enumerate() {
            writeln!(out, "{n},{x},{u}")?;
        }
        Ok(())
    }
}

/// Simulates `X_n` for `n < N` after `burn_in` discarded steps; the
/// `k_max` values before the burn-in are iid `Pois(λ)`.
pub fn simulate_inar(spec: &InarSpec, n: usize, burn_in: usize, cap: u64, rng: &mut RngStream) -> Result<InarPath> {
    simulate_inar_with(spec, n, burn_in, cap, InarMode::Aggregate, None, rng)
}

/// Full control: drawing mode and an optional explicit prehistory of
/// length `k_max` (oldest first).
pub fn simulate_inar_with(
    spec: &InarSpec,
    n: usize,
    burn_in: usize,
    cap: u64,
    mode: InarMode,
    prehistory: Option<&[u64]>,
    rng: &mut RngStream,
) -> Result<InarPath> {
    spec.validate()?;
    let k_max = spec.k_max();
    let len = k_max + burn_in + n;
    let mut x = vec![0u64; len];
    match prehistory {
        Some(p) => {
            if p.len() != k_max {
                return Err(Error::invalid("prehistory", "length must equal k_max"));
            }
            x[..k_max].copy_from_slice(p);
        }
        None => {
            for v in &mut x[..k_max] {
                *v = rng.poisson(spec.target_lambda);
            }
        }
    }
    let mut total: u64 = x[..k_max].iter().sum();
    let explosion = |total: u64| Error::Explosion { events: total, cap };
    if total > cap {
        return Err(explosion(total));
    }
    match mode {
        InarMode::Aggregate => {
            // Forward scatter of conditional means.
            let mut mean = vec![0.0; len];
            for t in 0..len {
                if t >= k_max {
                    x[t] = rng.poisson(mean[t]);
                    total += x[t];
                    if total > cap {
                        return Err(explosion(total));
                    }
                }
                if x[t] > 0 {
                    let xt = x[t] as f64;
                    let end = (t + k_max).min(len - 1);
                    for (m, a) in mean[t + 1..=end].iter_mut().zip(&spec.alpha) {
                        *m += a * xt;
                    }
                }
            }
        }
        InarMode::PerIndividual => {
            for t in k_max..len {
                let mut count = 0;
                for (k, &a) in spec.alpha.iter().enumerate() {
                    for _ in 0..x[t - k - 1] {
                        count += rng.poisson(a);
                    }
                }
                x[t] = count;
                total += count;
                if total > cap {
                    return Err(explosion(total));
                }
            }
        }
    }
    Ok(InarPath {
        start: -((k_max + burn_in) as i64),
        x,
        burn_in,
        total_events: total,
    })
}

/// `u_n = X_n − Σ_k α_k X_{n−k}` for the observed `n ≥ 0`.
pub fn innovations(path: &InarPath, spec: &InarSpec) -> Result<Vec<f64>> {
    let k_max = spec.k_max() as i64;
    if path.start > -k_max {
        return Err(Error::invalid("path", "lag window before time 0 is incomplete"));
    }
    let n = path.len() as i64;
    let mut u = Vec::with_capacity(n as usize);
    for t in 0..n {
        let mut m = 0.0;
        for (k, a) in spec.alpha.iter().enumerate() {
            m += a * path.at(t - k as i64 - 1) as f64;
        }
        u.push(path.at(t) as f64 - m);
    }
    Ok(u)
}

/// `ξ_k = #{l ≤ K : Y_l = k}` for `K` offspring with lags drawn from `lags`.
pub fn thinning_draw(k: u64, lags: &WeightedIndex<f64>, k_max: usize, rng: &mut RngStream) -> Vec<u64> {
    let mut xi = vec![0u64; k_max];
    for _ in 0..k {
        xi[lags.sample(rng)] += 1;
    }
    xi
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub observed: f64,
    pub expected: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn within(observed: f64, expected: f64, stderr: f64, z: f64) -> Self {
        Self {
            observed,
            expected,
            stderr,
            pass: (observed - expected).abs() <= z * stderr,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThinningReport {
    pub replications: usize,
    /// Every draw with `K = 0` produced all-zero counts.
    pub zero_draws_empty: bool,
    pub zero_draws: usize,
    pub mean_xi1: OracleCheck,
    pub cov_xi1_xi2: OracleCheck,
    /// Chi-square fit of `ξ_1` to `Pois(α_1)`: (statistic, p-value, dof).
    pub chi_square_xi1: (f64, f64, usize),
    pub chi_square_pass: bool,
}

impl ThinningReport {
    pub fn passed(&self) -> bool {
        self.zero_draws_empty && self.mean_xi1.pass && self.cov_xi1_xi2.pass && self.chi_square_pass
    }
}

/// Draws `K ~ Pois(1)` offspring with iid lags from the normalized weights
/// and checks that the lag counts are independent Poisson variables.
pub fn thinning_counts_check(spec: &InarSpec, replications: usize, rng: &mut RngStream) -> Result<ThinningReport> {
    spec.validate()?;
    if spec.k_max() < 2 {
        return Err(Error::invalid("alpha", "needs at least two lags"));
    }
    if replications < 2 {
        return Err(Error::invalid("replications", "needs at least 2"));
    }
    let total = spec.total();
    let lags = WeightedIndex::new(&spec.alpha).map_err(|e| Error::invalid("alpha", e.to_string()))?;
    let a1 = spec.alpha[0] / total;
    let mut xi1 = Vec::with_capacity(replications);
    let mut xi2 = Vec::with_capacity(replications);
    let mut zero_draws = 0;
    let mut zero_draws_empty = thinning_draw(0, &lags, spec.k_max(), rng).iter().all(|&c| c == 0);
    for _ in 0..replications {
        let k = rng.poisson(1.0);
        let xi = thinning_draw(k, &lags, spec.k_max(), rng);
        if k == 0 {
            zero_draws += 1;
            zero_draws_empty &= xi.iter().all(|&c| c == 0);
        }
        xi1.push(xi[0] as f64);
        xi2.push(xi[1] as f64);
    }
    let s1 = Summary::from_slice(&xi1);
    let s2 = Summary::from_slice(&xi2);
    let prods: Vec<f64> = xi1.iter().zip(&xi2).map(|(x, y)| (x - s1.mean) * (y - s2.mean)).collect();
    let cov = Summary::from_slice(&prods);
    let n = replications as f64;
    let cov_est = cov.mean * n / (n - 1.0);
    let max = xi1.iter().cloned().fold(0.0, f64::max) as usize;
    let mut observed = vec![0u64; max + 2];
    for &v in &xi1 {
        observed[v as usize] += 1;
    }
    let mut expected: Vec<f64> = poisson_pmf(a1, max + 1).iter().map(|p| p * n).collect();
    // Last cell collects the upper tail.
    let head: f64 = expected.iter().sum();
    expected.push((n - head).max(0.0));
    let chi = chi_square_test(&observed, &expected);
    Ok(ThinningReport {
        replications,
        zero_draws_empty,
        zero_draws,
        mean_xi1: OracleCheck::within(s1.mean, a1, s1.stderr(), 3.0),
        cov_xi1_xi2: OracleCheck::within(cov_est, 0.0, cov.stderr(), 3.0),
        chi_square_xi1: chi,
        chi_square_pass: chi.1 >= 0.01,
    })
}

/// `p_k = Σ_l α_l α_{k+l}` on `−(k_max − 1) ..= k_max − 1`, mirrored so
/// that `p_k = p_{−k}` holds exactly.
pub fn symmetrized_lattice_step(spec: &InarSpec) -> Result<LatticeLaw> {
    spec.validate()?;
    let a = &spec.alpha;
    let k = a.len();
    let mut rev = a.clone();
    rev.reverse();
    // (α * reversed α)[i] = p_{i − (k − 1)}
    let corr: Vec<f64> = if k <= 2048 {
        let mut out = vec![0.0; 2 * k - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in rev.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    } else {
        fft::linear(a, &rev, 2 * k - 1).into_iter().map(|v| v.max(0.0)).collect()
    };
    let mid = k - 1;
    let mut probs = corr.clone();
    for d in 1..k {
        let v = 0.5 * (corr[mid - d] + corr[mid + d]);
        probs[mid - d] = v;
        probs[mid + d] = v;
    }
    LatticeLaw::new(-(mid as i64), probs)
}
