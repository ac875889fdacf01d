//! Displacement laws on `[0, ∞)` and the objects derived from them:
//! truncation at a level `c`, the truncated mean `μ(c)` and its generalized
//! inverse, the negated law and the symmetrized law of `X₁ − X₂`.
//!
//! Two normalizations of a regularly varying tail are in circulation. For a
//! Pareto law `1 − F(x) = (x_m/x)^α` we expose
//!
//! * [`DisplacementSpec::tail_ell_laplace`] `= x_m^α Γ(1−α)`, the constant for
//!   which `1 − F̂(s) ~ ℓ s^α` as `s ↓ 0`; the renewal asymptotics
//!   `U(x) ~ x^α / (ℓ Γ(1+α))` use this one, and
//! * [`DisplacementSpec::tail_ell_gamma_plus`] `= x_m^α Γ(1+α)`, the constant
//!   that solves `1 − F(x) = ℓ / (x^α Γ(1+α))` literally.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Relative tolerance of the bisection behind [`DisplacementSpec::mu_inverse`].
pub const MU_INVERSE_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Pareto { alpha: f64, x_m: f64 },
    Exponential { rate: f64 },
    Deterministic { a: f64 },
    Uniform { a: f64, b: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementSpec {
    pub family: Family,
    pub label: String,
}

/// `F_c(x) = P[1{X ≤ c} X ≤ x]`: the event `{X > c}` becomes an atom at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSpec {
    pub base: DisplacementSpec,
    pub c: f64,
}

/// Law of `X₁ − X₂` for independent `X₁, X₂` drawn from `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizedSpec {
    pub base: DisplacementSpec,
}

/// Constants `(r, R)` with `lim f(x) x^{1+α} = r` and `sup f(x) x^{1+α} = R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailConstants {
    pub alpha: f64,
    pub r: f64,
    pub big_r: f64,
}

impl TailConstants {
    /// Whether the constants fall in the range required for the critical
    /// limit: finite positive `r, R` and `α ∈ (0, 0.5)`.
    pub fn admissible(&self) -> bool {
        self.r > 0.0
            && self.big_r.is_finite()
            && self.alpha > 0.0
            && self.alpha < 0.5
    }
}

/// Anything that can be sampled and has a distribution function.
pub trait Law {
    fn cdf(&self, x: f64) -> f64;
    fn sample(&self, rng: &mut RngStream) -> f64;
}

impl DisplacementSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Pareto { alpha, x_m } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::invalid("alpha", format!("tail index {alpha} not in (0, 1]")));
                }
                if !(x_m > 0.0 && x_m.is_finite()) {
                    return Err(Error::invalid("x_m", format!("scale {x_m} must be positive")));
                }
            }
            Family::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::invalid("rate", format!("rate {rate} must be positive")));
                }
            }
            Family::Deterministic { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::invalid("a", format!("position {a} must be positive")));
                }
            }
            Family::Uniform { a, b } => {
                if !(a >= 0.0 && b > a && b.is_finite()) {
                    return Err(Error::invalid("b", format!("need 0 <= a < b, got a={a}, b={b}")));
                }
            }
        }
        let label = default_label(&family);
        Ok(Self { family, label })
    }

    pub fn pareto(alpha: f64, x_m: f64) -> Result<Self> {
        Self::new(Family::Pareto { alpha, x_m })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }

    pub fn deterministic(a: f64) -> Result<Self> {
        Self::new(Family::Deterministic { a })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::Uniform { a, b })
    }

    /// Pareto law whose Laplace-side tail constant is `ell`, i.e.
    /// `1 − F̂(s) ~ ell · s^α`.
    pub fn pareto_with_laplace_ell(alpha: f64, ell: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", "Laplace tail constant needs alpha in (0, 1)"));
        }
        if !(ell > 0.0) {
            return Err(Error::invalid("ell", "tail constant must be positive"));
        }
        Self::pareto(alpha, (ell / gamma(1.0 - alpha)).powf(1.0 / alpha))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn tail_index(&self) -> Option<f64> {
        match self.family {
            Family::Pareto { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.family, Family::Deterministic { .. })
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Pareto { alpha, x_m } => {
                if alpha <= 1.0 {
                    f64::INFINITY
                } else {
                    alpha * x_m / (alpha - 1.0)
                }
            }
            Family::Exponential { rate } => 1.0 / rate,
            Family::Deterministic { a } => a,
            Family::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    /// Left end of the support.
    pub fn support_start(&self) -> f64 {
        match self.family {
            Family::Pareto { x_m, .. } => x_m,
            Family::Exponential { .. } => 0.0,
            Family::Deterministic { a } => a,
            Family::Uniform { a, .. } => a,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.sf(x)
    }

    /// Survival function `1 − F(x)`, evaluated without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        match self.family {
            Family::Pareto { alpha, x_m } => {
                if x < x_m {
                    1.0
                } else {
                    (x_m / x).powf(alpha)
                }
            }
            Family::Exponential { rate } => {
                if x < 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Family::Deterministic { a } => {
                if x < a {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Uniform { a, b } => {
                if x < a {
                    1.0
                } else if x >= b {
                    0.0
                } else {
                    (b - x) / (b - a)
                }
            }
        }
    }

    /// Lebesgue density; `None` for the deterministic family.
    pub fn density(&self, x: f64) -> Option<f64> {
        Some(match self.family {
            Family::Pareto { alpha, x_m } => {
                if x < x_m {
                    0.0
                } else {
                    alpha * x_m.powf(alpha) * x.powf(-1.0 - alpha)
                }
            }
            Family::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Family::Uniform { a, b } => {
                if x < a || x > b {
                    0.0
                } else {
                    1.0 / (b - a)
                }
            }
            Family::Deterministic { .. } => return None,
        })
    }

    /// Infimum and supremum of the density over `[lo, hi]`.
    pub fn density_bounds(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        debug_assert!(lo <= hi);
        Some(match self.family {
            Family::Pareto { x_m, .. } => {
                if hi < x_m {
                    (0.0, 0.0)
                } else {
                    let sup = self.density(lo.max(x_m))?;
                    let inf = if lo < x_m { 0.0 } else { self.density(hi)? };
                    (inf, sup)
                }
            }
            Family::Exponential { .. } => {
                if hi < 0.0 {
                    (0.0, 0.0)
                } else {
                    let sup = self.density(lo.max(0.0))?;
                    let inf = if lo < 0.0 { 0.0 } else { self.density(hi)? };
                    (inf, sup)
                }
            }
            Family::Uniform { a, b } => {
                let v = 1.0 / (b - a);
                if hi < a || lo > b {
                    (0.0, 0.0)
                } else if lo >= a && hi <= b {
                    (v, v)
                } else {
                    (0.0, v)
                }
            }
            Family::Deterministic { .. } => return None,
        })
    }

    /// Quantile function on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.family {
            Family::Pareto { alpha, x_m } => x_m * (1.0 - u).powf(-1.0 / alpha),
            Family::Exponential { rate } => -(1.0 - u).ln() / rate,
            Family::Deterministic { a } => a,
            Family::Uniform { a, b } => a + (b - a) * u,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self.family {
            Family::Pareto { alpha, x_m } => x_m * rng.open01().powf(-1.0 / alpha),
            Family::Exponential { rate } => -rng.open01().ln() / rate,
            Family::Deterministic { a } => a,
            Family::Uniform { a, b } => a + (b - a) * rng.unit(),
        }
    }

    /// `μ(c) = E[X 1{X ≤ c}]`.
    pub fn truncated_mean(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Pareto { alpha, x_m } => {
                if c < x_m {
                    0.0
                } else if alpha == 1.0 {
                    x_m * (c / x_m).ln()
                } else {
                    alpha * x_m.powf(alpha) * (c.powf(1.0 - alpha) - x_m.powf(1.0 - alpha))
                        / (1.0 - alpha)
                }
            }
            Family::Exponential { rate } => {
                let rc = rate * c;
                // (1 − e^{−rc}(1 + rc)) / r, via expm1 for small rc.
                (-(-rc).exp_m1() - rc * (-rc).exp()) / rate
            }
            Family::Deterministic { a } => {
                if c >= a {
                    a
                } else {
                    0.0
                }
            }
            Family::Uniform { a, b } => {
                let top = c.min(b);
                if top <= a {
                    0.0
                } else {
                    (top * top - a * a) / (2.0 * (b - a))
                }
            }
        }
    }

    /// Generalized inverse `inf{c ≥ 0 : μ(c) ≥ y}` by bisection.
    pub fn mu_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::invalid("y", format!("level {y} must be nonnegative")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let sup = self.mean();
        // A finite mean with unbounded support is approached but never attained.
        let unbounded = matches!(self.family, Family::Exponential { .. });
        if y > sup || (unbounded && y >= sup) {
            return Err(Error::UnreachableLevel { level: y, sup });
        }
        let mut lo = 0.0;
        let mut hi = self.support_start().max(1.0);
        while self.truncated_mean(hi) < y {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::UnreachableLevel { level: y, sup });
            }
        }
        while hi - lo > MU_INVERSE_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.truncated_mean(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `c(m) = μ←(1/(1 − m))`: the truncation level that makes the immigrant
    /// rate `1 − m` when interarrivals follow `F_{c(m)}`.
    pub fn branching_to_truncation(&self, m: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&m) {
            return Err(Error::invalid("m", format!("branching coefficient {m} not in [0, 1)")));
        }
        self.mu_inverse(1.0 / (1.0 - m))
    }

    /// Only Pareto tails have `f(x) x^{1+α}` converging to a positive limit.
    pub fn bm_tail_constants(&self) -> Option<TailConstants> {
        match self.family {
            Family::Pareto { alpha, x_m } => {
                let c = alpha * x_m.powf(alpha);
                Some(TailConstants {
                    alpha,
                    r: c,
                    big_r: c,
                })
            }
            _ => None,
        }
    }

    /// `ℓ` with `1 − F̂(s) ~ ℓ s^α` (Pareto, `α < 1`).
    pub fn tail_ell_laplace(&self) -> Option<f64> {
        match self.family {
            Family::Pareto { alpha, x_m } if alpha < 1.0 => Some(x_m.powf(alpha) * gamma(1.0 - alpha)),
            _ => None,
        }
    }

    /// `ℓ` with `1 − F(x) = ℓ / (x^α Γ(1+α))` for `x ≥ x_m` (Pareto).
    pub fn tail_ell_gamma_plus(&self) -> Option<f64> {
        match self.family {
            Family::Pareto { alpha, x_m } => Some(x_m.powf(alpha) * gamma(1.0 + alpha)),
            _ => None,
        }
    }

    pub fn truncated(&self, c: f64) -> TruncatedSpec {
        TruncatedSpec {
            base: self.clone(),
            c: c.max(0.0),
        }
    }

    pub fn symmetrized(&self) -> SymmetrizedSpec {
        SymmetrizedSpec { base: self.clone() }
    }

    /// Distribution function of `−X`.
    pub fn negated_cdf(&self, x: f64) -> f64 {
        // P[−X ≤ x] = P[X ≥ −x] = sf((−x)−); all families except the
        // deterministic one are continuous.
        match self.family {
            Family::Deterministic { a } => {
                if -x <= a {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.sf(-x),
        }
    }
}

fn default_label(family: &Family) -> String {
    match *family {
        Family::Pareto { alpha, x_m } => format!("pareto(alpha={alpha},x_m={x_m})"),
        Family::Exponential { rate } => format!("exponential(rate={rate})"),
        Family::Deterministic { a } => format!("deterministic(a={a})"),
        Family::Uniform { a, b } => format!("uniform(a={a},b={b})"),
    }
}

impl Law for DisplacementSpec {
    fn cdf(&self, x: f64) -> f64 {
        DisplacementSpec::cdf(self, x)
    }

    fn sample(&self, rng: &mut RngStream) -> f64 {
        DisplacementSpec::sample(self, rng)
    }
}

impl TruncatedSpec {
    /// Mass of the atom at 0, `P[X > c]`.
    pub fn atom_at_zero(&self) -> f64 {
        self.base.sf(self.c)
    }

    pub fn mean(&self) -> f64 {
        self.base.truncated_mean(self.c)
    }
}

impl Law for TruncatedSpec {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            (self.base.sf(self.c) + self.base.cdf(x.min(self.c))).min(1.0)
        }
    }

    fn sample(&self, rng: &mut RngStream) -> f64 {
        let x = self.base.sample(rng);
        if x <= self.c {
            x
        } else {
            0.0
        }
    }
}

impl Law for SymmetrizedSpec {
    /// `F̃(x) = ∫ F(x + y) dF(y)`.
    fn cdf(&self, x: f64) -> f64 {
        match self.base.family {
            Family::Deterministic { .. } => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Exponential { rate } => {
                // Laplace(0, 1/rate).
                if x < 0.0 {
                    0.5 * (rate * x).exp()
                } else {
                    1.0 - 0.5 * (-rate * x).exp()
                }
            }
            Family::Uniform { a, b } => {
                // Triangular on [−w, w] with w = b − a.
                let w = b - a;
                if x <= -w {
                    0.0
                } else if x >= w {
                    1.0
                } else if x < 0.0 {
                    0.5 * (x + w) * (x + w) / (w * w)
                } else {
                    1.0 - 0.5 * (w - x) * (w - x) / (w * w)
                }
            }
            Family::Pareto { .. } => {
                // F̃(x) = ∫₀¹ F(x + Q(u)) du over the quantile of the
                // subtracted copy; the integrand is bounded and monotone.
                let base = &self.base;
                let kink = base.cdf(base.support_start() - x).clamp(0.0, 1.0);
                let f = |u: f64| base.cdf(x + base.quantile(u));
                let mut total = 0.0;
                if kink > 0.0 {
                    total += adaptive_simpson(&f, 0.0, kink, 1e-12);
                }
                total + adaptive_simpson(&f, kink, 1.0 - 1e-15, 1e-12)
            }
        }
    }

    fn sample(&self, rng: &mut RngStream) -> f64 {
        let a = self.base.sample(rng);
        let b = self.base.sample(rng);
        a - b
    }
}

impl fmt::Display for DisplacementSpec {
    /// Flat key-value form, e.g. `family=pareto alpha=0.5 x_m=1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Pareto { alpha, x_m } => write!(f, "family=pareto alpha={alpha} x_m={x_m}"),
            Family::Exponential { rate } => write!(f, "family=exponential rate={rate}"),
            Family::Deterministic { a } => write!(f, "family=deterministic a={a}"),
            Family::Uniform { a, b } => write!(f, "family=uniform a={a} b={b}"),
        }?;
        if self.label != default_label(&self.family) {
            write!(f, " label={}", self.label)?;
        }
        Ok(())
    }
}

impl FromStr for DisplacementSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut label = None;
        let mut params: Vec<(&str, f64)> = Vec::new();
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::config(token, "expected key=value"))?;
            match key {
                "family" => family = Some(value),
                "label" => label = Some(value.to_string()),
                _ => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| Error::config(key, format!("`{value}` is not a number")))?;
                    params.push((key, v));
                }
            }
        }
        let get = |name: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::config(name, "missing displacement parameter"))
        };
        let family = match family.ok_or_else(|| Error::config("family", "missing"))? {
            "pareto" if params.iter().any(|(k, _)| *k == "ell") => {
                // Scale given through the Laplace-side tail constant.
                let spec = DisplacementSpec::pareto_with_laplace_ell(get("alpha")?, get("ell")?)
                    .map_err(|e| Error::config("displacement", e.to_string()))?;
                spec.family
            }
            "pareto" => Family::Pareto {
                alpha: get("alpha")?,
                x_m: get("x_m")?,
            },
            "exponential" => Family::Exponential { rate: get("rate")? },
            "deterministic" => Family::Deterministic { a: get("a")? },
            "uniform" => Family::Uniform {
                a: get("a")?,
                b: get("b")?,
            },
            other => return Err(Error::config("family", format!("unknown family `{other}`"))),
        };
        let spec = DisplacementSpec::new(family).map_err(|e| Error::config("displacement", e.to_string()))?;
        Ok(match label {
            Some(l) => spec.with_label(l),
            None => spec,
        })
    }
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}
