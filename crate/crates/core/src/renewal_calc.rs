//! Deterministic calculus of measures on a uniform grid: convolution,
//! renewal functions, Laplace–Stieltjes transforms and the Palm mean
//! measure `U₀ = Ũ * (U + U₋ − δ₀)`.
//!
//! A [`GridMeasure`] with step `h` stores the mass of the cell
//! `((k − ½)h, (k + ½)h]` at the lattice point `kh`, and keeps the mass of
//! the single point `{0}` apart from the cell around 0. Point masses on the
//! lattice are therefore exact and `δ₀` is exactly representable.

use std::cmp::Ordering;
use std::io::{self, Write};

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::distributions::{DisplacementSpec, Law};
use crate::error::{Error, Result};
use crate::fft;

/// Below this many cell products, convolutions are summed directly.
const DIRECT_LIMIT: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    pub h: f64,
    /// Lattice index of `masses[0]`.
    pub k_lo: i64,
    pub masses: Vec<f64>,
    pub atom0: f64,
    /// Mass known to be missing because it fell outside a range.
    pub truncated: f64,
}

impl GridMeasure {
    pub fn zero(h: f64) -> Self {
        Self {
            h,
            k_lo: 0,
            masses: Vec::new(),
            atom0: 0.0,
            truncated: 0.0,
        }
    }

    pub fn delta0(h: f64) -> Self {
        Self {
            atom0: 1.0,
            ..Self::zero(h)
        }
    }

    /// `mass · δ_a` with `a` rounded to the nearest lattice point.
    pub fn point_mass(h: f64, a: f64, mass: f64) -> Self {
        if a == 0.0 {
            return Self {
                atom0: mass,
                ..Self::zero(h)
            };
        }
        Self {
            k_lo: (a / h).round() as i64,
            masses: vec![mass],
            ..Self::zero(h)
        }
    }

    /// Discretizes a distribution function supported on `[0, ∞)` onto cells
    /// `0..=x_max/h`. `F(0)` becomes the atom at 0; the mass beyond the last
    /// cell is recorded as truncated.
    pub fn from_cdf(h: f64, x_max: f64, cdf: impl Fn(f64) -> f64) -> Self {
        let k_max = (x_max / h).round() as usize;
        let atom0 = cdf(0.0);
        let mut masses = Vec::with_capacity(k_max + 1);
        let mut prev = atom0;
        for k in 0..=k_max {
            let next = cdf((k as f64 + 0.5) * h);
            masses.push((next - prev).max(0.0));
            prev = next;
        }
        Self {
            h,
            k_lo: 0,
            masses,
            atom0,
            truncated: (1.0 - prev).max(0.0),
        }
    }

    pub fn from_spec(spec: &DisplacementSpec, h: f64, x_max: f64) -> Self {
        // Survival-based differences keep relative accuracy deep in the tail.
        let k_max = (x_max / h).round() as usize;
        let mut masses = Vec::with_capacity(k_max + 1);
        let mut prev = 1.0;
        for k in 0..=k_max {
            let next = spec.sf((k as f64 + 0.5) * h);
            masses.push((prev - next).max(0.0));
            prev = next;
        }
        Self {
            h,
            k_lo: 0,
            masses,
            atom0: spec.cdf(0.0),
            truncated: prev,
        }
    }

    pub fn from_law(law: &impl Law, h: f64, x_max: f64) -> Self {
        Self::from_cdf(h, x_max, |x| law.cdf(x))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty() && self.atom0 == 0.0
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.masses.len() as i64 - 1
    }

    /// Cell mass at lattice index `k` (0 outside the stored range).
    pub fn cell(&self, k: i64) -> f64 {
        let i = k - self.k_lo;
        if i < 0 || i >= self.masses.len() as i64 {
            0.0
        } else {
            self.masses[i as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.atom0 + self.masses.iter().sum::<f64>()
    }

    fn index_floor(&self, x: f64) -> i64 {
        let r = x / self.h;
        let n = r.round();
        if (r - n).abs() < 1e-9 {
            n as i64
        } else {
            r.floor() as i64
        }
    }

    fn index_ceil(&self, x: f64) -> i64 {
        let r = x / self.h;
        let n = r.round();
        if (r - n).abs() < 1e-9 {
            n as i64
        } else {
            r.ceil() as i64
        }
    }

    /// Mass of lattice points in the closed interval `[a, b]`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        let lo = self.index_ceil(a).max(self.k_lo);
        let hi = self.index_floor(b).min(self.k_hi());
        let mut s: f64 = if lo <= hi {
            self.masses[(lo - self.k_lo) as usize..=(hi - self.k_lo) as usize]
                .iter()
                .sum()
        } else {
            0.0
        };
        if a <= 0.0 && b >= 0.0 {
            s += self.atom0;
        }
        s
    }

    /// Mass of lattice points in the half-open interval `[a, b)`.
    pub fn mass_in_half_open(&self, a: f64, b: f64) -> f64 {
        let lo = self.index_ceil(a).max(self.k_lo);
        let hi = (self.index_ceil(b) - 1).min(self.k_hi());
        let mut s: f64 = if lo <= hi {
            self.masses[(lo - self.k_lo) as usize..=(hi - self.k_lo) as usize]
                .iter()
                .sum()
        } else {
            0.0
        };
        if a <= 0.0 && b > 0.0 {
            s += self.atom0;
        }
        s
    }

    /// `G([0, x])` for a measure on `[0, ∞)`.
    pub fn cumulative(&self, x: f64) -> f64 {
        self.mass_in(0.0, x)
    }

    /// Image under `x ↦ −x`.
    pub fn reflect(&self) -> Self {
        let mut masses = self.masses.clone();
        masses.reverse();
        Self {
            h: self.h,
            k_lo: -self.k_hi(),
            masses,
            atom0: self.atom0,
            truncated: self.truncated,
        }
    }

    /// Keeps lattice indices in `[k_lo, k_hi]`; the rest is added to the
    /// truncated mass.
    pub fn restrict(&self, k_lo: i64, k_hi: i64) -> Self {
        let lo = k_lo.max(self.k_lo);
        let hi = k_hi.min(self.k_hi());
        let kept: Vec<f64> = if lo <= hi {
            self.masses[(lo - self.k_lo) as usize..=(hi - self.k_lo) as usize].to_vec()
        } else {
            Vec::new()
        };
        let dropped = self.masses.iter().sum::<f64>() - kept.iter().sum::<f64>();
        let atom0 = if k_lo <= 0 && k_hi >= 0 { self.atom0 } else { 0.0 };
        Self {
            h: self.h,
            k_lo: if lo <= hi { lo } else { 0 },
            masses: kept,
            atom0,
            truncated: self.truncated + dropped.max(0.0) + (self.atom0 - atom0),
        }
    }

    /// Cellwise `self + other` (steps must agree).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    /// Cellwise `self − other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        check_step(self, other)?;
        if self.masses.is_empty() && other.masses.is_empty() {
            return Ok(Self {
                atom0: self.atom0 + sign * other.atom0,
                truncated: self.truncated + other.truncated,
                ..Self::zero(self.h)
            });
        }
        let (lo, hi) = match (self.masses.is_empty(), other.masses.is_empty()) {
            (true, _) => (other.k_lo, other.k_hi()),
            (_, true) => (self.k_lo, self.k_hi()),
            _ => (self.k_lo.min(other.k_lo), self.k_hi().max(other.k_hi())),
        };
        let masses = (lo..=hi).map(|k| self.cell(k) + sign * other.cell(k)).collect();
        Ok(Self {
            h: self.h,
            k_lo: lo,
            masses,
            atom0: self.atom0 + sign * other.atom0,
            truncated: self.truncated + other.truncated,
        })
    }

    /// `Σ_k e^{−s·kh} m_k + atom0`.
    pub fn laplace(&self, s: f64) -> f64 {
        let mut acc = self.atom0;
        for (i, &m) in self.masses.iter().enumerate() {
            acc += m * (-s * (self.k_lo + i as i64) as f64 * self.h).exp();
        }
        acc
    }

    /// CSV `x,mass` preceded by `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# h={}", self.h)?;
        writeln!(
            out,
            "# range=[{}, {}]",
            self.k_lo as f64 * self.h,
            self.k_hi() as f64 * self.h
        )?;
        writeln!(out, "# atom0={}", self.atom0)?;
        writeln!(out, "# truncated_mass={}", self.truncated)?;
        writeln!(out, "x,mass")?;
        for (i, m) in self.masses.iter().enumerate() {
            writeln!(out, "{},{:e}", (self.k_lo + i as i64) as f64 * self.h, m)?;
        }
        Ok(())
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.masses
            .len()
            .cmp(&other.masses.len())
            .then(self.k_lo.cmp(&other.k_lo))
            .then(self.atom0.to_bits().cmp(&other.atom0.to_bits()))
            .then_with(|| {
                self.masses
                    .iter()
                    .map(|x| x.to_bits())
                    .cmp(other.masses.iter().map(|x| x.to_bits()))
            })
    }
}

fn check_step(a: &GridMeasure, b: &GridMeasure) -> Result<()> {
    if (a.h - b.h).abs() > 1e-12 * a.h.abs().max(b.h.abs()) {
        return Err(Error::StepMismatch {
            left: a.h,
            right: b.h,
        });
    }
    Ok(())
}

fn cell_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a.len() + b.len() - 1;
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![0.0; n];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out[i..].iter_mut().zip(b) {
                *o += x * y;
            }
        }
        out
    } else {
        fft::linear(a, b, n)
    }
}

/// `a * b` over the full range of the product.
pub fn convolve(a: &GridMeasure, b: &GridMeasure) -> Result<GridMeasure> {
    convolve_within(a, b, i64::MIN / 4, i64::MAX / 4)
}

/// `a * b` restricted to lattice indices `[k_lo, k_hi]`; mass falling
/// outside is recorded as truncated.
pub fn convolve_within(a: &GridMeasure, b: &GridMeasure, k_lo: i64, k_hi: i64) -> Result<GridMeasure> {
    check_step(a, b)?;
    // A fixed argument order makes the result bitwise symmetric in (a, b).
    let (a, b) = if a.canonical_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let mut cells = cell_product(&a.masses, &b.masses);
    let mut lo = a.k_lo + b.k_lo;
    // Atom × cells terms land on the other factor's cells.
    let atom_terms = |cells: &mut Vec<f64>, lo: &mut i64, g: &GridMeasure, w: f64| {
        if w == 0.0 || g.masses.is_empty() {
            return;
        }
        if cells.is_empty() {
            *cells = g.masses.iter().map(|m| w * m).collect();
            *lo = g.k_lo;
            return;
        }
        let new_lo = (*lo).min(g.k_lo);
        let new_hi = (*lo + cells.len() as i64 - 1).max(g.k_hi());
        if new_lo < *lo || new_hi > *lo + cells.len() as i64 - 1 {
            let mut grown = vec![0.0; (new_hi - new_lo + 1) as usize];
            let off = (*lo - new_lo) as usize;
            grown[off..off + cells.len()].copy_from_slice(cells);
            *cells = grown;
            *lo = new_lo;
        }
        let off = (g.k_lo - *lo) as usize;
        for (c, m) in cells[off..].iter_mut().zip(&g.masses) {
            *c += w * m;
        }
    };
    atom_terms(&mut cells, &mut lo, b, a.atom0);
    atom_terms(&mut cells, &mut lo, a, b.atom0);
    let full = GridMeasure {
        h: a.h,
        k_lo: lo,
        masses: cells,
        atom0: a.atom0 * b.atom0,
        truncated: a.truncated * (b.total() + b.truncated) + b.truncated * a.total(),
    };
    Ok(full.restrict(k_lo, k_hi))
}

/// Inverse of the power series `g` (with `g[0] ≠ 0`) to `n` terms.
fn series_inverse(g: &[f64], n: usize) -> Vec<f64> {
    let small = 2048;
    let direct = |len: usize| -> Vec<f64> {
        let mut b = vec![0.0; len];
        b[0] = 1.0 / g[0];
        for k in 1..len {
            let mut acc = 0.0;
            for i in 1..=k.min(g.len() - 1) {
                acc += g[i] * b[k - i];
            }
            b[k] = -acc * b[0];
        }
        b
    };
    if n <= small {
        return direct(n);
    }
    let mut b = direct(small);
    let mut len = small;
    while len < n {
        let next = (2 * len).min(n);
        // b ← b + b(1 − g b) mod z^next
        let gl = &g[..next.min(g.len())];
        let gb = fft::linear(gl, &b, next);
        let mut e: Vec<f64> = gb.iter().map(|x| -x).collect();
        e[0] += 1.0;
        let corr = fft::linear(&b, &e, next);
        b.resize(next, 0.0);
        for (x, c) in b.iter_mut().zip(&corr) {
            *x += c;
        }
        len = next;
    }
    b
}

/// Renewal measure `U = Σ_g F^{g*}` on `[0, x_max]`, the solution of
/// `U = δ₀ + F * U`. Direct forward substitution for short grids, Newton
/// iteration on the power series `1/(1 − F)` for long ones.
pub fn renewal_function(f: &GridMeasure, x_max: f64) -> Result<GridMeasure> {
    if f.k_lo < 0 {
        return Err(Error::invalid("f", "renewal grid must live on [0, ∞)"));
    }
    let k_max = (x_max / f.h).round() as usize;
    let n = k_max + 1;
    // Combined coefficients: position 0 carries atom and cell together.
    let mut t = vec![0.0; n];
    for (i, &m) in f.masses.iter().enumerate() {
        let k = f.k_lo as usize + i;
        if k < n {
            t[k] += m;
        }
    }
    t[0] += f.atom0;
    if t[0] >= 1.0 {
        return Err(Error::invalid("f", "mass at 0 must be below 1"));
    }
    let mut g: Vec<f64> = t.iter().map(|x| -x).collect();
    g[0] += 1.0;
    let u = if n <= 20_000 {
        direct_renewal(&t)
    } else {
        series_inverse(&g, n)
    };
    let atom0 = 1.0 / (1.0 - f.atom0);
    let mut masses = u;
    masses[0] -= atom0;
    if masses[0].abs() < 1e-15 {
        masses[0] = masses[0].max(0.0);
    }
    Ok(GridMeasure {
        h: f.h,
        k_lo: 0,
        masses,
        atom0,
        truncated: 0.0,
    })
}

fn direct_renewal(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut u = vec![0.0; n];
    let inv = 1.0 / (1.0 - t[0]);
    u[0] = inv;
    for k in 1..n {
        let mut acc = 0.0;
        for i in 1..=k {
            acc += t[i] * u[k - i];
        }
        u[k] = acc * inv;
    }
    u
}

/// Regularly varying tail `1 − F̂(s) ~ ell · s^α` (Laplace side).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailSpec {
    pub alpha: f64,
    pub ell: f64,
}

impl TailSpec {
    /// From the convention `1 − F(x) ~ ell / (x^α Γ(1 + α))`.
    pub fn from_gamma_plus(alpha: f64, ell: f64) -> Self {
        Self {
            alpha,
            ell: ell * gamma(1.0 - alpha) / gamma(1.0 + alpha),
        }
    }

    /// Pareto law realizing this tail.
    pub fn pareto(&self) -> Result<DisplacementSpec> {
        DisplacementSpec::pareto_with_laplace_ell(self.alpha, self.ell)
    }

    /// Karamata asymptote `x^α / (ell Γ(1 + α))` of the renewal function.
    pub fn renewal_asymptote(&self, x: f64) -> f64 {
        x.powf(self.alpha) / (self.ell * gamma(1.0 + self.alpha))
    }
}

/// `Ū = U₁ * U₂` on `[0, x_max]`.
pub fn two_index_mean(f1: &GridMeasure, f2: &GridMeasure, x_max: f64) -> Result<GridMeasure> {
    check_step(f1, f2)?;
    let u1 = renewal_function(f1, x_max)?;
    let u2 = renewal_function(f2, x_max)?;
    let k_max = (x_max / f1.h).round() as i64;
    convolve_within(&u1, &u2, 0, k_max)
}

#[derive(Clone, Debug)]
pub struct PalmMeasure {
    /// Symmetric two-sided grid measure on `[−x_max, x_max]`.
    pub measure: GridMeasure,
    /// Number of walk steps summed into `Ũ` (a power of two).
    pub terms: usize,
    /// Last relative increment of `Ũ` on the probe window.
    pub last_increment: f64,
}

/// Settings of the `Ũ` summation.
#[derive(Clone, Copy, Debug)]
pub struct PalmSettings {
    /// Half-width of the window on which the Cauchy criterion is checked.
    pub probe: f64,
    pub tolerance: f64,
    pub max_doublings: usize,
}

impl Default for PalmSettings {
    fn default() -> Self {
        Self {
            probe: 10.0,
            tolerance: 1e-6,
            max_doublings: 24,
        }
    }
}

fn mirror(g: &GridMeasure) -> GridMeasure {
    let k = g.k_lo.unsigned_abs().max(g.k_hi().unsigned_abs()) as i64;
    let masses = (-k..=k).map(|i| 0.5 * (g.cell(i) + g.cell(-i))).collect();
    GridMeasure {
        h: g.h,
        k_lo: -k,
        masses,
        atom0: g.atom0,
        truncated: g.truncated,
    }
}

/// `Ũ = Σ_g F̃^{g*}` on `[−x_max, x_max]` by doubling:
/// `S_{2n} = S_n + F̃^{n*} * S_n`, `F̃^{2n*} = F̃^{n*} * F̃^{n*}`.
pub fn symmetrized_renewal(f: &GridMeasure, x_max: f64, settings: PalmSettings) -> Result<(GridMeasure, usize, f64)> {
    let k = (x_max / f.h).round() as i64;
    let one_sided = f.restrict(0, k);
    let tilde = mirror(&convolve_within(&one_sided.reflect(), &one_sided, -k, k)?);
    let mut s = GridMeasure::delta0(f.h);
    let mut g = tilde;
    let mut terms = 1usize;
    let mut last = f64::INFINITY;
    for _ in 0..settings.max_doublings {
        let inc = convolve_within(&g, &s, -k, k)?;
        let next = mirror(&s.add(&inc)?);
        let probe_new = next.mass_in(-settings.probe, settings.probe);
        let probe_inc = inc.mass_in(-settings.probe, settings.probe);
        last = probe_inc / probe_new;
        s = next;
        terms *= 2;
        if last < settings.tolerance {
            return Ok((s, terms, last));
        }
        g = mirror(&convolve_within(&g, &g, -k, k)?);
    }
    Err(Error::Divergent {
        terms,
        increment: last,
    })
}

/// Palm mean measure `U₀ = Ũ * (U + U₋ − δ₀)` on `[−x_max, x_max]` for a
/// displacement grid `f` on `[0, ∞)`.
pub fn palm_mean_measure(f: &GridMeasure, x_max: f64, settings: PalmSettings) -> Result<PalmMeasure> {
    if f.k_lo < 0 {
        return Err(Error::invalid("f", "displacement grid must live on [0, ∞)"));
    }
    let k = (x_max / f.h).round() as i64;
    let (u_tilde, terms, last) = symmetrized_renewal(f, x_max, settings)?;
    let u = renewal_function(f, x_max)?;
    let both = u.add(&u.reflect())?.sub(&GridMeasure::delta0(f.h))?;
    let u0 = mirror(&convolve_within(&u_tilde, &both, -k, k)?);
    Ok(PalmMeasure {
        measure: u0,
        terms,
        last_increment: last,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Finiteness {
    Bounded,
    Growing,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanEntry {
    pub alpha: f64,
    /// `(x_max, U₀([0, 1]))` pairs.
    pub values: Vec<(f64, f64)>,
    /// Ratio of the last increment to the one before it.
    pub increment_ratio: f64,
    pub class: Finiteness,
}

/// Settings of [`palm_local_finiteness_scan`].
#[derive(Clone, Debug)]
pub struct ScanSettings {
    pub h: f64,
    pub ranges: Vec<f64>,
    /// Increment ratios below this are read as a convergent (Cauchy) sequence.
    pub bounded_below: f64,
    /// Increment ratios above this are read as growth.
    pub growing_above: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            h: 0.05,
            ranges: vec![1e2, 1e3, 1e4],
            bounded_below: 0.7,
            growing_above: 1.4,
        }
    }
}

/// `U₀([0, 1]) = ∫_{[0, x_max]} U([x − 1, x]) U(dx)`, the two-sided renewal
/// convolution written over one renewal measure.
pub fn palm_unit_mass(u: &GridMeasure, x_max: f64) -> f64 {
    let k_max = ((x_max / u.h).round() as i64).min(u.k_hi());
    // Prefix sums turn U([x − 1, x]) into a difference.
    let mut prefix = Vec::with_capacity(u.masses.len() + 1);
    prefix.push(0.0);
    for &m in &u.masses {
        prefix.push(prefix.last().unwrap() + m);
    }
    let width = (1.0 / u.h).round() as i64;
    let window = |k: i64| -> f64 {
        let lo = (k - width).max(0);
        let mut s = prefix[(k + 1) as usize] - prefix[lo as usize];
        if k - width <= 0 {
            s += u.atom0;
        }
        s
    };
    let mut total = u.atom0 * window(0);
    for k in 0..=k_max {
        total += u.masses[k as usize] * window(k);
    }
    total
}

/// For each tail index, evaluates `U₀([0, 1])` on growing ranges of a Pareto
/// law with unit scale and classifies the sequence.
pub fn palm_local_finiteness_scan(alphas: &[f64], settings: &ScanSettings) -> Result<Vec<ScanEntry>> {
    let x_top = settings.ranges.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", "scan needs alpha in (0, 1)"));
        }
        let f = GridMeasure::from_spec(&DisplacementSpec::pareto(alpha, 1.0)?, settings.h, x_top);
        let u = renewal_function(&f, x_top)?;
        let values: Vec<(f64, f64)> = settings.ranges.iter().map(|&x| (x, palm_unit_mass(&u, x))).collect();
        let n = values.len();
        let (ratio, class) = if n < 3 {
            (f64::NAN, Finiteness::Inconclusive)
        } else {
            let d1 = values[n - 2].1 - values[n - 3].1;
            let d2 = values[n - 1].1 - values[n - 2].1;
            let r = d2 / d1;
            let class = if r < settings.bounded_below {
                Finiteness::Bounded
            } else if r > settings.growing_above {
                Finiteness::Growing
            } else {
                Finiteness::Inconclusive
            };
            (r, class)
        };
        out.push(ScanEntry {
            alpha,
            values,
            increment_ratio: ratio,
            class,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic(h: f64, k_lo: i64, m: &[f64], atom0: f64) -> GridMeasure {
        GridMeasure {
            h,
            k_lo,
            masses: m.to_vec(),
            atom0,
            truncated: 0.0,
        }
    }

    #[test]
    fn delta0_is_identity() {
        let a = dyadic(0.5, -2, &[0.25, 0.5, 0.125, 0.0, 1.0], 0.375);
        let d = GridMeasure::delta0(0.5);
        assert_eq!(convolve(&d, &a).unwrap(), a);
        assert_eq!(convolve(&a, &d).unwrap(), a);
    }

    #[test]
    fn point_masses_add() {
        let d1 = GridMeasure::point_mass(0.01, 1.0, 1.0);
        let d2 = convolve(&d1, &d1).unwrap();
        assert_eq!(d2, GridMeasure::point_mass(0.01, 2.0, 1.0));
        assert_eq!(d2.mass_in(1.999, 2.001), 1.0);
    }

    #[test]
    fn commutative_bitwise_including_fft_path() {
        let a: Vec<f64> = (0..900).map(|i| ((i * 37) % 101) as f64 / 997.0).collect();
        let b: Vec<f64> = (0..700).map(|i| ((i * 53) % 89) as f64 / 991.0).collect();
        let ga = dyadic(0.1, -5, &a, 0.3);
        let gb = dyadic(0.1, 3, &b, 0.1);
        assert_eq!(convolve(&ga, &gb).unwrap(), convolve(&gb, &ga).unwrap());
        let sa = dyadic(0.1, 0, &a[..20], 0.0);
        let sb = dyadic(0.1, 2, &b[..30], 0.7);
        assert_eq!(convolve(&sa, &sb).unwrap(), convolve(&sb, &sa).unwrap());
    }

    #[test]
    fn step_mismatch() {
        let a = GridMeasure::delta0(0.1);
        let b = GridMeasure::delta0(0.2);
        assert!(matches!(convolve(&a, &b), Err(Error::StepMismatch { .. })));
    }

    #[test]
    fn truncation_accounts_for_mass() {
        let a = dyadic(1.0, 0, &[0.25, 0.25, 0.5], 0.0);
        let c = convolve_within(&a, &a, 0, 2).unwrap();
        assert!((c.total() + c.truncated - a.total() * a.total()).abs() < 1e-15);
        assert!(c.truncated > 0.0);
    }

    #[test]
    fn deterministic_renewals_count_floor_plus_one() {
        let f = GridMeasure::from_spec(&DisplacementSpec::deterministic(1.0).unwrap(), 0.01, 20.0);
        let u = renewal_function(&f, 20.0).unwrap();
        for x in [0.0, 0.5, 1.0, 1.5, 2.0, 7.3, 19.99, 20.0] {
            assert_eq!(u.cumulative(x), x.floor() + 1.0, "x = {x}");
        }
    }

    #[test]
    fn exponential_renewal_is_one_plus_x() {
        let f = GridMeasure::from_spec(&DisplacementSpec::exponential(1.0).unwrap(), 0.01, 50.0);
        let u = renewal_function(&f, 50.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=5000 {
            let x = i as f64 * 0.01;
            worst = worst.max((u.cumulative(x) - (1.0 + x)).abs());
        }
        assert!(worst <= 0.05, "sup error {worst}");
    }

    #[test]
    fn newton_and_direct_agree() {
        let f = GridMeasure::from_spec(&DisplacementSpec::pareto(0.4, 1.0).unwrap(), 0.01, 300.0);
        let n = f.masses.len();
        let mut t = f.masses.clone();
        t[0] += f.atom0;
        let mut g: Vec<f64> = t.iter().map(|x| -x).collect();
        g[0] += 1.0;
        let a = direct_renewal(&t);
        let b = series_inverse(&g, n);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn renewal_equation_residual() {
        let f = GridMeasure::from_spec(&DisplacementSpec::pareto(0.4, 1.0).unwrap(), 0.05, 100.0);
        let u = renewal_function(&f, 100.0).unwrap();
        let fu = convolve_within(&f, &u, 0, u.k_hi()).unwrap();
        let rhs = GridMeasure::delta0(0.05).add(&fu).unwrap();
        for k in 0..=u.k_hi() {
            assert!((u.cell(k) - rhs.cell(k)).abs() < 1e-12);
        }
        assert!((u.atom0 - rhs.atom0).abs() < 1e-15);
    }

    #[test]
    fn laplace_of_point_masses() {
        let d0 = GridMeasure::delta0(0.1);
        for s in [0.1, 1.0, 7.0] {
            assert_eq!(d0.laplace(s), 1.0);
        }
        let d1 = GridMeasure::point_mass(0.1, 1.0, 1.0);
        assert!((d1.laplace(2f64.ln()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn renewal_laplace_identity() {
        let h = 0.01;
        let f = GridMeasure::from_spec(&DisplacementSpec::exponential(1.0).unwrap(), h, 200.0);
        let u = renewal_function(&f, 200.0).unwrap();
        for s in [0.5, 1.0] {
            assert!(s * h <= 1e-2);
            let v = u.laplace(s) * (1.0 - f.laplace(s));
            assert!((v - 1.0).abs() < 1e-3, "s={s}: {v}");
        }
    }

    #[test]
    fn tail_spec_conventions() {
        let t = TailSpec::from_gamma_plus(0.3, 1.0);
        let p = t.pareto().unwrap();
        assert!((p.tail_ell_gamma_plus().unwrap() - 1.0).abs() < 1e-12);
        assert!((p.tail_ell_laplace().unwrap() - t.ell).abs() < 1e-12);
    }

    #[test]
    fn mirror_is_exactly_symmetric() {
        let a = dyadic(0.1, -3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], 0.0);
        let m = mirror(&a);
        for k in 0..=m.k_hi() {
            assert_eq!(m.cell(k), m.cell(-k));
        }
    }
}
