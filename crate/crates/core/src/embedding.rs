//! Poisson embedding of the critical cluster iteration.
//!
//! A single unit-rate Poisson random measure `𝒩` on `ℝ × (0, ∞)` drives every
//! generation: `N^(0)` keeps the atoms below height `λ`, and `N^(g)` keeps the
//! atoms `(x, h)` with `h ≤ λ^(g)(x) = Σ_{y ∈ N^(g−1), y < x} f(x − y)`.
//!
//! Atoms are bucketed into cells of width close to 1 and generated lazily in
//! height bands, each `(cell, band)` pair on its own child stream, so the
//! field is a fixed function of the seed whatever heights get requested.
//! Acceptance is decided per atom from cheap bounds on `λ^(g)`: an exact sum
//! over nearby cells plus FFT-computed bounds on the far field, with the full
//! exact sum as fallback when the bounds straddle the atom's height.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{DisplacementSpec, Family};
use crate::error::{Error, Result};
use crate::fft;
use crate::rng::RngStream;

/// Wrapped kernel terms summed explicitly before the tail estimate.
const WRAP_TERMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Boundary {
    /// Points are kept on `[lo − buffer, hi]`; mass from further left is lost.
    Buffered { buffer: f64 },
    /// `[lo, hi)` is a circle: displacements wrap around.
    Periodic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingConfig {
    pub lambda: f64,
    pub f: DisplacementSpec,
    pub lo: f64,
    pub hi: f64,
    pub boundary: Boundary,
    /// `HeightRunaway` is raised when the intensity envelope exceeds this.
    pub hard_cap: f64,
    /// Cells on each side evaluated exactly; the rest are bounded.
    pub near_cells: usize,
    /// Height of one lazily generated band.
    pub band: f64,
}

impl EmbeddingConfig {
    pub fn new(lambda: f64, f: DisplacementSpec, lo: f64, hi: f64, boundary: Boundary) -> Self {
        Self {
            lambda,
            f,
            lo,
            hi,
            boundary,
            hard_cap: 1e6,
            near_cells: 64,
            band: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !matches!(self.f.family, Family::Pareto { .. } | Family::Exponential { .. }) {
            return Err(Error::invalid(
                "f",
                "embedding needs a displacement law with a decreasing density (pareto or exponential)",
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be finite and nonnegative"));
        }
        if !(self.hi > self.lo) {
            return Err(Error::invalid("hi", "window must have positive length"));
        }
        if let Boundary::Buffered { buffer } = self.boundary {
            if !(buffer >= 0.0) {
                return Err(Error::invalid("buffer", "must be nonnegative"));
            }
        }
        if !(self.band > 0.0) || !(self.hard_cap > 0.0) {
            return Err(Error::invalid("band", "band height and hard cap must be positive"));
        }
        Ok(())
    }

    fn stored_lo(&self) -> f64 {
        match self.boundary {
            Boundary::Buffered { buffer } => self.lo - buffer,
            Boundary::Periodic => self.lo,
        }
    }
}

/// Displacement density as seen by the embedding: zero at nonpositive
/// lags, and wrapped around the circle in periodic mode.
#[derive(Clone, Debug)]
struct Kernel {
    f: DisplacementSpec,
    period: Option<f64>,
}

impl Kernel {
    fn density(&self, t: f64) -> f64 {
        self.f.density(t).expect("validated density")
    }

    fn tail(&self, s: f64, period: f64) -> f64 {
        // Σ_{k ≥ K} f(t + kL) ≈ ∫ + half the first term, with s = t + KL.
        self.f.sf(s) / period + 0.5 * self.density(s)
    }

    fn value(&self, t: f64) -> f64 {
        match self.period {
            None => {
                if t > 0.0 {
                    self.density(t)
                } else {
                    0.0
                }
            }
            Some(l) => {
                let t = t.rem_euclid(l);
                let mut v = if t > 0.0 { self.density(t) } else { 0.0 };
                for k in 1..WRAP_TERMS {
                    v += self.density(t + k as f64 * l);
                }
                v + self.tail(t + WRAP_TERMS as f64 * l, l)
            }
        }
    }

    /// Bounds of `value` over `[a, b]` with `a ≥ 0` (periodic: `b ≤ L`).
    fn piece_bounds(&self, a: f64, b: f64) -> (f64, f64) {
        let (lo0, hi0) = self.f.density_bounds(a, b).expect("validated density");
        let mut lo = if a > 0.0 { lo0 } else { 0.0 };
        let mut hi = hi0;
        if let Some(l) = self.period {
            for k in 1..WRAP_TERMS {
                let s = k as f64 * l;
                let (x, y) = self.f.density_bounds(a + s, b + s).expect("validated density");
                lo += x;
                hi += y;
            }
            let s = a + WRAP_TERMS as f64 * l;
            hi += self.density(s) + self.f.sf(s) / l;
        }
        (lo, hi)
    }

    /// Bounds of `value` over lags in `[a, b]`.
    fn bounds(&self, a: f64, b: f64) -> (f64, f64) {
        match self.period {
            None => {
                if b <= 0.0 {
                    (0.0, 0.0)
                } else {
                    self.piece_bounds(a.max(0.0), b)
                }
            }
            Some(l) => {
                if a < 0.0 {
                    let (x1, y1) = self.piece_bounds(l + a, l);
                    let (x2, y2) = self.piece_bounds(0.0, b.min(l));
                    (x1.min(x2), y1.max(y2))
                } else {
                    self.piece_bounds(a, b.min(l))
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Cell {
    /// `(h, x)` sorted by height.
    atoms: Vec<(f64, f64)>,
    bands: u64,
}

/// Lazily generated unit-rate Poisson random measure on
/// `[start, end) × (0, ∞)`.
#[derive(Clone, Debug)]
pub struct DrivingField {
    start: f64,
    end: f64,
    width: f64,
    band: f64,
    base: RngStream,
    cells: Vec<Cell>,
}

impl DrivingField {
    /// Cells have width `target_width` adjusted so they tile the range.
    pub fn new(start: f64, end: f64, target_width: f64, band: f64, rng: &RngStream) -> Self {
        let n = ((end - start) / target_width).ceil().max(1.0) as usize;
        Self {
            start,
            end,
            width: (end - start) / n as f64,
            band,
            base: rng.clone(),
            cells: vec![Cell::default(); n],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_width(&self) -> f64 {
        self.width
    }

    pub fn cell_of(&self, x: f64) -> usize {
        (((x - self.start) / self.width) as usize).min(self.cells.len() - 1)
    }

    pub fn cell_height(&self, j: usize) -> f64 {
        self.cells[j].bands as f64 * self.band
    }

    /// Largest simulated height over all cells.
    pub fn height_cap(&self) -> f64 {
        self.cells.iter().map(|c| c.bands).max().unwrap_or(0) as f64 * self.band
    }

    /// Simulates bands of cell `j` until its height is at least `h`.
    pub fn ensure_height(&mut self, j: usize, h: f64) {
        let x0 = self.start + j as f64 * self.width;
        let w = self.width.min(self.end - x0);
        while (self.cells[j].bands as f64) * self.band < h {
            let b = self.cells[j].bands;
            let mut s = self.base.child(((j as u64) << 24) | b);
            let n = s.poisson(w * self.band);
            let h0 = b as f64 * self.band;
            let mut fresh: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let x = x0 + w * s.unit();
                    let h = h0 + self.band * s.open01();
                    (h, x)
                })
                .collect();
            fresh.sort_by(|p, q| p.0.total_cmp(&q.0));
            let cell = &mut self.cells[j];
            cell.atoms.extend(fresh);
            cell.bands += 1;
        }
    }

    pub fn ensure_height_all(&mut self, h: f64) {
        for j in 0..self.cells.len() {
            self.ensure_height(j, h);
        }
    }

    /// Atoms of cell `j` with height at most `h` (cell must be simulated that
    /// high), with their in-cell indices.
    pub fn atoms_below(&self, j: usize, h: f64) -> &[(f64, f64)] {
        let atoms = &self.cells[j].atoms;
        &atoms[..atoms.partition_point(|a| a.0 <= h)]
    }

    /// All simulated atoms as `(x, h)`.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cells.iter().flat_map(|c| c.atoms.iter().map(|&(h, x)| (x, h)))
    }
}

fn atom_id(cell: usize, index: usize) -> u64 {
    ((cell as u64) << 32) | index as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmbeddedPoint {
    pub id: u64,
    pub x: f64,
}

#[derive(Clone, Debug)]
pub struct EmbeddingState {
    pub g: usize,
    pub seed: u64,
    cfg: EmbeddingConfig,
    kernel: Kernel,
    field: DrivingField,
    /// `N^(g)`, sorted by position.
    current: Vec<EmbeddedPoint>,
    /// Upper envelope of `λ^(g)` over the range (λ itself for g = 0).
    height_max: f64,
    /// Atoms whose acceptance needed the full exact sum in the last step.
    pub exact_fallbacks: usize,
}

pub fn init_embedding(cfg: EmbeddingConfig, rng: &RngStream) -> Result<EmbeddingState> {
    cfg.validate()?;
    let start = cfg.stored_lo();
    let mut field = DrivingField::new(start, cfg.hi, 1.0, cfg.band, rng);
    if cfg.lambda > cfg.hard_cap {
        return Err(Error::HeightRunaway {
            height: cfg.lambda,
            cap: cfg.hard_cap,
        });
    }
    let mut current = Vec::new();
    if cfg.lambda > 0.0 {
        field.ensure_height_all(cfg.lambda);
        for j in 0..field.cell_count() {
            for (i, &(_, x)) in field.atoms_below(j, cfg.lambda).iter().enumerate() {
                current.push(EmbeddedPoint { id: atom_id(j, i), x });
            }
        }
    }
    current.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
    let kernel = Kernel {
        f: cfg.f.clone(),
        period: match cfg.boundary {
            Boundary::Periodic => Some(cfg.hi - cfg.lo),
            Boundary::Buffered { .. } => None,
        },
    };
    Ok(EmbeddingState {
        g: 0,
        seed: rng.stream_id(),
        height_max: cfg.lambda,
        cfg,
        kernel,
        field,
        current,
        exact_fallbacks: 0,
    })
}

impl EmbeddingState {
    pub fn config(&self) -> &EmbeddingConfig {
        &self.cfg
    }

    pub fn field(&self) -> &DrivingField {
        &self.field
    }

    pub fn points(&self) -> &[EmbeddedPoint] {
        &self.current
    }

    pub fn height_max(&self) -> f64 {
        self.height_max
    }

    /// Replaces `N^(g)` by arbitrary positions (ids are synthetic). Useful for
    /// probing single steps.
    pub fn set_points(&mut self, xs: &[f64]) {
        let mut pts: Vec<EmbeddedPoint> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| EmbeddedPoint {
                id: u64::MAX - i as u64,
                x,
            })
            .collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
        self.current = pts;
    }

    /// `λ^(g+1)(x)`: the intensity induced by the current points, summed
    /// exactly.
    pub fn lambda_at(&self, x: f64) -> f64 {
        self.current.iter().map(|p| self.kernel.value(x - p.x)).sum()
    }

    /// Count of current points in `[a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let s = self.current.partition_point(|p| p.x < a);
        let e = self.current.partition_point(|p| p.x <= b);
        e - s
    }

    /// Ids of current points in `[a, b]`, sorted.
    pub fn ids_in(&self, a: f64, b: f64) -> Vec<u64> {
        let s = self.current.partition_point(|p| p.x < a);
        let e = self.current.partition_point(|p| p.x <= b);
        let mut ids: Vec<u64> = self.current[s..e].iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids
    }

    /// `F(∞) − F(buffer)`: mass a buffered window cannot see.
    pub fn escaped_mass_bound(&self) -> f64 {
        match self.cfg.boundary {
            Boundary::Buffered { buffer } => self.cfg.f.sf(buffer),
            Boundary::Periodic => 0.0,
        }
    }

    /// One generation of the embedding recursion.
    pub fn step(&mut self) -> Result<()> {
        let m = self.field.cell_count();
        let w = self.field.cell_width();
        let periodic = self.kernel.period.is_some();

        // Points per cell as a CSR layout over the sorted current points.
        let mut offsets = vec![0usize; m + 1];
        for p in &self.current {
            offsets[self.field.cell_of(p.x) + 1] += 1;
        }
        for j in 0..m {
            offsets[j + 1] += offsets[j];
        }
        let counts: Vec<f64> = (0..m).map(|j| (offsets[j + 1] - offsets[j]) as f64).collect();

        // Lag bounds per cell offset d: x − y ∈ [(d − 1)w, (d + 1)w].
        let near = self.cfg.near_cells.min(m - 1);
        let mut k_hi = vec![0.0; m];
        let mut far_lo = vec![0.0; m];
        let mut far_hi = vec![0.0; m];
        for d in 0..m {
            let (lo, hi) = self.kernel.bounds((d as f64 - 1.0) * w, (d as f64 + 1.0) * w);
            k_hi[d] = hi;
            if d > near {
                far_lo[d] = lo;
                far_hi[d] = hi;
            }
        }
        let conv = |k: &[f64]| {
            if periodic {
                fft::circular(&counts, k)
            } else {
                fft::linear(&counts, k, m)
            }
        };
        let envelope = conv(&k_hi);
        let far_lo = conv(&far_lo);
        let far_hi = conv(&far_hi);
        let total_points = self.current.len() as f64;
        // Covers FFT rounding, which is relative to the largest terms.
        let slack = |v: f64| 1e-9 * (1.0 + v.abs() + total_points * 1e-6);

        let upper: Vec<f64> = envelope.iter().map(|&u| u.max(0.0) + slack(u)).collect();
        let height_max = upper.iter().cloned().fold(0.0, f64::max);
        if height_max > self.cfg.hard_cap {
            return Err(Error::HeightRunaway {
                height: height_max,
                cap: self.cfg.hard_cap,
            });
        }
        for (j, &u) in upper.iter().enumerate() {
            self.field.ensure_height(j, u);
        }

        let this = &*self;
        let decided: Vec<(Vec<EmbeddedPoint>, usize)> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut accepted = Vec::new();
                let mut fallbacks = 0;
                for (i, &(h, x)) in this.field.atoms_below(j, upper[j]).iter().enumerate() {
                    let mut near_sum = 0.0;
                    for d in 0..=near {
                        let k = if periodic {
                            (j + m - d % m) % m
                        } else if d <= j {
                            j - d
                        } else {
                            break;
                        };
                        for p in &this.current[offsets[k]..offsets[k + 1]] {
                            near_sum += this.kernel.value(x - p.x);
                        }
                    }
                    let lo = near_sum + far_lo[j] - slack(far_lo[j] + near_sum);
                    let hi = near_sum + far_hi[j] + slack(far_hi[j] + near_sum);
                    let accept = if h <= lo {
                        true
                    } else if h > hi {
                        false
                    } else {
                        fallbacks += 1;
                        h <= this.lambda_at(x)
                    };
                    if accept {
                        accepted.push(EmbeddedPoint { id: atom_id(j, i), x });
                    }
                }
                (accepted, fallbacks)
            })
            .collect();

        let mut next = Vec::new();
        let mut fallbacks = 0;
        for (pts, f) in decided {
            next.extend(pts);
            fallbacks += f;
        }
        next.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
        self.current = next;
        self.height_max = height_max;
        self.exact_fallbacks = fallbacks;
        self.g += 1;
        Ok(())
    }
}

pub fn step_embedding(mut state: EmbeddingState) -> Result<EmbeddingState> {
    state.step()?;
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub seed: u64,
    pub g: usize,
    /// Points of `N^(g)` in the inner window.
    pub count: usize,
    /// Points of `N^(g)` in `[lo, hi]`.
    pub window_count: usize,
    pub sym_diff: usize,
    pub height_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
    /// First generation after which the inner-window configuration stayed
    /// unchanged for the required number of consecutive steps.
    pub stabilized_at: Option<usize>,
    pub escaped_mass_bound: f64,
}

impl ConvergenceReport {
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

fn sym_diff_size(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                n += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                n += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    n + (a.len() - i) + (b.len() - j)
}

/// Iterates up to `g_max` generations, recording inner-window counts and
/// symmetric differences. Stops early once the inner window has been
/// unchanged for `stable_steps` consecutive generations.
pub fn run_embedding(
    mut state: EmbeddingState,
    g_max: usize,
    inner: (f64, f64),
    stable_steps: usize,
) -> Result<(ConvergenceReport, EmbeddingState)> {
    let (a, b) = inner;
    let mut prev = state.ids_in(a, b);
    let mut records = vec![ConvergenceRecord {
        seed: state.seed,
        g: state.g,
        count: prev.len(),
        window_count: state.count_in(state.cfg.lo, state.cfg.hi),
        sym_diff: 0,
        height_max: state.height_max,
    }];
    let mut run = 0;
    let mut stabilized_at = None;
    if state.current.is_empty() {
        stabilized_at = Some(state.g);
    }
    while stabilized_at.is_none() && state.g < g_max {
        state.step()?;
        let ids = state.ids_in(a, b);
        let sd = sym_diff_size(&prev, &ids);
        records.push(ConvergenceRecord {
            seed: state.seed,
            g: state.g,
            count: ids.len(),
            window_count: state.count_in(state.cfg.lo, state.cfg.hi),
            sym_diff: sd,
            height_max: state.height_max,
        });
        run = if sd == 0 { run + 1 } else { 0 };
        if stable_steps > 0 && run >= stable_steps {
            stabilized_at = Some(state.g - stable_steps);
        }
        if state.current.is_empty() && stabilized_at.is_none() {
            stabilized_at = Some(state.g);
        }
        prev = ids;
    }
    Ok((
        ConvergenceReport {
            records,
            stabilized_at,
            escaped_mass_bound: state.escaped_mass_bound(),
        },
        state,
    ))
}
