//! The experiment kinds behind `lab run`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{parse_law, ExperimentConfig, ExperimentKind};
use super::intensity::{estimate_intensity, pool_intensity};
use super::{execute, Artifact, Experiment, Outcome, RunResult};
use crate::cluster::{iterate_generations, ClusterField};
use crate::distributions::DisplacementSpec;
use crate::embedding::{init_embedding, run_embedding, Boundary, ConvergenceRecord, ConvergenceReport, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::genealogy::{backward_palm_simulate, grow_kesten, grow_kesten_spine_first, BackwardPalmSpec, NodeKind};
use crate::hawkes_sim::{simulate_renewal_hawkes, simulate_two_index, RenewalImmigrationSpec, TwoIndexSpec};
use crate::inar::{innovations, simulate_inar, symmetrized_lattice_step, InarSpec, DEFAULT_EVENT_CAP};
use crate::renewal_calc::{
    palm_local_finiteness_scan, palm_mean_measure, renewal_function, two_index_mean, GridMeasure, PalmSettings,
    ScanSettings,
};
use crate::rng::RngStream;
use crate::stats::{chi_square_test, poisson_pmf, Summary};
use crate::walks::{
    classify_transience, dyadic_checkpoints, sample_walk, ClassifySettings, OccupationCurve, StepLaw, WalkSample,
    WalkSpec,
};

pub(crate) fn dispatch(config: &ExperimentConfig) -> Result<RunResult> {
    match config.kind {
        ExperimentKind::ClusterIterate => execute(&ClusterIterate::new(config)?, config),
        ExperimentKind::RenewalHawkes => execute(&RenewalHawkes::new(config)?, config),
        ExperimentKind::TwoIndex => execute(&TwoIndex::new(config)?, config),
        ExperimentKind::Embedding => execute(&Embedding::new(config)?, config),
        ExperimentKind::PalmBackward => execute(&PalmBackward::new(config)?, config),
        ExperimentKind::Kesten => execute(&Kesten::new(config)?, config),
        ExperimentKind::Walk => execute(&Walk::new(config)?, config),
        ExperimentKind::Inar => execute(&Inar::new(config)?, config),
        ExperimentKind::GridOracle => {
            // Deterministic: nothing to replicate.
            let mut once = config.clone();
            once.replications = 0;
            execute(&GridOracle::new(config)?, &once)
        }
    }
}

fn est(s: &Summary) -> Value {
    json!({ "mean": s.mean, "stderr": s.stderr(), "n": s.n })
}

fn summary_of(xs: impl IntoIterator<Item = f64>) -> Summary {
    let mut s = Summary::new();
    for x in xs {
        s.push(x);
    }
    s
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("parameters serialize to JSON")
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("params.{field}"), "must be positive"))
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

// ---------------------------------------------------------------- cluster

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterParams {
    f: String,
    #[serde(default = "half")]
    eta: f64,
    #[serde(default = "half")]
    m: f64,
    #[serde(default)]
    lo: f64,
    #[serde(default = "ten_thousand")]
    hi: f64,
    #[serde(default = "hundred_thousand")]
    buffer: f64,
    #[serde(default = "sixty")]
    g_max: usize,
    #[serde(default = "fifty_million")]
    cap: usize,
    #[serde(default = "twenty")]
    blocks: usize,
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn ten_thousand() -> f64 {
    1e4
}
fn hundred_thousand() -> f64 {
    1e5
}
fn sixty() -> usize {
    60
}
fn twenty() -> usize {
    20
}
fn fifty_million() -> usize {
    50_000_000
}
fn ten_million() -> usize {
    10_000_000
}

struct ClusterIterate {
    p: ClusterParams,
    field: ClusterField,
}

impl ClusterIterate {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: ClusterParams = c.params()?;
        let f = parse_law("f", &p.f)?;
        positive("hi - lo", p.hi - p.lo)?;
        let field = ClusterField::new(f, p.m).map_err(|e| Error::config("params.m", e.to_string()))?;
        Ok(Self { p, field })
    }
}

#[derive(Serialize)]
struct ClusterRecord {
    window_count: usize,
    lambda_hat: f64,
    block_stderr: f64,
    generation_counts: Vec<usize>,
}

impl Experiment for ClusterIterate {
    type Record = ClusterRecord;

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<ClusterRecord> {
        let p = &self.p;
        let run = iterate_generations(p.eta, &self.field, p.g_max, p.lo, p.hi, p.buffer, p.cap, rng)?;
        let (lambda_hat, block_stderr) = estimate_intensity(&run.total, (p.lo, p.hi), p.blocks);
        Ok(ClusterRecord {
            window_count: run.total.window_count(),
            lambda_hat,
            block_stderr,
            generation_counts: run.window_counts,
        })
    }

    fn summarize(&self, records: &[ClusterRecord]) -> Result<Outcome> {
        let len = self.p.hi - self.p.lo;
        let parts: Vec<(usize, f64)> = records.iter().map(|r| (r.window_count, len)).collect();
        let per = summary_of(records.iter().map(|r| r.lambda_hat));
        let gens = self.p.g_max + 1;
        let by_gen: Vec<f64> = (0..gens)
            .map(|g| summary_of(records.iter().map(|r| r.generation_counts[g] as f64 / len)).mean)
            .collect();
        Ok(Outcome {
            summary: json!({
                "lambda_pooled": pool_intensity(&parts),
                "lambda_stderr": per.stderr(),
                "lambda_target": self.p.eta / (1.0 - self.p.m),
                "generation_intensity": by_gen,
            }),
            accounting: json!({ "left_buffer": self.p.buffer, "escaped_mass_bound": self.field.f.sf(self.p.buffer) }),
            artifacts: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------- renewal hawkes

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RenewalParams {
    f: String,
    m: f64,
    #[serde(default = "one")]
    lambda: f64,
    #[serde(default = "hundred_thousand")]
    horizon: f64,
    #[serde(default)]
    burn_in: Option<f64>,
    #[serde(default = "ten_million")]
    family_budget: usize,
    #[serde(default = "twenty")]
    blocks: usize,
}

struct RenewalHawkes {
    p: RenewalParams,
    spec: RenewalImmigrationSpec,
}

impl RenewalHawkes {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let mut p: RenewalParams = c.params()?;
        let f = parse_law("f", &p.f)?;
        let mut spec = RenewalImmigrationSpec::new(f, p.m, p.lambda, p.horizon);
        spec.burn_in = *p.burn_in.get_or_insert(spec.burn_in);
        spec.family_budget = p.family_budget;
        spec.truncation().map_err(|e| Error::config("params.m", e.to_string()))?;
        Ok(Self { p, spec })
    }
}

#[derive(Serialize)]
struct RenewalRecord {
    lambda_hat: f64,
    block_stderr: f64,
    immigrant_rate: f64,
    immigrants_total: usize,
    censored_families: usize,
}

impl Experiment for RenewalHawkes {
    type Record = RenewalRecord;

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<RenewalRecord> {
        let run = simulate_renewal_hawkes(&self.spec, rng)?;
        let (lambda_hat, block_stderr) = estimate_intensity(&run.points, (0.0, self.p.horizon), self.p.blocks);
        Ok(RenewalRecord {
            lambda_hat,
            block_stderr,
            immigrant_rate: run.immigrant_rate(),
            immigrants_total: run.immigrants_total,
            censored_families: run.censored_families,
        })
    }

    fn summarize(&self, records: &[RenewalRecord]) -> Result<Outcome> {
        let lambda = summary_of(records.iter().map(|r| r.lambda_hat));
        let imm = summary_of(records.iter().map(|r| r.immigrant_rate));
        Ok(Outcome {
            summary: json!({
                "lambda": est(&lambda),
                "immigrant_rate": est(&imm),
                "immigrant_rate_target": (1.0 - self.p.m) * self.p.lambda,
            }),
            accounting: json!({
                "truncation": self.spec.truncation()?,
                "burn_in": self.spec.burn_in,
                "censored_families": records.iter().map(|r| r.censored_families).sum::<usize>(),
            }),
            artifacts: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------- two-index

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoIndexParams {
    f1: String,
    f2: String,
    #[serde(default = "ten_thousand")]
    horizon: f64,
    #[serde(default = "ten_million")]
    family_budget: usize,
    #[serde(default)]
    probes: Vec<f64>,
}

struct TwoIndex {
    p: TwoIndexParams,
    spec: TwoIndexSpec,
}

impl TwoIndex {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: TwoIndexParams = c.params()?;
        let spec = TwoIndexSpec {
            f1: parse_law("f1", &p.f1)?,
            f2: parse_law("f2", &p.f2)?,
            horizon: p.horizon,
            family_budget: p.family_budget,
        };
        positive("horizon", p.horizon)?;
        Ok(Self { p, spec })
    }
}

#[derive(Serialize)]
struct TwoIndexRecord {
    epochs: usize,
    count: usize,
    ratio: f64,
    probe_counts: Vec<usize>,
    censored_families: usize,
}

impl Experiment for TwoIndex {
    type Record = TwoIndexRecord;

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<TwoIndexRecord> {
        let run = simulate_two_index(&self.spec, rng)?;
        let count = run.cumulative(self.p.horizon);
        Ok(TwoIndexRecord {
            epochs: run.epochs,
            count,
            ratio: count as f64 / self.p.horizon,
            probe_counts: self.p.probes.iter().map(|&x| run.cumulative(x)).collect(),
            censored_families: run.censored_families,
        })
    }

    fn summarize(&self, records: &[TwoIndexRecord]) -> Result<Outcome> {
        let ratio = summary_of(records.iter().map(|r| r.ratio));
        let mut sorted: Vec<f64> = records.iter().map(|r| r.ratio).collect();
        sorted.sort_by(f64::total_cmp);
        let probes: Vec<Value> = self
            .p
            .probes
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let s = summary_of(records.iter().map(|r| r.probe_counts[i] as f64));
                json!({ "x": x, "count": est(&s) })
            })
            .collect();
        Ok(Outcome {
            summary: json!({
                "ratio": est(&ratio),
                "ratio_median": quantile(&sorted, 0.5),
                "ratio_q10": quantile(&sorted, 0.1),
                "ratio_q90": quantile(&sorted, 0.9),
                "probes": probes,
            }),
            accounting: json!({
                "censored_families": records.iter().map(|r| r.censored_families).sum::<usize>(),
            }),
            artifacts: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------- embedding

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingParams {
    f: String,
    #[serde(default = "one")]
    lambda: f64,
    #[serde(default)]
    lo: f64,
    #[serde(default = "ten_thousand")]
    hi: f64,
    #[serde(default = "periodic")]
    boundary: String,
    #[serde(default = "thousand")]
    buffer: f64,
    #[serde(default = "five")]
    g_max: usize,
    #[serde(default)]
    inner_lo: f64,
    #[serde(default = "ten")]
    inner_hi: f64,
    #[serde(default)]
    stable_steps: usize,
    #[serde(default = "million")]
    hard_cap: f64,
}

fn periodic() -> String {
    "periodic".into()
}
fn thousand() -> f64 {
    1e3
}
fn five() -> usize {
    5
}
fn ten() -> f64 {
    10.0
}
fn million() -> f64 {
    1e6
}

struct Embedding {
    p: EmbeddingParams,
    cfg: EmbeddingConfig,
}

impl Embedding {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: EmbeddingParams = c.params()?;
        let f = parse_law("f", &p.f)?;
        let boundary = match p.boundary.as_str() {
            "periodic" => Boundary::Periodic,
            "buffered" => Boundary::Buffered { buffer: p.buffer },
            other => {
                return Err(Error::config(
                    "params.boundary",
                    format!("`{other}` is not periodic or buffered"),
                ))
            }
        };
        positive("hi - lo", p.hi - p.lo)?;
        let mut cfg = EmbeddingConfig::new(p.lambda, f, p.lo, p.hi, boundary);
        cfg.hard_cap = p.hard_cap;
        Ok(Self { p, cfg })
    }
}

impl Experiment for Embedding {
    type Record = ConvergenceReport;

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<ConvergenceReport> {
        let state = init_embedding(self.cfg.clone(), rng)?;
        let (report, _) = run_embedding(state, self.p.g_max, (self.p.inner_lo, self.p.inner_hi), self.p.stable_steps)?;
        Ok(report)
    }

    fn summarize(&self, records: &[ConvergenceReport]) -> Result<Outcome> {
        let len = self.p.hi - self.p.lo;
        let mut generations = Vec::new();
        for g in 0..=self.p.g_max {
            // A run that emptied out stays empty; one that stopped after
            // stabilizing has no record for later generations.
            let at: Vec<ConvergenceRecord> = records
                .iter()
                .filter_map(|r| {
                    r.records.iter().find(|x| x.g == g).cloned().or_else(|| {
                        let last = r.records.last()?;
                        (last.g < g && last.window_count == 0).then(|| ConvergenceRecord { g, ..last.clone() })
                    })
                })
                .collect();
            if at.is_empty() {
                continue;
            }
            let intensity = summary_of(at.iter().map(|x| x.window_count as f64 / len));
            let inner = summary_of(at.iter().map(|x| x.count as f64));
            let mut counts: Vec<f64> = at.iter().map(|x| x.count as f64).collect();
            counts.sort_by(f64::total_cmp);
            generations.push(json!({
                "g": g,
                "intensity": est(&intensity),
                "inner_count": est(&inner),
                "inner_median": quantile(&counts, 0.5),
                "occupied_fraction": at.iter().filter(|x| x.count > 0).count() as f64 / at.len() as f64,
                "sym_diff_mean": summary_of(at.iter().map(|x| x.sym_diff as f64)).mean,
                "height_max": at.iter().map(|x| x.height_max).fold(0.0, f64::max),
            }));
        }
        let lines: String = records.iter().map(|r| r.to_json_lines()).collect();
        Ok(Outcome {
            summary: json!({
                "generations": generations,
                "stabilized": records.iter().filter(|r| r.stabilized_at.is_some()).count(),
            }),
            accounting: json!({
                "escaped_mass_bound": records.iter().map(|r| r.escaped_mass_bound).fold(0.0, f64::max),
            }),
            artifacts: vec![Artifact {
                name: "convergence.jsonl".into(),
                contents: lines,
            }],
        })
    }
}

// ---------------------------------------------------------------- palm backward

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PalmParams {
    f: String,
    #[serde(default = "deep")]
    spine_depth: usize,
    #[serde(default = "ten_thousand")]
    spine_reach: f64,
    #[serde(default = "million_usize")]
    family_budget: usize,
    #[serde(default = "minus_ten")]
    window_lo: f64,
    #[serde(default = "ten")]
    window_hi: f64,
    #[serde(default = "one")]
    cell: f64,
}

fn deep() -> usize {
    1 << 40
}
fn million_usize() -> usize {
    1_000_000
}
fn minus_ten() -> f64 {
    -10.0
}

struct PalmBackward {
    p: PalmParams,
    spec: BackwardPalmSpec,
    cells: usize,
}

impl PalmBackward {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: PalmParams = c.params()?;
        let f = parse_law("f", &p.f)?;
        positive("window_hi - window_lo", p.window_hi - p.window_lo)?;
        positive("cell", p.cell)?;
        let mut spec = BackwardPalmSpec::new(f, p.spine_depth, (p.window_lo, p.window_hi));
        spec.spine_reach = p.spine_reach;
        spec.family_budget = p.family_budget;
        let cells = ((p.window_hi - p.window_lo) / p.cell).ceil() as usize;
        Ok(Self { p, spec, cells })
    }
}

#[derive(Serialize)]
struct PalmRecord {
    cell_counts: Vec<u32>,
    spine_len: usize,
    censored_families: usize,
}

impl Experiment for PalmBackward {
    type Record = PalmRecord;

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<PalmRecord> {
        let run = backward_palm_simulate(&self.spec, rng)?;
        let mut cell_counts = vec![0u32; self.cells];
        for &x in run.points.points() {
            let i = (((x - self.p.window_lo) / self.p.cell).floor() as usize).min(self.cells - 1);
            cell_counts[i] += 1;
        }
        Ok(PalmRecord {
            cell_counts,
            spine_len: run.spine.len(),
            censored_families: run.censored_families,
        })
    }

    fn summarize(&self, records: &[PalmRecord]) -> Result<Outcome> {
        let mut csv = String::from("cell_lo,cell_hi,mean,stderr\n");
        let mut cells = Vec::new();
        for i in 0..self.cells {
            let s = summary_of(records.iter().map(|r| r.cell_counts[i] as f64));
            let lo = self.p.window_lo + i as f64 * self.p.cell;
            let hi = (lo + self.p.cell).min(self.p.window_hi);
            csv.push_str(&format!("{lo},{hi},{},{}\n", s.mean, s.stderr()));
            cells.push(json!({ "lo": lo, "hi": hi, "mean": s.mean, "stderr": s.stderr() }));
        }
        Ok(Outcome {
            summary: json!({
                "cells": cells,
                "spine_len": est(&summary_of(records.iter().map(|r| r.spine_len as f64))),
            }),
            accounting: json!({
                "censored_families": records.iter().map(|r| r.censored_families).sum::<usize>(),
                "spine_reach": self.p.spine_reach,
            }),
            artifacts: vec![Artifact {
                name: "cells.csv".into(),
                contents: csv,
            }],
        })
    }
}

// ---------------------------------------------------------------- kesten

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KestenParams {
    #[serde(default = "hundred_thousand_usize")]
    node_budget: usize,
    #[serde(default)]
    spine_depth: Option<usize>,
}

fn hundred_thousand_usize() -> usize {
    100_000
}

struct Kesten {
    p: KestenParams,
}

#[derive(Serialize)]
struct KestenRecord {
    nodes: usize,
    spine_len: usize,
    depth: usize,
    truncated: bool,
    /// Histograms of drawn offspring counts of expanded nodes.
    normal_hist: Vec<u64>,
    special_hist: Vec<u64>,
}

fn histogram(counts: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut h = Vec::new();
    for k in counts {
        let k = k as usize;
        if h.len() <= k {
            h.resize(k + 1, 0);
        }
        h[k] += 1;
    }
    h
}

fn merge_hist(hists: impl Iterator<Item = Vec<u64>>) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for h in hists {
        if out.len() < h.len() {
            out.resize(h.len(), 0);
        }
        for (o, v) in out.iter_mut().zip(&h) {
            *o += v;
        }
    }
    out
}

/// Mean, standard error and chi-square fit of `hist` (shifted by `shift`)
/// to Pois(1).
fn offspring_fit(hist: &[u64], shift: usize) -> Value {
    let n: u64 = hist.iter().sum();
    let mut s = Summary::new();
    for (k, &c) in hist.iter().enumerate() {
        for _ in 0..c {
            s.push(k as f64);
        }
    }
    let shifted: Vec<u64> = hist.iter().skip(shift).cloned().collect();
    let below: u64 = hist.iter().take(shift).sum();
    let mut expected: Vec<f64> = poisson_pmf(1.0, shifted.len()).iter().map(|p| p * n as f64).collect();
    let mut observed = shifted.clone();
    let head: f64 = expected.iter().sum();
    observed.push(0);
    expected.push((n as f64 - head).max(0.0));
    let (stat, p, dof) = chi_square_test(&observed, &expected);
    json!({
        "nodes": n,
        "mean": s.mean,
        "stderr": s.stderr(),
        "below_support": below,
        "chi_square": { "statistic": stat, "p_value": p, "dof": dof },
    })
}

impl Kesten {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: KestenParams = c.params()?;
        if p.node_budget == 0 {
            return Err(Error::config("params.node_budget", "must be at least 1"));
        }
        Ok(Self { p })
    }
}

impl Experiment for Kesten {
    type Record = KestenRecord;

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<KestenRecord> {
        let tree = match self.p.spine_depth {
            Some(d) => grow_kesten_spine_first(self.p.node_budget, d, rng)?,
            None => grow_kesten(self.p.node_budget, rng)?,
        };
        // The node whose children were cut off by the budget has an
        // incomplete stored family; only fully stored families are counted.
        let mut stored = vec![0u64; tree.len()];
        for n in &tree.nodes[1..] {
            stored[n.parent.expect("non-root node has a parent")] += 1;
        }
        let pick = |kind: NodeKind| {
            tree.nodes
                .iter()
                .filter(|n| n.kind == kind)
                .filter_map(|n| n.offspring.filter(|&k| stored[n.id] == k))
                .collect::<Vec<_>>()
        };
        let (normal, special) = (pick(NodeKind::Normal), pick(NodeKind::Special));
        Ok(KestenRecord {
            nodes: tree.len(),
            spine_len: tree.spine.len(),
            depth: tree.depth(),
            truncated: tree.truncated,
            normal_hist: histogram(normal.into_iter()),
            special_hist: histogram(special.into_iter()),
        })
    }

    fn summarize(&self, records: &[KestenRecord]) -> Result<Outcome> {
        let normal = merge_hist(records.iter().map(|r| r.normal_hist.clone()));
        let special = merge_hist(records.iter().map(|r| r.special_hist.clone()));
        Ok(Outcome {
            summary: json!({
                "normal": offspring_fit(&normal, 0),
                "special": offspring_fit(&special, 1),
                "spine_len": est(&summary_of(records.iter().map(|r| r.spine_len as f64))),
                "nodes": records.iter().map(|r| r.nodes).sum::<usize>(),
            }),
            accounting: json!({
                "truncated_trees": records.iter().filter(|r| r.truncated).count(),
            }),
            artifacts: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------- walk

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WalkParams {
    #[serde(default)]
    f: Option<String>,
    #[serde(default)]
    lattice_exponent: Option<f64>,
    #[serde(default)]
    lattice_k_max: Option<usize>,
    #[serde(default = "two_pow_16")]
    n_steps: u64,
    #[serde(default = "one")]
    h: f64,
    #[serde(default)]
    s_lo: Option<f64>,
    #[serde(default)]
    s_hi: Option<f64>,
    #[serde(default)]
    tail_points: Option<usize>,
    #[serde(default)]
    cauchy_tol: Option<f64>,
}

fn two_pow_16() -> u64 {
    1 << 16
}

struct Walk {
    p: WalkParams,
    spec: WalkSpec,
    settings: ClassifySettings,
}

impl Walk {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: WalkParams = c.params()?;
        let step = match (&p.f, p.lattice_exponent, p.lattice_k_max) {
            (Some(f), None, None) => StepLaw::Symmetrized(parse_law("f", f)?.symmetrized()),
            (None, Some(e), Some(k)) => {
                let spec = InarSpec::power_law(e, k, 1.0).map_err(|e| Error::config("params.lattice_exponent", e.to_string()))?;
                StepLaw::Lattice(symmetrized_lattice_step(&spec)?)
            }
            _ => {
                return Err(Error::config(
                    "params.f",
                    "give either f or both lattice_exponent and lattice_k_max",
                ))
            }
        };
        let d = ClassifySettings::default();
        let settings = ClassifySettings {
            s_lo: p.s_lo.unwrap_or(d.s_lo),
            s_hi: p.s_hi.unwrap_or(d.s_hi),
            tail_points: p.tail_points.unwrap_or(d.tail_points),
            cauchy_tol: p.cauchy_tol.unwrap_or(d.cauchy_tol),
        };
        let spec = WalkSpec {
            step,
            n_steps: p.n_steps,
            h: p.h,
            replications: c.replications,
        };
        Ok(Self { p, spec, settings })
    }
}

impl Experiment for Walk {
    type Record = WalkSample;

    fn resolved(&self) -> Value {
        json!({ "params": self.p, "classify": self.settings })
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<WalkSample> {
        sample_walk(&self.spec, rng)
    }

    fn summarize(&self, records: &[WalkSample]) -> Result<Outcome> {
        let curve = OccupationCurve::from_samples(dyadic_checkpoints(self.p.n_steps), records);
        let mut csv = Vec::new();
        curve.write_csv(&mut csv)?;
        let classification = if records.is_empty() || curve.checkpoints.len() < 4 {
            Value::Null
        } else {
            to_value(&classify_transience(&curve, &self.settings)?)
        };
        Ok(Outcome {
            summary: json!({ "curve": curve, "classification": classification }),
            accounting: json!({}),
            artifacts: vec![Artifact {
                name: "occupation.csv".into(),
                contents: String::from_utf8(csv).expect("CSV is ASCII"),
            }],
        })
    }
}

// ---------------------------------------------------------------- inar

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InarParams {
    #[serde(default)]
    alpha: Option<Vec<f64>>,
    #[serde(default)]
    exponent: Option<f64>,
    #[serde(default)]
    k_max: Option<usize>,
    #[serde(default = "one")]
    lambda: f64,
    #[serde(default = "ten_thousand_usize")]
    n: usize,
    #[serde(default)]
    burn_in: usize,
    #[serde(default = "event_cap")]
    cap: u64,
    #[serde(default = "five")]
    lags: usize,
}

fn ten_thousand_usize() -> usize {
    10_000
}
fn event_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

struct Inar {
    p: InarParams,
    spec: InarSpec,
}

impl Inar {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: InarParams = c.params()?;
        let spec = match (&p.alpha, p.exponent, p.k_max) {
            (Some(a), None, None) => InarSpec::new(a.clone(), p.lambda),
            (None, Some(e), Some(k)) => InarSpec::power_law(e, k, p.lambda),
            _ => return Err(Error::config("params.alpha", "give either alpha or both exponent and k_max")),
        }
        .map_err(|e| Error::config("params.alpha", e.to_string()))?;
        if p.n <= p.lags {
            return Err(Error::config("params.n", "must exceed lags"));
        }
        Ok(Self { p, spec })
    }
}

#[derive(Serialize)]
struct InarRecord {
    mean_x: f64,
    var_x: f64,
    len_u: usize,
    /// `Σ_n u_n u_{n+j}` for `j = 0..=lags`.
    lag_sums: Vec<f64>,
    /// `Σ_n (u_n u_{n+j})²`.
    lag_sq_sums: Vec<f64>,
    sum_u: f64,
    total_events: u64,
    final_x: u64,
}

impl Experiment for Inar {
    type Record = InarRecord;

    fn resolved(&self) -> Value {
        json!({ "params": self.p, "tail_mass": self.spec.tail_mass })
    }

    fn replicate(&self, _: u64, rng: &mut RngStream) -> Result<InarRecord> {
        let path = simulate_inar(&self.spec, self.p.n, self.p.burn_in, self.p.cap, rng)?;
        let u = innovations(&path, &self.spec)?;
        let xs = summary_of(path.observed().iter().map(|&x| x as f64));
        let n = u.len();
        let u = &u;
        let prods = |j: usize| (0..n - j).map(move |i| u[i] * u[i + j]);
        Ok(InarRecord {
            mean_x: xs.mean,
            var_x: xs.variance(),
            len_u: n,
            lag_sums: (0..=self.p.lags).map(|j| prods(j).sum()).collect(),
            lag_sq_sums: (0..=self.p.lags).map(|j| prods(j).map(|p| p * p).sum()).collect(),
            sum_u: u.iter().sum(),
            total_events: path.total_events,
            final_x: *path.observed().last().unwrap_or(&0),
        })
    }

    fn summarize(&self, records: &[InarRecord]) -> Result<Outcome> {
        // u_n and u_n u_{n+j} (j ≥ 1) are martingale differences, so the
        // variance of a pooled sum is the sum of the squared terms. Seed
        // means are too skewed (a handful of surviving paths carry the
        // positive part) for their spread to estimate it.
        let pooled = |j: usize| {
            let count: usize = records.iter().map(|r| r.len_u - j).sum();
            let sum: f64 = records.iter().map(|r| r.lag_sums[j]).sum();
            let sq: f64 = records.iter().map(|r| r.lag_sq_sums[j]).sum();
            let c = count.max(1) as f64;
            (sum / c, sq.sqrt() / c, count)
        };
        let count_u: usize = records.iter().map(|r| r.len_u).sum();
        let sum_u: f64 = records.iter().map(|r| r.sum_u).sum();
        let (gamma0, _, _) = pooled(0);
        let sq_u: f64 = records.iter().map(|r| r.lag_sums[0]).sum();
        let c = count_u.max(1) as f64;
        let corr: Vec<Value> = (1..=self.p.lags)
            .map(|j| {
                let (g, se, n) = pooled(j);
                json!({
                    "lag": j,
                    "autocov": { "mean": g, "stderr": se, "n": n },
                    "corr": g / gamma0,
                    "corr_stderr": se / gamma0,
                })
            })
            .collect();
        Ok(Outcome {
            summary: json!({
                "mean_x": est(&summary_of(records.iter().map(|r| r.mean_x))),
                "var_x": est(&summary_of(records.iter().map(|r| r.var_x))),
                "mean_u": { "mean": sum_u / c, "stderr": sq_u.sqrt() / c, "n": count_u },
                "var_u": gamma0,
                "lags": corr,
                "extinct_fraction": records.iter().filter(|r| r.final_x == 0).count() as f64 / records.len().max(1) as f64,
            }),
            accounting: json!({
                "tail_mass": self.spec.tail_mass,
                "k_max": self.spec.k_max(),
                "max_total_events": records.iter().map(|r| r.total_events).max().unwrap_or(0),
                "event_cap": self.p.cap,
            }),
            artifacts: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------- grid oracle

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridParams {
    what: String,
    #[serde(default)]
    f: Option<String>,
    #[serde(default)]
    f1: Option<String>,
    #[serde(default)]
    f2: Option<String>,
    #[serde(default = "default_h")]
    h: f64,
    #[serde(default = "ten_thousand")]
    x_max: f64,
    #[serde(default)]
    probes: Vec<f64>,
    #[serde(default)]
    alphas: Vec<f64>,
    #[serde(default)]
    ranges: Option<Vec<f64>>,
}

fn default_h() -> f64 {
    0.01
}

struct GridOracle {
    p: GridParams,
}

impl GridOracle {
    fn new(c: &ExperimentConfig) -> Result<Self> {
        let p: GridParams = c.params()?;
        positive("h", p.h)?;
        positive("x_max", p.x_max)?;
        if !["renewal", "two_index", "palm", "scan"].contains(&p.what.as_str()) {
            return Err(Error::config("params.what", format!("unknown oracle `{}`", p.what)));
        }
        Ok(Self { p })
    }

    fn law(&self, field: &str, v: &Option<String>) -> Result<DisplacementSpec> {
        let text = v
            .as_deref()
            .ok_or_else(|| Error::config(format!("params.{field}"), "required for this oracle"))?;
        parse_law(field, text)
    }

    fn grid(&self, field: &str, v: &Option<String>) -> Result<GridMeasure> {
        Ok(GridMeasure::from_spec(&self.law(field, v)?, self.p.h, self.p.x_max))
    }

    fn csv(g: &GridMeasure) -> Result<Artifact> {
        let mut buf = Vec::new();
        g.write_csv(&mut buf)?;
        Ok(Artifact {
            name: "grid.csv".into(),
            contents: String::from_utf8(buf).expect("CSV is ASCII"),
        })
    }
}

impl Experiment for GridOracle {
    type Record = ();

    fn resolved(&self) -> Value {
        to_value(&self.p)
    }

    fn replicate(&self, _: u64, _: &mut RngStream) -> Result<()> {
        Ok(())
    }

    fn summarize(&self, _: &[()]) -> Result<Outcome> {
        let p = &self.p;
        match p.what.as_str() {
            "renewal" => {
                let f = self.grid("f", &p.f)?;
                let u = renewal_function(&f, p.x_max)?;
                let probes: Vec<Value> = p.probes.iter().map(|&x| json!({ "x": x, "u": u.cumulative(x) })).collect();
                Ok(Outcome {
                    summary: json!({ "probes": probes }),
                    accounting: json!({ "input_truncated_mass": f.truncated }),
                    artifacts: vec![Self::csv(&u)?],
                })
            }
            "two_index" => {
                let f1 = self.grid("f1", &p.f1)?;
                let f2 = self.grid("f2", &p.f2)?;
                let u = two_index_mean(&f1, &f2, p.x_max)?;
                let probes: Vec<Value> = p
                    .probes
                    .iter()
                    .map(|&x| json!({ "x": x, "u_bar": u.cumulative(x), "ratio": u.cumulative(x) / x }))
                    .collect();
                Ok(Outcome {
                    summary: json!({ "probes": probes }),
                    accounting: json!({ "input_truncated_mass": [f1.truncated, f2.truncated] }),
                    artifacts: vec![Self::csv(&u)?],
                })
            }
            "palm" => {
                let f = self.grid("f", &p.f)?;
                let palm = palm_mean_measure(&f, p.x_max, PalmSettings::default())?;
                let u0 = &palm.measure;
                let asym = (0..=u0.k_hi()).map(|k| (u0.cell(k) - u0.cell(-k)).abs()).fold(0.0, f64::max);
                let probes: Vec<Value> = p
                    .probes
                    .iter()
                    .map(|&x| json!({ "x": x, "mass_0_x": u0.mass_in(0.0, x) }))
                    .collect();
                Ok(Outcome {
                    summary: json!({
                        "atom0": u0.atom0,
                        "max_asymmetry": asym,
                        "terms": palm.terms,
                        "last_increment": palm.last_increment,
                        "probes": probes,
                    }),
                    accounting: json!({ "truncated_mass": u0.truncated, "input_truncated_mass": f.truncated }),
                    artifacts: vec![Self::csv(u0)?],
                })
            }
            _ => {
                let mut settings = ScanSettings {
                    h: p.h,
                    ..ScanSettings::default()
                };
                if let Some(r) = &p.ranges {
                    settings.ranges = r.clone();
                }
                let alphas = if p.alphas.is_empty() { vec![0.3, 0.5, 0.7] } else { p.alphas.clone() };
                let entries = palm_local_finiteness_scan(&alphas, &settings)?;
                Ok(Outcome {
                    summary: json!({ "scan": entries }),
                    accounting: json!({}),
                    artifacts: Vec::new(),
                })
            }
        }
    }
}
