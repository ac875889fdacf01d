//! Experiment runner: configuration, seeded parallel replication and file
//! outputs.
//!
//! Replicate `r` of a run with seed `s` draws from
//! `split_stream_tagged(s, r, kind)`. Replicates run on a local thread pool
//! (size from `LAB_THREADS`, default all cores) and are merged by index, so
//! summaries do not depend on the worker count.

mod config;
mod intensity;
mod kinds;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{parse_law, ExperimentConfig, ExperimentKind};
pub use intensity::{estimate_intensity, pool_intensity};

use crate::error::{Error, Result};
use crate::rng::{split_stream_tagged, RngStream};

/// A bulk output file produced by an experiment.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Module-level outcome of a run before it is written out.
pub struct Outcome {
    pub summary: Value,
    /// Censoring and truncation counters.
    pub accounting: Value,
    pub artifacts: Vec<Artifact>,
}

pub(crate) trait Experiment: Sync {
    type Record: Serialize + Send;

    /// Parameters with all defaults filled in.
    fn resolved(&self) -> Value;

    fn replicate(&self, index: u64, rng: &mut RngStream) -> Result<Self::Record>;

    fn summarize(&self, records: &[Self::Record]) -> Result<Outcome>;
}

#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replications: usize,
    pub config_hash: String,
    pub version: &'static str,
    pub params: Value,
    pub accounting: Value,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub metadata: Metadata,
    pub summary: Value,
    /// Files written, empty when the config has no output directory.
    pub files: Vec<PathBuf>,
    /// Contents of `summary.json`.
    pub summary_json: String,
    pub artifacts: Vec<Artifact>,
}

/// Worker count from `LAB_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("LAB_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `config` with the worker count taken from `LAB_THREADS`.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    run_with_threads(config, threads_from_env())
}

pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunResult> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("LAB_THREADS", e.to_string()))?;
    pool.install(|| kinds::dispatch(config))
}

pub(crate) fn execute<E: Experiment>(exp: &E, config: &ExperimentConfig) -> Result<RunResult> {
    let tag = config.kind.name();
    let records: Vec<E::Record> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| exp.replicate(r, &mut split_stream_tagged(config.seed, r, tag)))
        .collect::<Result<_>>()?;
    let outcome = exp.summarize(&records)?;
    let params = exp.resolved();
    let hash = config.hash_with(&params);
    let metadata = Metadata {
        kind: config.kind,
        seed: config.seed,
        replications: config.replications,
        config_hash: hash.clone(),
        version: env!("CARGO_PKG_VERSION"),
        params,
        accounting: outcome.accounting,
    };
    let summary_json = serde_json::to_string_pretty(&json!({
        "metadata": metadata,
        "summary": outcome.summary,
    }))
    .expect("summary values are plain JSON");
    let mut artifacts = vec![Artifact {
        name: "replicates.jsonl".into(),
        contents: records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let line = json!({ "config_hash": hash, "replicate": i, "record": r });
                line.to_string() + "\n"
            })
            .collect(),
    }];
    for a in outcome.artifacts {
        artifacts.push(stamp(a, &hash));
    }
    let files = match &config.out {
        Some(dir) => write_outputs(dir, &summary_json, &artifacts)?,
        None => Vec::new(),
    };
    Ok(RunResult {
        metadata,
        summary: outcome.summary,
        files,
        summary_json,
        artifacts,
    })
}

/// Adds the config hash to an artifact: a `#` line for CSV, a field on
/// every record for JSON lines.
fn stamp(a: Artifact, hash: &str) -> Artifact {
    let contents = if a.name.ends_with(".jsonl") {
        a.contents
            .lines()
            .map(|l| {
                let mut v: Value = serde_json::from_str(l).expect("artifact lines are JSON");
                if let Value::Object(m) = &mut v {
                    m.insert("config_hash".into(), Value::String(hash.to_string()));
                }
                v.to_string() + "\n"
            })
            .collect()
    } else {
        format!("# config_hash={hash}\n{}", a.contents)
    };
    Artifact { name: a.name, contents }
}

fn write_outputs(dir: &Path, summary: &str, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let path = dir.join("summary.json");
    fs::write(&path, summary)?;
    files.push(path);
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents)?;
        files.push(path);
    }
    Ok(files)
}
