//! Experiment configuration files.
//!
//! A config is a TOML document with two tables:
//!
//! ```toml
//! [experiment]
//! kind = "renewal_hawkes"
//! seed = 7
//! replications = 20
//! out = "runs/renewal"      # optional
//!
//! [params]
//! f = "family=pareto alpha=0.5 x_m=1"
//! m = 0.5
//! horizon = 1e5
//! ```
//!
//! The keys accepted under `[params]` depend on the kind; see
//! [`ExperimentKind::describe`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::DisplacementSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ClusterIterate,
    RenewalHawkes,
    TwoIndex,
    Embedding,
    PalmBackward,
    Kesten,
    Walk,
    Inar,
    GridOracle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::ClusterIterate,
        ExperimentKind::RenewalHawkes,
        ExperimentKind::TwoIndex,
        ExperimentKind::Embedding,
        ExperimentKind::PalmBackward,
        ExperimentKind::Kesten,
        ExperimentKind::Walk,
        ExperimentKind::Inar,
        ExperimentKind::GridOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ClusterIterate => "cluster_iterate",
            ExperimentKind::RenewalHawkes => "renewal_hawkes",
            ExperimentKind::TwoIndex => "two_index",
            ExperimentKind::Embedding => "embedding",
            ExperimentKind::PalmBackward => "palm_backward",
            ExperimentKind::Kesten => "kesten",
            ExperimentKind::Walk => "walk",
            ExperimentKind::Inar => "inar",
            ExperimentKind::GridOracle => "grid_oracle",
        }
    }

    /// One-line summary and the accepted parameter keys.
    pub fn describe(self) -> &'static str {
        match self {
            ExperimentKind::ClusterIterate => {
                "subcritical generation iteration from a Poisson field; params: f, eta, m, lo, hi, buffer, g_max, cap, blocks"
            }
            ExperimentKind::RenewalHawkes => {
                "Hawkes process with renewal immigration; params: f, m, lambda, horizon, burn_in, family_budget, blocks"
            }
            ExperimentKind::TwoIndex => {
                "critical two-index construction from time 0; params: f1, f2, horizon, family_budget, probes"
            }
            ExperimentKind::Embedding => {
                "Poisson embedding of the generations; params: f, lambda, lo, hi, boundary, buffer, g_max, inner_lo, inner_hi, stable_steps, hard_cap"
            }
            ExperimentKind::PalmBackward => {
                "backward spine construction of the Palm version; params: f, spine_depth, spine_reach, family_budget, window_lo, window_hi, cell"
            }
            ExperimentKind::Kesten => "Kesten tree offspring statistics; params: node_budget, spine_depth",
            ExperimentKind::Walk => {
                "occupation curve of a symmetrized walk; params: f, n_steps, h, s_lo, s_hi, tail_points, cauchy_tol"
            }
            ExperimentKind::Inar => {
                "critical INAR paths and innovations; params: alpha | (exponent, k_max), lambda, n, burn_in, cap, lags"
            }
            ExperimentKind::GridOracle => {
                "deterministic grid calculus; params: what (renewal | two_index | palm | scan), f, f1, f2, h, x_max, probes, alphas, ranges"
            }
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("experiment.kind", format!("unknown kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replications: usize,
    pub out: Option<PathBuf>,
    pub params: toml::Table,
}

fn int_field(table: &toml::Table, key: &str) -> Result<Option<u64>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
        Some(_) => Err(Error::config(format!("experiment.{key}"), "must be a nonnegative integer")),
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64, replications: usize) -> Self {
        Self {
            kind,
            seed,
            replications,
            out: None,
            params: toml::Table::new(),
        }
    }

    /// Parses a config; with `default_kind`, a missing `experiment.kind`
    /// (or a missing `[experiment]` table) falls back to it.
    pub fn parse(text: &str, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<document>", e.message()))?;
        for key in doc.keys() {
            if key != "experiment" && key != "params" {
                return Err(Error::config(key.as_str(), "unknown section"));
            }
        }
        let empty = toml::Table::new();
        let exp = match doc.get("experiment") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config("experiment", "must be a table")),
            None => &empty,
        };
        for key in exp.keys() {
            if !["kind", "seed", "replications", "out"].contains(&key.as_str()) {
                return Err(Error::config(format!("experiment.{key}"), "unknown key"));
            }
        }
        let kind = match exp.get("kind") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::config("experiment.kind", "must be a string")),
            None => default_kind.ok_or_else(|| Error::config("experiment.kind", "missing"))?,
        };
        let seed = int_field(exp, "seed")?.unwrap_or(0);
        let replications = int_field(exp, "replications")?.unwrap_or(1) as usize;
        let out = match exp.get("out") {
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(Error::config("experiment.out", "must be a string")),
            None => None,
        };
        let params = match doc.get("params") {
            Some(toml::Value::Table(t)) => t.clone(),
            Some(_) => return Err(Error::config("params", "must be a table")),
            None => toml::Table::new(),
        };
        Ok(Self {
            kind,
            seed,
            replications,
            out,
            params,
        })
    }

    pub fn from_path(path: &Path, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, default_kind)
    }

    /// Typed view of `[params]`; unknown or malformed keys are config errors.
    pub fn params<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        self.params
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("params", e.message().to_string()))
    }

    /// SHA-256 over the canonical JSON form of kind, seed, replications and
    /// the resolved parameters.
    pub fn hash_with(&self, resolved_params: &serde_json::Value) -> String {
        let canonical = serde_json::json!({
            "kind": self.kind.name(),
            "seed": self.seed,
            "replications": self.replications,
            "params": resolved_params,
        });
        let mut h = Sha256::new();
        h.update(canonical.to_string().as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// Parses a displacement law from its key-value text, tagging errors with
/// the parameter name.
pub fn parse_law(field: &str, text: &str) -> Result<DisplacementSpec> {
    text.parse::<DisplacementSpec>()
        .map_err(|e| Error::config(format!("params.{field}"), e.to_string()))
}
