use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hawkeslab::harness::{run, ExperimentConfig, ExperimentKind};
use hawkeslab::Error;

/// Runs critical-Hawkes experiments from TOML configs.
#[derive(Parser)]
#[command(name = "lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a deterministic grid oracle (kind defaults to grid_oracle).
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the experiment kinds.
    List,
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::ConfigInvalid { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn load(path: &PathBuf, default_kind: Option<ExperimentKind>) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_path(path, default_kind).map_err(|e| match e {
        Error::Io(io) => Error::ConfigInvalid {
            field: path.display().to_string(),
            reason: io.to_string(),
        },
        other => other,
    })
}

fn execute(config: ExperimentConfig) -> ExitCode {
    match run(&config) {
        Ok(result) => {
            println!("{}", result.summary_json);
            for f in &result.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for k in ExperimentKind::ALL {
                println!("{:<16} {}", k.name(), k.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            replications,
            out,
        } => {
            let mut cfg = match load(&config, None) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_for(&e);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if out.is_some() {
                cfg.out = out;
            }
            execute(cfg)
        }
        Command::Oracle { config, out } => {
            let mut cfg = match load(&config, Some(ExperimentKind::GridOracle)) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_for(&e);
                }
            };
            if cfg.kind != ExperimentKind::GridOracle {
                let e = Error::ConfigInvalid {
                    field: "experiment.kind".into(),
                    reason: format!("`lab oracle` needs grid_oracle, got {}", cfg.kind),
                };
                eprintln!("error: {e}");
                return exit_for(&e);
            }
            if out.is_some() {
                cfg.out = out;
            }
            execute(cfg)
        }
    }
}
