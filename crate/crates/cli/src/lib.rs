//! Batch experiment runner: one INI config in, CSV files plus a
//! `summary.json` (resolved config, tool version, results) out.
//!
//! Exit codes: 0 on success, 2 for invalid configurations or inputs, 3 when
//! a numerical invariant fails, 1 for I/O trouble.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod experiments;
pub mod svg;

pub use config::{ExperimentConfig, Kind};

use serde_json::{json, Value};
use simplexlab::Error;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical invariant violated: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        match e {
            Error::Io(io) => CliError::Io(io),
            Error::Csv(c) => CliError::Io(std::io::Error::other(c)),
            Error::InvariantViolation(_)
            | Error::MassCollapse { .. }
            | Error::NoWitness
            | Error::Normalization(_)
            | Error::NewtonNonconvergence(_)
            | Error::ChartBoundary(_)
            | Error::SingularGram(_) => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Files and results produced by one experiment, held in memory until the
/// whole run has succeeded.
#[derive(Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub results: serde_json::Map<String, Value>,
    /// Threshold checks that failed; the outputs are still written.
    pub violations: Vec<String>,
    /// Human-readable lines printed after the run.
    pub report: Vec<String>,
}

impl Outcome {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn result(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: Vec<String>,
}

/// Default thread count from the environment, if set.
pub const THREADS_ENV: &str = "SIMPLEXLAB_THREADS";

/// Runs the configured experiment on a pool of `cfg.threads` workers and
/// writes its outputs. Nothing is written when the run fails before its
/// threshold checks.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(CliError::Validation("threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    let outcome = pool.install(|| experiments::dispatch(cfg))?;
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("simplexlab-out").join(cfg.kind.name()));
    let files = write_outputs(&out_dir, cfg, &outcome)?;
    if !outcome.violations.is_empty() {
        return Err(CliError::Numerical(outcome.violations.join("; ")));
    }
    Ok(RunSummary {
        out_dir,
        files,
        report: outcome.report,
    })
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in &outcome.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    let summary = json!({
        "tool": "simplexlab",
        "version": VERSION,
        "kind": cfg.kind.name(),
        "status": if outcome.violations.is_empty() { "ok" } else { "invariant-violation" },
        "violations": outcome.violations,
        "config": cfg.echo(),
        "results": Value::Object(outcome.results.clone()),
    });
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&summary).expect("json values serialize"))?;
    written.push(path);
    for line in &outcome.report {
        log::info!("{line}");
    }
    Ok(written)
}
