//! Library side of the `mcarzf` command: config resolution, output files,
//! the validation suite and process exit codes.

pub mod checks;
pub mod manifest;
pub mod output;

use std::path::PathBuf;

use mcarzf::sim::{run_experiment, ExperimentResult, Progress};
use mcarzf::ErrorKind;

pub use manifest::{FileConfig, Overrides, RunManifest, SweepKind};

pub const OUT_DIR_ENV: &str = "MCARZF_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const FEASIBILITY: i32 = 4;
    pub const CONVERGENCE: i32 = 5;
    pub const NUMERICAL: i32 = 6;
    pub const VALIDATION: i32 = 7;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] mcarzf::Error),
    #[error("{failed} of {total} sweep results failed (first: {kind:?}); outputs were still written")]
    Failed { kind: ErrorKind, failed: usize, total: usize },
    #[error("{0} validation checks failed")]
    Validation(usize),
}

fn kind_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => exit::CONFIG,
        ErrorKind::Feasibility => exit::FEASIBILITY,
        ErrorKind::Convergence => exit::CONVERGENCE,
        ErrorKind::Numerical => exit::NUMERICAL,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Sim(e) => kind_code(e.kind()),
            CliError::Failed { kind, .. } => kind_code(*kind),
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => exit::OTHER,
        }
    }
}

/// Run a resolved sweep, write both output files and report failed points.
pub fn run_sweep(manifest: &RunManifest, progress: &mut dyn FnMut(Progress)) -> Result<ExperimentResult, CliError> {
    let result = run_experiment(&manifest.config, &manifest.sweep, &manifest.schemes, progress)?;
    output::write_outputs(manifest, &result)?;
    let summaries = result.points.iter().flat_map(|p| &p.schemes);
    let total = summaries.clone().count();
    let failures: Vec<ErrorKind> = summaries.filter_map(|s| s.failure()).collect();
    match failures.first() {
        Some(&kind) => Err(CliError::Failed { kind, failed: failures.len(), total }),
        None => Ok(result),
    }
}
