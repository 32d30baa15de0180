//! Command-line experiment runner for `qpush-core`.
//!
//! `run` solves one instance and writes `trace.csv`, `summary.json` and,
//! on request, `bounds.csv`, `trace_full.csv` and `convergence.svg`.
//! `verify` checks the finite-time bounds against a reference solution,
//! `bench` runs the virtual-queue method and the dual subgradient baseline
//! side by side, and `plot` redraws a saved trace.

pub mod args;
pub mod commands;
pub mod plot;
pub mod slope;

use qpush_core::solver::RunFailure;

pub use args::Cli;
pub use commands::execute;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    BoundViolation(String),
}

impl CliError {
    /// 2 for configuration errors, 3 for numerical failures, 4 for bound
    /// violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::BoundViolation(_) => 4,
        }
    }
}

impl From<qpush_core::Error> for CliError {
    fn from(e: qpush_core::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<RunFailure> for CliError {
    fn from(f: RunFailure) -> Self {
        f.error.into()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
