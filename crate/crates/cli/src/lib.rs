//! Command-line driver for the Nernst-Planck-Darcy solver: configuration
//! files, checkpoints, the named experiments and their CSV reports.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod experiments;

use npd_core::NpdError;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Run(#[from] NpdError),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn csv(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }

    /// Stable identifier used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Schema(_) => "Schema",
            CliError::Checkpoint(_) => "Checkpoint",
            CliError::Io(_) => "Io",
            CliError::Run(e) => match e {
                NpdError::InvalidGrid(_) => "InvalidGrid",
                NpdError::InvalidParams(_) => "InvalidParams",
                NpdError::ShapeMismatch => "ShapeMismatch",
                NpdError::NonNeutralSource { .. } => "NonNeutralSource",
                NpdError::NonFinite { .. } => "NonFinite",
                NpdError::NegativityBreach { .. } => "NegativityBreach",
                NpdError::TimeoutIncomplete { .. } => "TimeoutIncomplete",
                NpdError::FitPrecondition(_) => "FitPrecondition",
                NpdError::MismatchedTrajectories => "MismatchedTrajectories",
                NpdError::UnderResolved { .. } => "UnderResolved",
                NpdError::InvalidScenario(_) => "InvalidScenario",
            },
        }
    }

    /// Simulation time at which a run failed, when known.
    pub fn time(&self) -> Option<f64> {
        match self {
            CliError::Run(
                NpdError::NonFinite { time }
                | NpdError::NegativityBreach { time, .. }
                | NpdError::TimeoutIncomplete { time, .. }
                | NpdError::UnderResolved { time, .. },
            ) => Some(*time),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) => 2,
            CliError::Run(_) | CliError::Checkpoint(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Exit code of a run whose invariant checks failed.
pub const EXIT_CHECKS_FAILED: i32 = 4;

/// Caps the worker pool at `NPD_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("NPD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Config(format!(
                "NPD_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("NPD_THREADS: {e}")))
}
