//! Batch front end for rdlab: run configurations, sweeps, exponent
//! schedules, duality-constant estimates and summary reports.

pub mod commands;
pub mod config;
pub mod io;
pub mod pipeline;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
