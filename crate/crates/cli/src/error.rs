use std::path::PathBuf;

use barenblatt_core::Error as SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver did not converge: {0}")]
    NotConverged(SolverError),
    #[error("invalid problem: {0}")]
    Problem(SolverError),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Problem(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Validation(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NotConverged { .. } => CliError::NotConverged(e),
            other => CliError::Problem(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
