use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit codes: 0 ok, 1 partial failure, 2 configuration / input error,
/// 3 numerical failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Numerical { epoch: usize, batch: usize },
    #[error("gradient check failed: max relative error {0:e}")]
    GradCheck(f64),
    #[error("{failed} of {total} runs failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Partial { .. } => 1,
            CliError::Config(_) | CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Numerical { .. } | CliError::GradCheck(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ahfe_core::Error> for CliError {
    fn from(e: ahfe_core::Error) -> Self {
        match e {
            ahfe_core::Error::NumericalFailure { epoch, batch } => CliError::Numerical { epoch, batch },
            other => CliError::Config(other.to_string()),
        }
    }
}
