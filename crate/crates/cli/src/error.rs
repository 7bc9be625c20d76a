use std::io;
use std::path::PathBuf;

use gkp_core::GkpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] GkpError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Schema { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(GkpError::NumericalFailure(_) | GkpError::MassDeficit { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
