use std::path::Path;

use ccs_ica::IcaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("numerical failure: {0}")]
    Numerical(IcaError),

    #[error("i/o failure: {0}")]
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<IcaError> for CliError {
    fn from(e: IcaError) -> Self {
        match e {
            IcaError::InvalidInput(msg) => CliError::Invalid(msg),
            other => CliError::Numerical(other),
        }
    }
}
