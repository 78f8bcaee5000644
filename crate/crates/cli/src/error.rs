use std::path::Path;

use cef_core::CefError;
use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{} check(s) failed: {}", .0.len(), .0.join("; "))]
    CheckFailed(Vec<String>),
    #[error("numeric abort: {0}")]
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub const OK: i32 = 0;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    /// Anything that went wrong while reading inputs is the caller's problem.
    pub fn usage(e: CefError) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }
}

impl From<CefError> for CliError {
    fn from(e: CefError) -> Self {
        match e {
            CefError::Numeric(_) | CefError::Singularity(_) => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}
