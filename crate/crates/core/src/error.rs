use thiserror::Error;

/// Errors raised by flow evaluation, training and I/O.
#[derive(Debug, Error)]
pub enum CefError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Evaluation landed inside a singularity guard (inversion centre, SCT pole, ...).
    #[error("singular point: {0}")]
    Singularity(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CefError> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(CefError::Shape(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CefError::Numeric(format!("{what} produced a non-finite value")))
    }
}
