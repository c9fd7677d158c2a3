use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum ZxmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ZxmError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ZxmError::InvalidParameter(msg.into()))
}
