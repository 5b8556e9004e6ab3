//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented invariant.
    #[error("invalid {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    /// Two pieces of state that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An operation that needs at least one element got none.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A probability trace reached the logarithm non-positive; the flooring
    /// contract was violated upstream.
    #[error("non-positive trace in {context}: {value}")]
    TraceUnderflow { context: String, value: f64 },

    /// Malformed IDX or checkpoint bytes.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
