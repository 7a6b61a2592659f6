//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not conform to the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A value is outside the documented domain of an operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data could not be parsed or fails validation.
    #[error("data error: {0}")]
    Data(String),

    /// A configuration file or flag combination is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A model container file is malformed.
    #[error("container error: {0}")]
    Container(String),

    /// Training aborted (divergence, NaN gradients, ...).
    #[error("training failure: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }
}
