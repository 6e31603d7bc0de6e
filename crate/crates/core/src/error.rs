//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GadError>;

#[derive(Debug, Error)]
pub enum GadError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("unknown primitive kind: {0}")]
    UnknownKind(String),

    #[error("tape error: {0}")]
    Tape(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Train(String),

    #[error("evaluation error: {0}")]
    Eval(String),
}

impl GadError {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        GadError::Shape { op, detail: detail.into() }
    }
}
