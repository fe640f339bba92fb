use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Every numerical-quality variant carries the offending quantity and the
/// tolerance it was checked against.
#[derive(Debug, Error)]
pub enum KacError {
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("domain truncation: |cf(xi_max)| = {value:e} exceeds decay tolerance {tol:e}")]
    DomainTruncation { value: f64, tol: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("numerical quality: {quantity} = {value:e} violates tolerance {tol:e}")]
    Numerical {
        quantity: String,
        value: f64,
        tol: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, KacError>;

impl KacError {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        KacError::Parameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(quantity: impl Into<String>, value: f64, tol: f64) -> Self {
        KacError::Numerical {
            quantity: quantity.into(),
            value,
            tol,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KacError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            KacError::Config { .. } | KacError::Parameter { .. } | KacError::Parse { .. } => 2,
            KacError::Numerical { .. }
            | KacError::DomainTruncation { .. }
            | KacError::GridMismatch(_)
            | KacError::InsufficientData(_)
            | KacError::Unsupported(_) => 3,
            KacError::ResourceLimit(_) => 4,
            KacError::Io { .. } => 1,
        }
    }
}
