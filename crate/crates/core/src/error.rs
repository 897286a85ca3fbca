use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by measure evaluation, lattice tests and the data pipeline.
#[derive(Debug, Error)]
pub enum RiskError {
    #[error("dimension mismatch: expected {expected} atoms, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("search error: {0}")]
    Search(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("spec error: {0}")]
    Spec(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = RiskError> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> RiskError {
    RiskError::Domain(msg.into())
}
