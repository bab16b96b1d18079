use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("tabulation failed for sequence {sequence}, channel {channel}: {message}")]
    Tabulation {
        sequence: usize,
        channel: usize,
        message: String,
    },

    #[error("projection has {available} slots, slot {requested} requested")]
    SlotExhausted { requested: usize, available: usize },

    #[error("projection was fitted for {fitted} mode, {requested} requested")]
    ProjectionMode {
        fitted: &'static str,
        requested: &'static str,
    },

    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("stratification failed: {0}")]
    Stratification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
