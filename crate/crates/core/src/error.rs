use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("analytic order statistic unsupported for {0}")]
    UnsupportedMethod(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid variant config: {0}")]
    InvalidVariant(String),

    #[error("config validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("precondition of {bound} violated: {detail}")]
    Precondition { bound: &'static str, detail: String },

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("trace has no parameter snapshots; rerun with snapshots enabled")]
    MissingSnapshots,

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
