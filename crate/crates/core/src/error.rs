use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (grid bounds, sample count, schedule, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An index or parameter outside its admissible range.
    #[error("out of range: {0}")]
    Range(String),

    /// Arrays or grids whose dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A metric with no defined value (e.g. every class union is empty).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Malformed binary file.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
