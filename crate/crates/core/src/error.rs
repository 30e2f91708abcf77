use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("{op}: index out of range ({detail})")]
    Index { op: &'static str, detail: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("{path}: expected {expected} columns, found {actual} (line {line})")]
    Schema {
        path: String,
        expected: usize,
        actual: usize,
        line: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse {value:?} as a number")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        value: String,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
