use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid truth value: {0}")]
    InvalidTruth(String),

    #[error("confidence must lie in [0, 1), got {0}")]
    InvalidConfidence(f64),

    #[error("frequency is undefined without evidence")]
    NoEvidence,

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("pattern pool is empty; nothing to score against")]
    NoKnowledge,

    #[error("threshold calibration failed: {0}")]
    Calibration(String),

    #[error("row {row}: {message}")]
    Ingest { row: String, message: String },

    #[error("schema error in {path}: missing required column `{column}`")]
    Schema { path: PathBuf, column: String },

    #[error("referential error: {0}")]
    Referential(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("input length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("metric requires both classes, got only {0}")]
    SingleClass(&'static str),

    #[error("partitions cover different element universes")]
    UniverseMismatch,

    #[error("score matrix is not symmetric at ({0}, {1})")]
    NonSymmetric(usize, usize),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Ingest { .. }
            | Error::Schema { .. }
            | Error::Referential(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            _ => ErrorClass::Runtime,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Runtime => 4,
        }
    }
}
