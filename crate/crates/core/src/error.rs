//! Crate-wide error type.

use std::path::PathBuf;

/// Errors raised anywhere in the prognostics pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {operand}: expected {expected}, got {actual}")]
    DimensionMismatch {
        operand: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cache does not belong to these parameters: {0}")]
    ForeignCache(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input window")]
    EmptyInput,

    #[error("insufficient history: {available} cycles available, at least {required} required")]
    InsufficientHistory { available: usize, required: usize },

    #[error("history of {available} cycles exceeds the input window of {limit} cycles")]
    HistoryTooLong { available: usize, limit: usize },

    #[error("all-false mask")]
    EmptyMask,

    #[error("zero truth value at index {0}")]
    ZeroTruth(usize),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("no knee: {0}")]
    NoKnee(String),

    #[error("no knee in horizon")]
    NoKneeInHorizon,

    #[error("curve too short: {len} points, need more than {min}")]
    CurveTooShort { len: usize, min: usize },

    #[error("training diverged at stage {stage}, epoch {epoch}: {detail}")]
    Diverged {
        stage: usize,
        epoch: usize,
        detail: String,
    },

    #[error("checkpoint version {found} not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("{path}:{row}: {message}")]
    Data {
        path: String,
        row: usize,
        message: String,
    },

    #[error("cell {cell_id}: {message}")]
    Cell { cell_id: String, message: String },

    #[error("config: {0}")]
    Config(String),

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

pub type Result<T, E = Error> = std::result::Result<T, E>;

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

pub(crate) fn check_len(operand: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            operand,
            expected,
            actual,
        })
    }
}
