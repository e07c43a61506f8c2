//! Error types shared across the engine.

use thiserror::Error;

/// Coarse failure classification, used by front-ends that map errors to
/// process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid configuration or unusable parameter combination.
    Config,
    /// Invalid, missing, or inconsistent input data.
    Data,
    /// Non-finite values produced during numeric work.
    Numerical,
}

/// Unified error type for the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector in similarity computation")]
    ZeroNorm,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dataset must contain both normal and abnormal samples")]
    SingleClassDataset,

    #[error("class {label} has {count} usable samples, need at least {need}")]
    TooFewClassSamples { label: u8, count: usize, need: usize },

    /// A batch cannot contribute to the contrastive loss; callers decide
    /// whether to skip it or abort.
    #[error("batch unusable for contrastive loss: {0}")]
    BatchSkip(&'static str),

    #[error("non-finite gradient at {path}")]
    NonFiniteGradient { path: String },

    #[error("non-finite value during {context}")]
    NonFinite { context: String },

    #[error("histograms have different binning")]
    HistogramMismatch,

    #[error("mask selects nothing: total weight is zero")]
    DegenerateMask,

    #[error("parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("unsupported checkpoint version {found}, supported version is {supported}")]
    CheckpointVersion { found: u32, supported: u32 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::CheckpointVersion { .. } => ErrorClass::Config,
            Error::NonFiniteGradient { .. } | Error::NonFinite { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
