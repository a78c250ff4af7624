use thiserror::Error;

/// Errors produced by the numerical routines and file readers of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("signal must have at least one coordinate")]
    EmptySignal,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate atom: norm {norm:e} is zero")]
    DegenerateAtom { norm: f64 },

    #[error("dependent atom: orthogonal remainder {remainder:e} is below threshold {threshold:e}")]
    DependentAtom { remainder: f64, threshold: f64 },

    #[error("singular gram matrix (condition estimate {condition:e})")]
    SingularGram { condition: f64 },

    #[error("empty dictionary")]
    EmptyDictionary,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
