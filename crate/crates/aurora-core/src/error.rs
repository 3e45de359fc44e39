//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {min} replicate columns, got {got}")]
    TooFewReplicates { got: usize, min: usize },

    #[error("matrix has no rows")]
    Empty,

    #[error("held-out column {col} out of range for {cols} columns")]
    IndexOutOfRange { col: usize, cols: usize },

    #[error("target arity {arity} must leave at least one feature column (max {max})")]
    ArityTooLarge { arity: usize, max: usize },

    #[error("{subsets} held-out subsets exceed the cap of {cap}; lower the target arity")]
    SubsetExplosion { subsets: u128, cap: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("k_max {k_max} exceeds the number of points {n}")]
    KMaxTooLarge { k_max: usize, n: usize },

    #[error("k {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("need at least {min} units, got {got}")]
    TooFewUnits { got: usize, min: usize },

    #[error("replicate count {k} too small, need at least {min}")]
    KTooSmall { k: usize, min: usize },

    #[error("non-positive entry {value} at row {row}, column {col}")]
    NonPositiveData { row: usize, col: usize, value: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("ragged row at line {line}: expected {expected} fields, got {got}")]
    RaggedRows {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("unknown method '{got}'; valid methods: {valid}")]
    UnknownMethod { got: String, valid: &'static str },

    #[error("regressor failed for held-out column {col}: {source}")]
    Regressor {
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Usage errors exit with status 2; runtime failures with 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::UnknownMethod { .. } | Error::InvalidConfig(_) | Error::Json(_)
        )
    }
}
