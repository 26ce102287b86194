//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Schema is inconsistent (duplicate names, missing target, ...) or a
    /// file does not match its declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell failed to parse; carries 1-based row (excluding header) and
    /// the column name.
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Input file had a header but no data rows, or an operation received
    /// zero samples.
    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Non-finite value where a finite number is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Classifier input contains a single class; the caller should use the
    /// degenerate-probability path (probability = class frequency).
    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
