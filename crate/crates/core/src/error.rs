//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by geometry, model, attack, defense, data, and harness
/// operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A cloud whose points all coincide cannot be scaled to the unit sphere.
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    /// Empty cloud where a non-empty one is required.
    #[error("empty point cloud")]
    EmptyCloud,

    /// Non-finite coordinate crossed an API boundary.
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    /// Inconsistent model or layer dimensions.
    #[error("model configuration error: {0}")]
    ModelConfig(String),

    /// Class label out of range.
    #[error("invalid label {label} for {num_classes} classes")]
    InvalidLabel { label: usize, num_classes: usize },

    /// Training or inference produced NaN/Inf.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Invalid attack, defense, dataset, or sweep configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Weight file with an unsupported format version.
    #[error("unsupported weight format version {0}")]
    UnsupportedVersion(u32),

    /// Malformed serialized data (weight files, meshes, reports).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An emitted adversarial sample failed independent re-verification.
    #[error("internal consistency failure: {0}")]
    ConstraintViolation(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV (de)serialization failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
