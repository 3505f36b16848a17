use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("training diverged: {0}")]
    TrainingDivergence(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("layout diverged: {0}")]
    LayoutDivergence(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
