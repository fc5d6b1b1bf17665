use thiserror::Error;

/// Errors produced by model fitting, sampling and experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("matrix not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point lies outside the bounding box")]
    OutsideBounds,

    #[error("level set unreachable: {candidates} candidates after {iterations} iterations")]
    LevelSetUnreachable { iterations: usize, candidates: usize },

    #[error("sampler exhausted")]
    SamplerExhausted,

    #[error("unknown oracle `{0}`")]
    UnknownOracle(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
