use thiserror::Error;

use crate::formulation::ThetaPoint;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("game evaluation failed: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported game: {0}")]
    Unsupported(String),

    #[error("solver diverged at iteration {iter}: {reason}")]
    Diverged {
        iter: usize,
        reason: String,
        last_good: Box<ThetaPoint>,
    },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
