use thiserror::Error;

use crate::grid::Field;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("mode index {mode} out of range for {cells} cells")]
    ModeOutOfRange { mode: usize, cells: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize, last_finite: Box<Field> },

    #[error("no convergence after {iterations} iterations (residual {residual:e}): {reason}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
