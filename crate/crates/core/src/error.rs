use std::path::PathBuf;

/// Errors raised by the decomposition library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {order}-way tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("mode {0} appears more than once")]
    DuplicateMode(usize),

    #[error("rank {rank} infeasible for mode {mode} of size {size}")]
    RankInfeasible { mode: usize, rank: usize, size: usize },

    #[error("factor matrix is not orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("SRHT requires a power-of-two dimension, got {0}")]
    NotPowerOfTwo(usize),

    #[error("subrank planning failed: {0}")]
    Planning(String),

    #[error("data distribution error: {0}")]
    Distribution(String),

    #[error("collective error: {0}")]
    Collective(String),

    #[error("missing intermediate data: {0}")]
    MissingIntermediate(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad metadata in {path}: {reason}")]
    Metadata { path: PathBuf, reason: String },

    #[error("payload size mismatch in {path}: expected {expected} bytes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
