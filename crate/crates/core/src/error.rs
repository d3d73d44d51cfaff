use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("quarter-turn rotation requires a square tensor, got {height}x{width}")]
    NonSquareRotation { height: usize, width: usize },

    #[error("pad target {target} smaller than tensor extent {height}x{width}")]
    PadTargetTooSmall {
        target: usize,
        height: usize,
        width: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unsupported capability: {0}")]
    Unsupported(&'static str),

    #[error("insufficient samples: needed {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("estimate kind mismatch: expected {expected}, got {got}")]
    KindMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("tensor format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("dimension overflow: {0}")]
    DimOverflow(u64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
