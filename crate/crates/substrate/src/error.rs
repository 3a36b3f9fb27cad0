use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubstrateError {
    #[error("layer {layer}: input width {got} does not match expected {expected}")]
    DimMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("layer {layer}: batch normalization in train mode needs a batch of at least 2 rows, got {got}")]
    BatchTooSmall { layer: usize, got: usize },
    #[error("non-finite gradient at parameter {path}")]
    NonFiniteGradient { path: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SubstrateError>;
