use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("set too small: need at least {need} points, got {got}")]
    SetTooSmall { need: usize, got: usize },
    #[error("dimension mismatch: left set has dim {left}, right set has dim {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory execution failed: {0}")]
    Execution(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;
