use thiserror::Error;

/// Errors produced by the correlation-analysis routines.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("column '{0}' is constant; correlation is undefined")]
    ConstantInput(String),
    #[error("feature matrix is malformed: {0}")]
    BadMatrix(String),
    #[error("value in column '{column}' is not finite")]
    NonFinite { column: String },
}

pub type Result<T> = std::result::Result<T, AnalysisError>;
