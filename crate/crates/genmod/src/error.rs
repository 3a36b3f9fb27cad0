use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenModError {
    #[error("latent vector has dimension {got}, model expects {expected}")]
    LatentDim { expected: usize, got: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error(transparent)]
    Substrate(#[from] lplab_substrate::SubstrateError),
    #[error(transparent)]
    Arm(#[from] lplab_arm::ArmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GenModError>;
