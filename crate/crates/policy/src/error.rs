use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value at outer iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },
    #[error(transparent)]
    Substrate(#[from] lplab_substrate::SubstrateError),
    #[error(transparent)]
    Arm(#[from] lplab_arm::ArmError),
    #[error(transparent)]
    GenMod(#[from] lplab_genmod::GenModError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PolicyError>;
