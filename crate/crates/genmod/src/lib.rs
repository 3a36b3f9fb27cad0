//! Latent-variable generative models over trajectory datasets: a beta-VAE
//! with KL-threshold annealing and an InfoGAN with mutual-information
//! regularization, both built on the dense-network substrate.

mod error;
mod infogan;
mod model;
mod vae;

pub use error::{GenModError, Result};
pub use infogan::{
    discriminator_accuracy, infogan_losses, train_infogan, GanEpochLoss, GanLosses,
    InfoGanConfig, InfoGanTrainState,
};
pub use model::{
    load_model, save_model, GenerativeModel, ModelKind, ModelMeta, Normalization, Prior,
};
pub use vae::{
    encode_mean, train_vae, vae_loss, VaeConfig, VaeEpochLoss, VaeLosses, VaeTrainState,
};
