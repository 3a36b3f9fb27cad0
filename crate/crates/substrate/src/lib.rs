//! Minimal dense feed-forward network engine with exact reverse-mode
//! gradients, Adam optimization, diagonal-Gaussian heads and reproducible
//! random number generation. Every other crate in the workspace builds its
//! networks on this one.

pub mod adam;
pub mod checkpoint;
mod error;
pub mod gaussian;
pub mod gradcheck;
pub mod net;
pub mod rng;

pub use adam::{adam_step, adam_step_net, AdamState};
pub use error::{Result, SubstrateError};
pub use gaussian::GaussianHead;
pub use net::{Activation, DenseNet, ForwardCache, LayerSpec, Mode};
pub use rng::Rng;
