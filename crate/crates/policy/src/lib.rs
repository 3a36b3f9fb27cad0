//! EM policy training over a generative model's latent action space: a
//! goal-conditioned Gaussian policy, a variational policy optimized with a
//! trust-region surrogate (E-step), a KL projection back onto the policy
//! (M-step), and a value-function baseline.

mod error;
mod net;
mod rollout;
mod steps;
mod train;

pub use error::{PolicyError, Result};
pub use net::{build_value_net, PolicyNet};
pub use rollout::{collect_rollouts, LatentDecoder, RolloutBatch};
pub use steps::{e_step, fit_value, m_step, mean_kl, surrogate_objective, MAX_GRAD_NORM, RATIO_CLIP};
pub use train::{train_em, CurveRow, EmConfig, TrainingCurve};
