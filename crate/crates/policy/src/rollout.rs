use crate::error::Result;
use crate::net::PolicyNet;
use lplab_arm::{dataset::sample_goal, execute, reward, ArmConfig, Trajectory};
use lplab_genmod::GenerativeModel;
use lplab_substrate::{DenseNet, Rng};
use ndarray::{Array1, Array2};

/// Anything that turns a latent action into an executable trajectory.
pub trait LatentDecoder {
    fn latent_dim(&self) -> usize;
    fn decode_traj(&self, alpha: &Array1<f64>) -> Result<Trajectory>;
}

impl LatentDecoder for GenerativeModel {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn decode_traj(&self, alpha: &Array1<f64>) -> Result<Trajectory> {
        Ok(self.decode(alpha)?)
    }
}

/// One batch of independent goal-conditioned episodes. Latent actions are
/// always drawn from the main policy, never from the variational policy.
#[derive(Debug)]
pub struct RolloutBatch {
    /// Goal end states, one row per episode.
    pub states: Array2<f64>,
    /// Latent actions sampled from the policy.
    pub latents: Array2<f64>,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Array1<f64>,
    /// r_i - V(s_i) at collection time.
    pub advantages: Array1<f64>,
    /// Episodes whose execution failed (reward forced to 0).
    pub failed: Vec<bool>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Collects `n` independent episodes: uniform workspace goals, latent
/// actions from the policy, rewards from executing the decoded
/// trajectories, and advantages from the value baseline. Execution
/// failures are kept with reward 0 and flagged.
pub fn collect_rollouts<D: LatentDecoder + ?Sized>(
    policy: &PolicyNet,
    decoder: &D,
    value: &DenseNet,
    arm_cfg: &ArmConfig,
    n: usize,
    rng: &Rng,
) -> Result<RolloutBatch> {
    let k = policy.latent_dim;
    let mut states = Array2::zeros((n, 3));
    let mut latents = Array2::zeros((n, k));
    let mut trajectories = Vec::with_capacity(n);
    let mut rewards = Array1::zeros(n);
    let mut failed = vec![false; n];

    for i in 0..n {
        let mut stream = rng.derive("rollout").derive_index(i as u64);
        let goal = sample_goal(arm_cfg, &mut stream);
        let state = Array1::from(vec![goal.x, goal.y, goal.phi]);
        let alpha = policy.sample(&state, &mut stream)?;
        let traj = decoder.decode_traj(&alpha)?;
        match execute(&traj, arm_cfg) {
            Ok(achieved) => rewards[i] = reward(goal, achieved),
            Err(_) => {
                rewards[i] = 0.0;
                failed[i] = true;
            }
        }
        states.row_mut(i).assign(&state);
        latents.row_mut(i).assign(&alpha);
        trajectories.push(traj);
    }

    let values = value.predict(&states)?;
    let advantages = Array1::from_shape_fn(n, |i| rewards[i] - values[[i, 0]]);

    Ok(RolloutBatch {
        states,
        latents,
        trajectories,
        rewards,
        advantages,
        failed,
    })
}
