use crate::error::Result;
use lplab_substrate::{gaussian, Activation, DenseNet, ForwardCache, Rng};
use ndarray::{Array1, Array2};

/// Goal-conditioned diagonal-Gaussian policy: a tanh trunk mapping the end
/// state to mean and log-std heads over the latent action space.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub net: DenseNet,
    pub state_dim: usize,
    pub latent_dim: usize,
}

impl PolicyNet {
    pub fn new(state_dim: usize, latent_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut dims = vec![state_dim];
        dims.extend_from_slice(hidden);
        dims.push(2 * latent_dim);
        let net = DenseNet::mlp(&dims, Activation::Tanh, rng);
        let mut policy = PolicyNet {
            net,
            state_dim,
            latent_dim,
        };
        // Start exploration narrower than the unit prior: bias the log-std
        // head so the initial std is well below the latent scale.
        policy.set_initial_log_std(-1.0);
        policy
    }

    /// Biases the log-std head so freshly initialized states start near the
    /// given log standard deviation.
    pub fn set_initial_log_std(&mut self, log_std: f64) {
        let last = self.net.layers.last_mut().expect("mlp has layers");
        for j in self.latent_dim..2 * self.latent_dim {
            last.bias[j] = log_std;
        }
    }

    /// Eval-mode heads: (means, clamped log-stds), one row per state.
    pub fn heads(&self, states: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let raw = self.net.predict(states)?;
        let (means, log_stds, _) = gaussian::split_heads(raw.view(), self.latent_dim);
        Ok((means, log_stds))
    }

    /// Train-mode heads with the forward cache and clamp mask, for the
    /// inner gradient loops.
    pub(crate) fn heads_cached(
        &mut self,
        states: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, ForwardCache)> {
        let (raw, cache) = self.net.forward(states)?;
        let (means, log_stds, mask) = gaussian::split_heads(raw.view(), self.latent_dim);
        Ok((means, log_stds, mask, cache))
    }

    /// Samples one latent action for a single state.
    pub fn sample(&self, state: &Array1<f64>, rng: &mut Rng) -> Result<Array1<f64>> {
        let batch = state.clone().insert_axis(ndarray::Axis(0));
        let (means, log_stds) = self.heads(&batch)?;
        let noise = rng.normal_array1(self.latent_dim);
        let mut alpha = Array1::zeros(self.latent_dim);
        for j in 0..self.latent_dim {
            alpha[j] = means[[0, j]] + log_stds[[0, j]].exp() * noise[j];
        }
        Ok(alpha)
    }

    /// Per-row log density of `latents` under the policy at `states`.
    pub fn log_prob(&self, states: &Array2<f64>, latents: &Array2<f64>) -> Result<Array1<f64>> {
        let (means, log_stds) = self.heads(states)?;
        Ok(gaussian::log_prob_rows(&means, &log_stds, latents))
    }
}

/// Value baseline: end state -> scalar expected reward.
pub fn build_value_net(state_dim: usize, hidden: &[usize], rng: &mut Rng) -> DenseNet {
    let mut dims = vec![state_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    DenseNet::mlp(&dims, Activation::Tanh, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_prob_matches_numeric_density() {
        let mut rng = Rng::new(3);
        let policy = PolicyNet::new(3, 2, &[8], &mut rng);
        let states = rng.normal_array2(5, 3);
        let latents = rng.normal_array2(5, 2);
        let lp = policy.log_prob(&states, &latents).unwrap();
        let (means, log_stds) = policy.heads(&states).unwrap();
        for r in 0..5 {
            let mut density = 1.0;
            for j in 0..2 {
                let s = log_stds[[r, j]].exp();
                let z = (latents[[r, j]] - means[[r, j]]) / s;
                density *= (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            }
            assert!((lp[r] - density.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut rng = Rng::new(4);
        let policy = PolicyNet::new(3, 2, &[8], &mut rng);
        let state = Array1::from(vec![0.1, 1.2, 1.5]);
        let a = policy.sample(&state, &mut Rng::new(9)).unwrap();
        let b = policy.sample(&state, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
