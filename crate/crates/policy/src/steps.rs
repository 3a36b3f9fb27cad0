use crate::error::Result;
use crate::net::PolicyNet;
use crate::rollout::RolloutBatch;
use lplab_substrate::{adam_step_net, gaussian, AdamState, DenseNet};
use ndarray::{Array1, Array2};

/// Importance ratios above this are clipped (and their gradient dropped).
pub const RATIO_CLIP: f64 = 1e3;

/// Global gradient-norm ceiling for the E/M gradient loops; a single noisy
/// batch must not be able to throw the policy out of the trust region.
pub const MAX_GRAD_NORM: f64 = 50.0;

fn clip_grad_norm(grads: &mut [f64]) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > MAX_GRAD_NORM {
        let scale = MAX_GRAD_NORM / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
}

/// Per-row pieces of the E-step surrogate: clipped importance ratio and
/// KL(q || pi), both summed over latent dimensions.
fn surrogate_rows(
    q_means: &Array2<f64>,
    q_log_stds: &Array2<f64>,
    pi_means: &Array2<f64>,
    pi_log_stds: &Array2<f64>,
    latents: &Array2<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let log_q = gaussian::log_prob_rows(q_means, q_log_stds, latents);
    let log_pi = gaussian::log_prob_rows(pi_means, pi_log_stds, latents);
    let ratios = Array1::from_shape_fn(log_q.len(), |i| {
        (log_q[i] - log_pi[i]).exp().min(RATIO_CLIP)
    });
    let kls = gaussian::kl_rows(q_means, q_log_stds, pi_means, pi_log_stds);
    (ratios, kls)
}

/// E-step surrogate on a batch:
/// (1/N) sum_i [ q(a_i|s_i)/pi(a_i|s_i) * A_i - KL(q(.|s_i) || pi(.|s_i)) ].
pub fn surrogate_objective(
    q: &PolicyNet,
    pi: &PolicyNet,
    batch: &RolloutBatch,
) -> Result<f64> {
    let (q_means, q_log_stds) = q.heads(&batch.states)?;
    let (pi_means, pi_log_stds) = pi.heads(&batch.states)?;
    let (ratios, kls) = surrogate_rows(&q_means, &q_log_stds, &pi_means, &pi_log_stds, &batch.latents);
    let n = batch.len() as f64;
    let mut acc = 0.0;
    for i in 0..batch.len() {
        acc += ratios[i] * batch.advantages[i] - kls[i];
    }
    Ok(acc / n)
}

/// Gradient ascent of the variational policy on the trust-region
/// surrogate; the main policy stays frozen. Ascent stops early once mean
/// KL(q || pi) exceeds `kl_limit`, which keeps the importance ratios in a
/// regime where the surrogate is trustworthy. Returns the objective value
/// after each inner iteration.
pub fn e_step(
    q: &mut PolicyNet,
    pi: &PolicyNet,
    batch: &RolloutBatch,
    iters: usize,
    lr: f64,
    kl_limit: f64,
) -> Result<Vec<f64>> {
    let n = batch.len();
    let nf = n as f64;
    let k = q.latent_dim;
    let (pi_means, pi_log_stds) = pi.heads(&batch.states)?;
    let pi_vars = pi_log_stds.mapv(|v| (2.0 * v).exp());

    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let (q_means, q_log_stds, mask, cache) = q.heads_cached(&batch.states)?;
        let q_stds = q_log_stds.mapv(f64::exp);
        let (ratios, kls) =
            surrogate_rows(&q_means, &q_log_stds, &pi_means, &pi_log_stds, &batch.latents);

        let mut objective = 0.0;
        let mut d_means = Array2::zeros((n, k));
        let mut d_log_stds = Array2::zeros((n, k));
        for i in 0..n {
            let a = batch.advantages[i];
            objective += ratios[i] * a - kls[i];
            let clipped = ratios[i] >= RATIO_CLIP;
            for j in 0..k {
                let sq = q_stds[[i, j]];
                let z = (batch.latents[[i, j]] - q_means[[i, j]]) / sq;
                // Ascent gradient of the surrogate; the ratio's gradient is
                // ratio * grad(log q), dropped entirely when clipped.
                let (mut gm, mut gs) = (0.0, 0.0);
                if !clipped {
                    gm += ratios[i] * a * z / sq;
                    gs += ratios[i] * a * (z * z - 1.0);
                }
                gm -= (q_means[[i, j]] - pi_means[[i, j]]) / pi_vars[[i, j]];
                gs -= sq * sq / pi_vars[[i, j]] - 1.0;
                d_means[[i, j]] = gm / nf;
                d_log_stds[[i, j]] = gs / nf;
            }
        }
        trace.push(objective / nf);

        let d_raw = gaussian::merge_head_grads(&d_means, &d_log_stds, &mask);
        let (mut grads, _) = q.net.backward(&cache, &d_raw);
        clip_grad_norm(&mut grads);
        let before = q.net.params_flat();

        // Backtracking step: halve the step size until the update stays
        // inside the trust region; give up once the step is negligible.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut params = before.clone();
            for (p, g) in params.iter_mut().zip(&grads) {
                *p += lr * scale * g;
            }
            q.net.set_params_flat(&params);
            if mean_kl(q, pi, &batch.states)? <= kl_limit {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            q.net.set_params_flat(&before);
            break;
        }
    }
    Ok(trace)
}

/// Mean KL(q(.|s) || pi(.|s)) over a batch of states.
pub fn mean_kl(q: &PolicyNet, pi: &PolicyNet, states: &Array2<f64>) -> Result<f64> {
    let (q_means, q_log_stds) = q.heads(states)?;
    let (pi_means, pi_log_stds) = pi.heads(states)?;
    let kls = gaussian::kl_rows(&q_means, &q_log_stds, &pi_means, &pi_log_stds);
    Ok(kls.sum() / states.nrows() as f64)
}

/// Projects the main policy onto the variational policy by Adam descent on
/// mean KL(q || pi); the variational policy stays frozen. Returns the loss
/// after each iteration.
pub fn m_step(
    pi: &mut PolicyNet,
    q: &PolicyNet,
    states: &Array2<f64>,
    iters: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let n = states.nrows();
    let nf = n as f64;
    let k = pi.latent_dim;
    let (q_means, q_log_stds) = q.heads(states)?;
    let q_vars = q_log_stds.mapv(|v| (2.0 * v).exp());

    let mut adam = AdamState::new(pi.net.param_count());
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let (pi_means, pi_log_stds, mask, cache) = pi.heads_cached(states)?;
        let kls = gaussian::kl_rows(&q_means, &q_log_stds, &pi_means, &pi_log_stds);
        trace.push(kls.sum() / nf);

        let mut d_means = Array2::zeros((n, k));
        let mut d_log_stds = Array2::zeros((n, k));
        for i in 0..n {
            for j in 0..k {
                let vp = (2.0 * pi_log_stds[[i, j]]).exp();
                let dm = pi_means[[i, j]] - q_means[[i, j]];
                d_means[[i, j]] = dm / vp / nf;
                d_log_stds[[i, j]] = (1.0 - (q_vars[[i, j]] + dm * dm) / vp) / nf;
            }
        }
        let d_raw = gaussian::merge_head_grads(&d_means, &d_log_stds, &mask);
        let (mut grads, _) = pi.net.backward(&cache, &d_raw);
        clip_grad_norm(&mut grads);
        adam_step_net(&mut pi.net, &grads, &mut adam, lr)?;
    }
    Ok(trace)
}

/// Fits the value baseline by MSE regression of rewards on states.
/// Returns the loss after each Adam iteration on the full batch.
pub fn fit_value(
    value: &mut DenseNet,
    states: &Array2<f64>,
    rewards: &Array1<f64>,
    iters: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let n = states.nrows() as f64;
    let mut adam = AdamState::new(value.param_count());
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let (out, cache) = value.forward(states)?;
        let mut loss = 0.0;
        let mut d_out = Array2::zeros(out.raw_dim());
        for i in 0..states.nrows() {
            let err = out[[i, 0]] - rewards[i];
            loss += err * err;
            d_out[[i, 0]] = 2.0 * err / n;
        }
        trace.push(loss / n);
        let (grads, _) = value.backward(&cache, &d_out);
        adam_step_net(value, &grads, &mut adam, lr)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::build_value_net;
    use lplab_substrate::Rng;

    fn synthetic_batch(
        rng: &mut Rng,
        policy: &PolicyNet,
        n: usize,
        advantage: impl Fn(usize) -> f64,
    ) -> RolloutBatch {
        let states = rng.normal_array2(n, 3);
        let mut latents = Array2::zeros((n, policy.latent_dim));
        for i in 0..n {
            let s = states.row(i).to_owned();
            let a = policy.sample(&s, rng).unwrap();
            latents.row_mut(i).assign(&a);
        }
        let advantages = Array1::from_shape_fn(n, &advantage);
        let rewards = advantages.clone();
        RolloutBatch {
            states,
            latents,
            trajectories: Vec::new(),
            rewards,
            advantages,
            failed: vec![false; n],
        }
    }

    #[test]
    fn surrogate_at_q_equals_pi_is_mean_advantage() {
        let mut rng = Rng::new(11);
        let pi = PolicyNet::new(3, 2, &[16], &mut rng);
        let q = pi.clone();
        let batch = synthetic_batch(&mut rng, &pi, 24, |i| (i as f64) * 0.1 - 1.0);
        let obj = surrogate_objective(&q, &pi, &batch).unwrap();
        let mean_a = batch.advantages.sum() / batch.len() as f64;
        assert!((obj - mean_a).abs() < 1e-12);
    }

    #[test]
    fn zero_advantage_keeps_q_near_pi() {
        let mut rng = Rng::new(12);
        let pi = PolicyNet::new(3, 2, &[16], &mut rng);
        let mut q = pi.clone();
        let batch = synthetic_batch(&mut rng, &pi, 24, |_| 0.0);
        e_step(&mut q, &pi, &batch, 50, 1e-3, f64::INFINITY).unwrap();
        let kl = mean_kl(&q, &pi, &batch.states).unwrap();
        assert!(kl < 1e-6, "KL grew to {kl}");
    }

    #[test]
    fn q_mean_moves_toward_positive_advantage() {
        let mut rng = Rng::new(13);
        let pi = PolicyNet::new(3, 1, &[16], &mut rng);
        let mut q = pi.clone();

        // One state, two latent samples with opposite advantages.
        let state = rng.normal_array1(3);
        let mut states = Array2::zeros((2, 3));
        states.row_mut(0).assign(&state);
        states.row_mut(1).assign(&state);
        let (mu, ls) = pi.heads(&states).unwrap();
        let sigma = ls[[0, 0]].exp();
        let latents = ndarray::array![[mu[[0, 0]] + sigma], [mu[[0, 0]] - sigma]];
        let batch = RolloutBatch {
            states: states.clone(),
            latents,
            trajectories: Vec::new(),
            rewards: Array1::from(vec![1.0, 0.0]),
            advantages: Array1::from(vec![1.0, -1.0]),
            failed: vec![false; 2],
        };
        e_step(&mut q, &pi, &batch, 50, 1e-3, f64::INFINITY).unwrap();
        let (q_mu, _) = q.heads(&states).unwrap();
        assert!(
            q_mu[[0, 0]] > mu[[0, 0]],
            "mean moved {} -> {}",
            mu[[0, 0]],
            q_mu[[0, 0]]
        );
    }

    #[test]
    fn e_step_objective_is_monotone_for_small_lr() {
        let mut rng = Rng::new(14);
        let pi = PolicyNet::new(3, 2, &[16], &mut rng);
        let mut q = pi.clone();
        let batch = synthetic_batch(&mut rng, &pi, 32, |i| if i % 2 == 0 { 0.8 } else { -0.3 });
        let trace = e_step(&mut q, &pi, &batch, 50, 1e-3, f64::INFINITY).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective dipped: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn m_step_is_a_no_op_when_already_matched() {
        let mut rng = Rng::new(15);
        let mut pi = PolicyNet::new(3, 2, &[16], &mut rng);
        let q = pi.clone();
        let states = rng.normal_array2(16, 3);
        let before = pi.net.params_flat();
        let trace = m_step(&mut pi, &q, &states, 10, 1e-3).unwrap();
        assert!(trace.iter().all(|&v| v.abs() < 1e-12));
        let after = pi.net.params_flat();
        assert_eq!(before, after);
    }

    #[test]
    fn m_step_descends_and_converges() {
        let mut rng = Rng::new(16);
        let mut pi = PolicyNet::new(3, 2, &[16], &mut rng);
        let mut q = pi.clone();
        // Perturb q so there is something to project back.
        let params: Vec<f64> = q
            .net
            .params_flat()
            .iter()
            .enumerate()
            .map(|(i, p)| p + if i % 3 == 0 { 0.05 } else { -0.02 })
            .collect();
        q.net.set_params_flat(&params);

        let states = rng.normal_array2(32, 3);
        let trace = m_step(&mut pi, &q, &states, 100, 1e-3).unwrap();
        // Adam may bounce between steps; demand that no bounce undoes a
        // meaningful fraction of the starting KL and that the overall
        // trend is a clear descent.
        let mut worst_rise = 0.0f64;
        for w in trace.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
        assert!(worst_rise < 0.02 * trace[0], "KL rose by {worst_rise}");
        assert!(trace[trace.len() - 1] < 0.5 * trace[0]);

        let trace2 = m_step(&mut pi, &q, &states, 300, 1e-2).unwrap();
        let final_kl = *trace2.last().unwrap();
        assert!(final_kl < 0.01, "KL(q||pi) stuck at {final_kl}");
    }

    #[test]
    fn value_fits_constant_rewards() {
        let mut rng = Rng::new(17);
        let mut value = build_value_net(3, &[16], &mut rng);
        let states = rng.normal_array2(48, 3);
        let rewards = Array1::from_elem(48, 0.37);
        let trace = fit_value(&mut value, &states, &rewards, 400, 1e-2).unwrap();
        assert!(*trace.last().unwrap() < 1e-4, "mse {}", trace.last().unwrap());
    }

    #[test]
    fn value_mse_is_non_increasing() {
        let mut rng = Rng::new(18);
        let mut value = build_value_net(3, &[16], &mut rng);
        let states = rng.normal_array2(48, 3);
        let rewards = Array1::from_shape_fn(48, |i| (i as f64 * 0.7).sin() * 0.5 + 0.5);
        let trace = fit_value(&mut value, &states, &rewards, 60, 1e-3).unwrap();
        let mut worst_rise = 0.0f64;
        for w in trace.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
        // Adam allows microscopic bounces; nothing material.
        assert!(worst_rise < 1e-5, "loss rose by {worst_rise}");
    }

    #[test]
    fn value_matches_linear_regression_oracle() {
        let mut rng = Rng::new(19);
        let mut value = build_value_net(3, &[32], &mut rng);
        let states = rng.normal_array2(300, 3);
        let w = [0.4, -0.2, 0.1];
        let rewards = Array1::from_shape_fn(300, |i| {
            0.5 + w[0] * states[[i, 0]] + w[1] * states[[i, 1]] + w[2] * states[[i, 2]]
        });
        fit_value(&mut value, &states, &rewards, 3000, 1e-2).unwrap();

        // Closed-form least squares on the same design.
        let preds = value.predict(&states).unwrap();
        let mut sse = 0.0;
        let mut var = 0.0;
        let mean_r = rewards.sum() / 300.0;
        for i in 0..300 {
            sse += (preds[[i, 0]] - rewards[i]).powi(2);
            var += (rewards[i] - mean_r).powi(2);
        }
        // Exact linear data: the oracle residual is 0, so demand the net
        // explain at least 95% of the variance.
        assert!(sse / var < 0.05, "residual fraction {}", sse / var);
    }
}
