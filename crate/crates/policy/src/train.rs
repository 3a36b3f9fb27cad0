use crate::error::{PolicyError, Result};
use crate::net::{build_value_net, PolicyNet};
use crate::rollout::{collect_rollouts, LatentDecoder};
use crate::steps::{e_step, fit_value, m_step, mean_kl};
use lplab_arm::{ArmConfig, SUCCESS_THRESHOLD};
use lplab_substrate::{DenseNet, Rng};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// EM training settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmConfig {
    pub outer_iters: usize,
    /// Rollouts per outer iteration.
    pub rollouts: usize,
    pub e_iters: usize,
    pub e_lr: f64,
    /// Trust-region bound: the E-step stops once mean KL(q || pi) passes it.
    pub e_kl_limit: f64,
    /// Final trust-region bound; the limit decays geometrically from
    /// `e_kl_limit` to this over the run, shrinking late-phase jitter.
    pub e_kl_final: f64,
    pub m_iters: usize,
    pub m_lr: f64,
    pub value_iters: usize,
    pub value_lr: f64,
    pub hidden: Vec<usize>,
    /// Initial log standard deviation of the exploration policy.
    pub init_log_std: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            outer_iters: 200,
            rollouts: 256,
            e_iters: 30,
            e_lr: 1e-2,
            e_kl_limit: 0.1,
            e_kl_final: 0.005,
            m_iters: 60,
            m_lr: 1e-2,
            value_iters: 100,
            value_lr: 1e-2,
            hidden: vec![64, 64],
            init_log_std: -1.0,
        }
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    /// Fraction of rollouts with reward >= the success threshold.
    pub success_rate: f64,
    pub mean_kl: f64,
}

/// Training curve plus the label used by the correlation analysis: the
/// maximum per-iteration mean reward.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub rows: Vec<CurveRow>,
    pub max_mean_reward: f64,
}

impl TrainingCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "iteration,mean_reward,std_reward,success_rate,mean_kl")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{},{},{},{}",
                r.iteration, r.mean_reward, r.std_reward, r.success_rate, r.mean_kl
            )?;
        }
        Ok(())
    }
}

/// Full EM loop: collect rollouts from the policy, reset the variational
/// policy to the current policy, ascend the E-step surrogate, project back
/// in the M-step, and refit the value baseline.
pub fn train_em<D: LatentDecoder + ?Sized>(
    decoder: &D,
    arm_cfg: &ArmConfig,
    cfg: &EmConfig,
    rng: &Rng,
) -> Result<(PolicyNet, DenseNet, TrainingCurve)> {
    if cfg.outer_iters == 0 || cfg.rollouts == 0 {
        return Err(PolicyError::InvalidConfig(
            "outer_iters and rollouts must be positive".into(),
        ));
    }
    let k = decoder.latent_dim();
    let mut pi = PolicyNet::new(3, k, &cfg.hidden, &mut rng.derive("policy-init"));
    pi.set_initial_log_std(cfg.init_log_std);
    let mut value = build_value_net(3, &cfg.hidden, &mut rng.derive("value-init"));

    let mut rows = Vec::with_capacity(cfg.outer_iters);
    let mut max_mean_reward = f64::NEG_INFINITY;
    for iter in 0..cfg.outer_iters {
        let batch = collect_rollouts(
            &pi,
            decoder,
            &value,
            arm_cfg,
            cfg.rollouts,
            &rng.derive("collect").derive_index(iter as u64),
        )?;

        let n = batch.len() as f64;
        let mean_reward = batch.rewards.sum() / n;
        let std_reward = (batch
            .rewards
            .iter()
            .map(|r| (r - mean_reward).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let success_rate = batch
            .rewards
            .iter()
            .filter(|&&r| r >= SUCCESS_THRESHOLD)
            .count() as f64
            / n;
        if !mean_reward.is_finite() {
            return Err(PolicyError::NonFinite {
                iteration: iter,
                detail: format!("mean reward {mean_reward}"),
            });
        }

        // Standardize advantages so the E-step gradient scale does not
        // depend on the (often tiny) raw reward spread.
        let mut batch = batch;
        let adv_mean = batch.advantages.sum() / n;
        let adv_std = (batch
            .advantages
            .iter()
            .map(|a| (a - adv_mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        batch
            .advantages
            .mapv_inplace(|a| (a - adv_mean) / (adv_std + 1e-8));

        let kl_limit = if cfg.outer_iters > 1 {
            let frac = iter as f64 / (cfg.outer_iters - 1) as f64;
            cfg.e_kl_limit * (cfg.e_kl_final / cfg.e_kl_limit).powf(frac)
        } else {
            cfg.e_kl_limit
        };
        let mut q = pi.clone();
        e_step(&mut q, &pi, &batch, cfg.e_iters, cfg.e_lr, kl_limit)?;
        m_step(&mut pi, &q, &batch.states, cfg.m_iters, cfg.m_lr)?;
        let kl = mean_kl(&q, &pi, &batch.states)?;
        fit_value(
            &mut value,
            &batch.states,
            &batch.rewards,
            cfg.value_iters,
            cfg.value_lr,
        )?;

        max_mean_reward = max_mean_reward.max(mean_reward);
        rows.push(CurveRow {
            iteration: iter + 1,
            mean_reward,
            std_reward,
            success_rate,
            mean_kl: kl,
        });
    }

    Ok((
        pi,
        value,
        TrainingCurve {
            rows,
            max_mean_reward,
        },
    ))
}
