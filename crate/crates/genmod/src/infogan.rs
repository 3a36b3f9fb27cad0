use crate::error::{GenModError, Result};
use crate::model::{sample_prior_vector, GenerativeModel, ModelKind, Normalization, Prior};
use lplab_arm::{ArmConfig, DatasetRecord};
use lplab_substrate::{adam_step_net, AdamState, Activation, DenseNet, LayerSpec, Rng};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.8378770664093453;

/// Training settings for the InfoGAN.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfoGanConfig {
    pub latent_dim: usize,
    /// Weight of the mutual-information (Q) term in the generator loss.
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub generator_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    pub q_hidden: usize,
}

impl InfoGanConfig {
    pub fn new(latent_dim: usize, lambda: f64) -> Self {
        InfoGanConfig {
            latent_dim,
            lambda,
            epochs: 400,
            batch_size: 128,
            learning_rate: 2e-4,
            generator_hidden: vec![32, 64],
            trunk_hidden: vec![64, 32],
            q_hidden: 16,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(GenModError::InvalidConfig("latent_dim must be > 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(GenModError::InvalidConfig(
                "lambda must be non-negative".into(),
            ));
        }
        if self.batch_size < 2 {
            return Err(GenModError::InvalidConfig(
                "batch_size must be at least 2".into(),
            ));
        }
        if self.trunk_hidden.is_empty() {
            return Err(GenModError::InvalidConfig(
                "trunk needs at least one layer".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch training log entry (batch-averaged).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GanEpochLoss {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub i_loss: f64,
    pub m_loss: f64,
}

/// Discriminator/Q-side training state: one shared trunk with a
/// discriminator head and a Q head on top of it.
#[derive(Debug)]
pub struct InfoGanTrainState {
    pub trunk: DenseNet,
    /// Discriminator logit head; D(x) = sigmoid(logit).
    pub d_head: DenseNet,
    /// Q head predicting the latent mean with fixed unit variance.
    pub q_head: DenseNet,
    pub lambda: f64,
    pub history: Vec<GanEpochLoss>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanLosses {
    pub d_loss: f64,
    pub g_loss: f64,
    pub i_loss: f64,
    pub m_loss: f64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct DStep {
    d_loss: f64,
    trunk_grads: Vec<f64>,
    head_grads: Vec<f64>,
}

/// Discriminator pass on one real and one fake batch. Losses are computed
/// on logits with softplus for stability; the reported value equals
/// -[log D(real) + log(1 - D(fake))] batch-mean.
fn d_step(
    trunk: &mut DenseNet,
    d_head: &mut DenseNet,
    real: &Array2<f64>,
    fake: &Array2<f64>,
) -> Result<DStep> {
    let b_real = real.nrows() as f64;
    let b_fake = fake.nrows() as f64;

    let (h_real, trunk_cache_real) = trunk.forward(real)?;
    let (s_real, head_cache_real) = d_head.forward(&h_real)?;
    let (h_fake, trunk_cache_fake) = trunk.forward(fake)?;
    let (s_fake, head_cache_fake) = d_head.forward(&h_fake)?;

    let d_loss = s_real.iter().map(|&s| softplus(-s)).sum::<f64>() / b_real
        + s_fake.iter().map(|&s| softplus(s)).sum::<f64>() / b_fake;

    let grad_s_real = s_real.mapv(|s| (sigmoid(s) - 1.0) / b_real);
    let grad_s_fake = s_fake.mapv(|s| sigmoid(s) / b_fake);

    let (head_grads_real, dh_real) = d_head.backward(&head_cache_real, &grad_s_real);
    let (head_grads_fake, dh_fake) = d_head.backward(&head_cache_fake, &grad_s_fake);
    let (trunk_grads_real, _) = trunk.backward(&trunk_cache_real, &dh_real);
    let (trunk_grads_fake, _) = trunk.backward(&trunk_cache_fake, &dh_fake);

    let head_grads: Vec<f64> = head_grads_real
        .iter()
        .zip(&head_grads_fake)
        .map(|(a, b)| a + b)
        .collect();
    let trunk_grads: Vec<f64> = trunk_grads_real
        .iter()
        .zip(&trunk_grads_fake)
        .map(|(a, b)| a + b)
        .collect();

    Ok(DStep {
        d_loss,
        trunk_grads,
        head_grads,
    })
}

struct GStep {
    g_loss: f64,
    i_loss: f64,
    m_loss: f64,
    gen_grads: Vec<f64>,
    q_grads: Vec<f64>,
    /// Trunk gradient of the lambda-weighted information term; the
    /// generator-side adversarial term must not move the discriminator.
    trunk_grads: Vec<f64>,
}

/// Generator/Q pass: m_loss = -log D(fake) + lambda * Gaussian NLL of the
/// latent code under the Q head (unit variance).
fn g_step(
    generator: &mut DenseNet,
    trunk: &mut DenseNet,
    d_head: &mut DenseNet,
    q_head: &mut DenseNet,
    alpha: &Array2<f64>,
    lambda: f64,
) -> Result<GStep> {
    let b = alpha.nrows() as f64;
    let k = alpha.ncols() as f64;

    let (fake, gen_cache) = generator.forward(alpha)?;
    let (h, trunk_cache) = trunk.forward(&fake)?;
    let (s, head_cache) = d_head.forward(&h)?;
    let (q, q_cache) = q_head.forward(&h)?;

    let g_loss = s.iter().map(|&v| softplus(-v)).sum::<f64>() / b;
    let resid = &q - alpha;
    let i_loss = 0.5 * resid.iter().map(|v| v * v).sum::<f64>() / b + 0.5 * k * LN_2PI;
    let m_loss = g_loss + lambda * i_loss;

    let grad_s = s.mapv(|v| (sigmoid(v) - 1.0) / b);
    let (_, dh_adv) = d_head.backward(&head_cache, &grad_s);
    let (_, dfake_adv) = trunk.backward(&trunk_cache, &dh_adv);

    let grad_q = resid.mapv(|v| lambda * v / b);
    let (q_grads, dh_info) = q_head.backward(&q_cache, &grad_q);
    let (trunk_grads, dfake_info) = trunk.backward(&trunk_cache, &dh_info);

    let (gen_grads, _) = generator.backward(&gen_cache, &(&dfake_adv + &dfake_info));

    Ok(GStep {
        g_loss,
        i_loss,
        m_loss,
        gen_grads,
        q_grads,
        trunk_grads,
    })
}

/// All four InfoGAN losses on one normalized real batch, with fresh prior
/// codes drawn from `rng`. Train-mode forwards, so generator batch-norm
/// statistics advance.
pub fn infogan_losses(
    state: &mut InfoGanTrainState,
    generator: &mut DenseNet,
    real_batch: ArrayView2<f64>,
    rng: &mut Rng,
) -> Result<GanLosses> {
    let k = generator.input_dim();
    let b = real_batch.nrows();
    let mut alpha = Array2::zeros((b, k));
    for mut row in alpha.rows_mut() {
        row.assign(&sample_prior_vector(Prior::UniformUnit, k, rng));
    }
    let (fake, _) = generator.forward(&alpha)?;
    let d = d_step(&mut state.trunk, &mut state.d_head, &real_batch.to_owned(), &fake)?;
    let g = g_step(
        generator,
        &mut state.trunk,
        &mut state.d_head,
        &mut state.q_head,
        &alpha,
        state.lambda,
    )?;
    Ok(GanLosses {
        d_loss: d.d_loss,
        g_loss: g.g_loss,
        i_loss: g.i_loss,
        m_loss: g.m_loss,
    })
}

fn build_generator(cfg: &InfoGanConfig, output_dim: usize, rng: &mut Rng) -> DenseNet {
    let mut specs = Vec::new();
    let mut prev = cfg.latent_dim;
    for &hdim in &cfg.generator_hidden {
        specs.push(LayerSpec {
            in_dim: prev,
            out_dim: hdim,
            activation: Activation::Relu,
            batch_norm: true,
        });
        prev = hdim;
    }
    specs.push(LayerSpec {
        in_dim: prev,
        out_dim: output_dim,
        activation: Activation::Identity,
        batch_norm: false,
    });
    DenseNet::new(&specs, 0.9, rng)
}

fn build_trunk(cfg: &InfoGanConfig, input_dim: usize, rng: &mut Rng) -> DenseNet {
    let mut specs = Vec::new();
    let mut prev = input_dim;
    for &hdim in &cfg.trunk_hidden {
        specs.push(LayerSpec {
            in_dim: prev,
            out_dim: hdim,
            activation: Activation::Relu,
            batch_norm: false,
        });
        prev = hdim;
    }
    DenseNet::new(&specs, 0.9, rng)
}

fn build_d_head(trunk_out: usize, rng: &mut Rng) -> DenseNet {
    DenseNet::new(
        &[LayerSpec {
            in_dim: trunk_out,
            out_dim: 1,
            activation: Activation::Identity,
            batch_norm: false,
        }],
        0.9,
        rng,
    )
}

fn build_q_head(cfg: &InfoGanConfig, trunk_out: usize, rng: &mut Rng) -> DenseNet {
    DenseNet::new(
        &[
            LayerSpec {
                in_dim: trunk_out,
                out_dim: cfg.q_hidden,
                activation: Activation::Relu,
                batch_norm: false,
            },
            LayerSpec {
                in_dim: cfg.q_hidden,
                out_dim: cfg.latent_dim,
                activation: Activation::Identity,
                batch_norm: false,
            },
        ],
        0.9,
        rng,
    )
}

/// Trains the InfoGAN with alternating 1:1 discriminator and generator+Q
/// updates on the trajectory dataset.
pub fn train_infogan(
    records: &[DatasetRecord],
    arm_cfg: &ArmConfig,
    cfg: &InfoGanConfig,
    rng: &Rng,
) -> Result<(GenerativeModel, InfoGanTrainState)> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(GenModError::EmptyDataset);
    }
    let normalization = Normalization::fit(records)?;
    let data = normalization.normalize_records(records);
    let n = data.nrows();
    let dim = data.ncols();

    let mut generator = build_generator(cfg, dim, &mut rng.derive("gan-generator-init"));
    let mut trunk = build_trunk(cfg, dim, &mut rng.derive("gan-trunk-init"));
    let trunk_out = *cfg.trunk_hidden.last().unwrap();
    let mut d_head = build_d_head(trunk_out, &mut rng.derive("gan-dhead-init"));
    let mut q_head = build_q_head(cfg, trunk_out, &mut rng.derive("gan-qhead-init"));

    let mut gen_adam = AdamState::new(generator.param_count());
    let mut trunk_adam = AdamState::new(trunk.param_count());
    let mut d_adam = AdamState::new(d_head.param_count());
    let mut q_adam = AdamState::new(q_head.param_count());
    let mut train_rng = rng.derive("gan-train");

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        train_rng.shuffle(&mut order);
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let real = data.select(Axis(0), chunk);
            let b = chunk.len();
            let k = cfg.latent_dim;

            // Discriminator update on a throwaway fake batch.
            let mut alpha_d = Array2::zeros((b, k));
            for mut row in alpha_d.rows_mut() {
                row.assign(&sample_prior_vector(Prior::UniformUnit, k, &mut train_rng));
            }
            let (fake_d, _) = generator.forward(&alpha_d)?;
            let d = d_step(&mut trunk, &mut d_head, &real, &fake_d)?;
            adam_step_net(&mut trunk, &d.trunk_grads, &mut trunk_adam, cfg.learning_rate)?;
            adam_step_net(&mut d_head, &d.head_grads, &mut d_adam, cfg.learning_rate)?;

            // Generator + Q update on fresh codes.
            let mut alpha_g = Array2::zeros((b, k));
            for mut row in alpha_g.rows_mut() {
                row.assign(&sample_prior_vector(Prior::UniformUnit, k, &mut train_rng));
            }
            let g = g_step(
                &mut generator,
                &mut trunk,
                &mut d_head,
                &mut q_head,
                &alpha_g,
                cfg.lambda,
            )?;
            if !(d.d_loss.is_finite() && g.m_loss.is_finite()) {
                return Err(GenModError::NonFiniteLoss {
                    epoch,
                    detail: format!("d_loss {} m_loss {}", d.d_loss, g.m_loss),
                });
            }
            adam_step_net(&mut generator, &g.gen_grads, &mut gen_adam, cfg.learning_rate)?;
            adam_step_net(&mut q_head, &g.q_grads, &mut q_adam, cfg.learning_rate)?;
            adam_step_net(&mut trunk, &g.trunk_grads, &mut trunk_adam, cfg.learning_rate)?;

            sums[0] += d.d_loss;
            sums[1] += g.g_loss;
            sums[2] += g.i_loss;
            sums[3] += g.m_loss;
            batches += 1;
        }
        history.push(GanEpochLoss {
            epoch: epoch + 1,
            d_loss: sums[0] / batches as f64,
            g_loss: sums[1] / batches as f64,
            i_loss: sums[2] / batches as f64,
            m_loss: sums[3] / batches as f64,
        });
    }

    let state = InfoGanTrainState {
        trunk,
        d_head,
        q_head,
        lambda: cfg.lambda,
        history,
    };
    let model = GenerativeModel::new(
        ModelKind::InfoGan,
        cfg.latent_dim,
        generator,
        normalization,
        arm_cfg.t,
        arm_cfg.m,
        arm_cfg.joint_velocity_limit,
    );
    Ok((model, state))
}

/// Classifier accuracy of the trained discriminator on held-out real rows
/// vs freshly generated fakes (eval mode throughout).
pub fn discriminator_accuracy(
    state: &InfoGanTrainState,
    model: &GenerativeModel,
    real_rows: ArrayView2<f64>,
    rng: &mut Rng,
) -> Result<f64> {
    let b = real_rows.nrows();
    let k = model.latent_dim;
    let mut alpha = Array2::zeros((b, k));
    for mut row in alpha.rows_mut() {
        row.assign(&sample_prior_vector(Prior::UniformUnit, k, rng));
    }
    let fake = model.decoder.predict(&alpha)?;
    let s_real = state.d_head.predict(&state.trunk.predict(&real_rows.to_owned())?)?;
    let s_fake = state.d_head.predict(&state.trunk.predict(&fake)?)?;
    let hits = s_real.iter().filter(|&&s| s > 0.0).count()
        + s_fake.iter().filter(|&&s| s <= 0.0).count();
    Ok(hits as f64 / (2 * b) as f64)
}
