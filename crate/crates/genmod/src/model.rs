use crate::error::{GenModError, Result};
use lplab_arm::{DatasetRecord, Trajectory};
use lplab_metrics::LatentSpace;
use lplab_substrate::{checkpoint, DenseNet, Rng};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Vae,
    InfoGan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    StandardNormal,
    UniformUnit,
}

impl ModelKind {
    /// Each model family is tied to one latent prior.
    pub fn prior(self) -> Prior {
        match self {
            ModelKind::Vae => Prior::StandardNormal,
            ModelKind::InfoGan => Prior::UniformUnit,
        }
    }
}

/// Per-channel (joint) standardization constants of the training set,
/// stored with the model so decoding can map back to physical units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Fits mean and standard deviation per joint over all records and
    /// timesteps. Degenerate channels keep a unit scale.
    pub fn fit(records: &[DatasetRecord]) -> Result<Self> {
        let first = records.first().ok_or(GenModError::EmptyDataset)?;
        let joints = first.trajectory.joints();
        let mut mean = vec![0.0; joints];
        let mut count = 0usize;
        for rec in records {
            for row in rec.trajectory.velocities.rows() {
                for j in 0..joints {
                    mean[j] += row[j];
                }
            }
            count += rec.trajectory.steps();
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; joints];
        for rec in records {
            for row in rec.trajectory.velocities.rows() {
                for j in 0..joints {
                    let d = row[j] - mean[j];
                    var[j] += d * d;
                }
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 1e-9 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalization { mean, std })
    }

    /// Flattens and standardizes records into a (N, T*M) matrix, row-major
    /// over (timestep, joint).
    pub fn normalize_records(&self, records: &[DatasetRecord]) -> Array2<f64> {
        let steps = records[0].trajectory.steps();
        let joints = records[0].trajectory.joints();
        let mut out = Array2::zeros((records.len(), steps * joints));
        for (i, rec) in records.iter().enumerate() {
            for t in 0..steps {
                for j in 0..joints {
                    out[[i, t * joints + j]] =
                        (rec.trajectory.velocities[[t, j]] - self.mean[j]) / self.std[j];
                }
            }
        }
        out
    }

    pub fn denormalize_flat(&self, flat: &[f64], steps: usize, joints: usize) -> Array2<f64> {
        let mut vel = Array2::zeros((steps, joints));
        for t in 0..steps {
            for j in 0..joints {
                vel[[t, j]] = flat[t * joints + j] * self.std[j] + self.mean[j];
            }
        }
        vel
    }
}

/// A trained latent-variable trajectory generator.
#[derive(Debug)]
pub struct GenerativeModel {
    pub kind: ModelKind,
    pub latent_dim: usize,
    /// Decoder (VAE) or generator (InfoGAN): latent -> flattened normalized
    /// trajectory.
    pub decoder: DenseNet,
    pub prior: Prior,
    pub normalization: Normalization,
    pub steps: usize,
    pub joints: usize,
    pub velocity_limit: f64,
}

impl GenerativeModel {
    pub fn new(
        kind: ModelKind,
        latent_dim: usize,
        decoder: DenseNet,
        normalization: Normalization,
        steps: usize,
        joints: usize,
        velocity_limit: f64,
    ) -> Self {
        GenerativeModel {
            kind,
            latent_dim,
            decoder,
            prior: kind.prior(),
            normalization,
            steps,
            joints,
            velocity_limit,
        }
    }

    /// Deterministic eval-mode decode: de-normalized and clamped to the
    /// joint velocity limit.
    pub fn decode(&self, alpha: &Array1<f64>) -> Result<Trajectory> {
        if alpha.len() != self.latent_dim {
            return Err(GenModError::LatentDim {
                expected: self.latent_dim,
                got: alpha.len(),
            });
        }
        let input = alpha.clone().insert_axis(ndarray::Axis(0));
        let out = self.decoder.predict(&input)?;
        let flat: Vec<f64> = out.row(0).to_vec();
        let mut vel = self
            .normalization
            .denormalize_flat(&flat, self.steps, self.joints);
        let limit = self.velocity_limit;
        vel.mapv_inplace(|v| v.clamp(-limit, limit));
        Ok(Trajectory::new(vel))
    }

    /// Draws one latent vector from the model's prior.
    pub fn sample_latent(&self, rng: &mut Rng) -> Array1<f64> {
        sample_prior_vector(self.prior, self.latent_dim, rng)
    }

    /// Draws `count` iid prior samples.
    pub fn sample_prior(&self, count: usize, rng: &mut Rng) -> Vec<Array1<f64>> {
        (0..count).map(|_| self.sample_latent(rng)).collect()
    }
}

pub(crate) fn sample_prior_vector(prior: Prior, dim: usize, rng: &mut Rng) -> Array1<f64> {
    match prior {
        Prior::StandardNormal => rng.normal_array1(dim),
        Prior::UniformUnit => rng.uniform_array1(dim, -1.0, 1.0),
    }
}

impl LatentSpace for GenerativeModel {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn sample_prior(&self, rng: &mut Rng) -> Array1<f64> {
        self.sample_latent(rng)
    }

    fn decode(&self, alpha: &Array1<f64>) -> Array2<f64> {
        GenerativeModel::decode(self, alpha)
            .expect("latent dimension checked by caller")
            .velocities
    }
}

/// Sidecar metadata stored next to the decoder checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub latent_dim: usize,
    pub prior: Prior,
    pub steps: usize,
    pub joints: usize,
    pub velocity_limit: f64,
    pub normalization: Normalization,
    /// Family-specific fields: beta / lambda / thresholds / final losses.
    pub extra: serde_json::Value,
}

/// Writes the decoder in the substrate checkpoint format plus a JSON
/// sidecar (same path with a `.json` extension).
pub fn save_model(model: &GenerativeModel, extra: serde_json::Value, path: &Path) -> Result<()> {
    checkpoint::save_net(&model.decoder, path)?;
    let meta = ModelMeta {
        kind: model.kind,
        latent_dim: model.latent_dim,
        prior: model.prior,
        steps: model.steps,
        joints: model.joints,
        velocity_limit: model.velocity_limit,
        normalization: model.normalization.clone(),
        extra,
    };
    let sidecar = path.with_extension("json");
    std::fs::write(sidecar, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(GenerativeModel, ModelMeta)> {
    let decoder = checkpoint::load_net(path)?;
    let sidecar = path.with_extension("json");
    let meta: ModelMeta = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
    let model = GenerativeModel {
        kind: meta.kind,
        latent_dim: meta.latent_dim,
        decoder,
        prior: meta.prior,
        normalization: meta.normalization.clone(),
        steps: meta.steps,
        joints: meta.joints,
        velocity_limit: meta.velocity_limit,
    };
    Ok((model, meta))
}
