//! Diagonal Gaussian heads: reparameterized sampling, log densities and
//! closed-form KL divergence.
//!
//! Networks that parametrize a Gaussian emit `2k` outputs per row: the first
//! `k` are the mean, the last `k` the raw log standard deviation, which is
//! clamped to `[LOG_STD_MIN, LOG_STD_MAX]` before use.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::rng::Rng;

pub const LOG_STD_MIN: f64 = -6.0;
pub const LOG_STD_MAX: f64 = 3.0;

pub const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub mean: Array1<f64>,
    pub log_std: Array1<f64>,
}

impl GaussianHead {
    pub fn new(mean: Array1<f64>, log_std: Array1<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len());
        let log_std = log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Self { mean, log_std }
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            log_std: Array1::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Reparameterized sample: `mean + exp(log_std) * noise`. Returns the
    /// sample together with the noise so gradients can flow back to the
    /// mean and log-std.
    pub fn sample(&self, rng: &mut Rng) -> (Array1<f64>, Array1<f64>) {
        let noise = rng.normal_array1(self.dim());
        let sample = &self.mean + &(self.log_std.mapv(f64::exp) * &noise);
        (sample, noise)
    }

    pub fn log_prob(&self, x: ArrayView1<f64>) -> f64 {
        assert_eq!(x.len(), self.dim());
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let ls = self.log_std[i];
            let z = (x[i] - self.mean[i]) / ls.exp();
            acc += -ls - 0.5 * z * z - 0.5 * LN_2PI;
        }
        acc
    }

    /// Closed-form KL(self || other) between diagonal Gaussians.
    pub fn kl(&self, other: &GaussianHead) -> f64 {
        assert_eq!(self.dim(), other.dim(), "KL needs equal dimensions");
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let (lq, lp) = (self.log_std[i], other.log_std[i]);
            let (vq, vp) = ((2.0 * lq).exp(), (2.0 * lp).exp());
            let dm = self.mean[i] - other.mean[i];
            acc += lp - lq + (vq + dm * dm) / (2.0 * vp) - 0.5;
        }
        acc
    }
}

/// Split a `(B, 2k)` network output into clamped batch heads.
/// Returns `(means, log_stds, clamp_mask)`; the mask is 1 where the raw
/// log-std was inside the clamp range (gradient passes through).
pub fn split_heads(raw: ArrayView2<f64>, k: usize) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    assert_eq!(raw.ncols(), 2 * k, "expected 2k columns");
    let means = raw.slice(s![.., ..k]).to_owned();
    let raw_ls = raw.slice(s![.., k..]);
    let log_stds = raw_ls.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    let mask = raw_ls.mapv(|v| {
        if (LOG_STD_MIN..=LOG_STD_MAX).contains(&v) {
            1.0
        } else {
            0.0
        }
    });
    (means, log_stds, mask)
}

/// Assemble the gradient w.r.t. the raw `(B, 2k)` output from gradients
/// w.r.t. the clamped heads.
pub fn merge_head_grads(
    d_mean: &Array2<f64>,
    d_log_std: &Array2<f64>,
    clamp_mask: &Array2<f64>,
) -> Array2<f64> {
    let (b, k) = d_mean.dim();
    let mut out = Array2::zeros((b, 2 * k));
    out.slice_mut(s![.., ..k]).assign(d_mean);
    out.slice_mut(s![.., k..]).assign(&(d_log_std * clamp_mask));
    out
}

/// Per-row log density of `x` under `(means, log_stds)`.
pub fn log_prob_rows(
    means: &Array2<f64>,
    log_stds: &Array2<f64>,
    x: &Array2<f64>,
) -> Array1<f64> {
    let b = means.nrows();
    Array1::from_shape_fn(b, |r| {
        let mut acc = 0.0;
        for i in 0..means.ncols() {
            let ls = log_stds[[r, i]];
            let z = (x[[r, i]] - means[[r, i]]) / ls.exp();
            acc += -ls - 0.5 * z * z - 0.5 * LN_2PI;
        }
        acc
    })
}

/// Per-row KL(q || p) for batched diagonal Gaussians.
pub fn kl_rows(
    q_mean: &Array2<f64>,
    q_log_std: &Array2<f64>,
    p_mean: &Array2<f64>,
    p_log_std: &Array2<f64>,
) -> Array1<f64> {
    let b = q_mean.nrows();
    Array1::from_shape_fn(b, |r| {
        let mut acc = 0.0;
        for i in 0..q_mean.ncols() {
            let (lq, lp) = (q_log_std[[r, i]], p_log_std[[r, i]]);
            let (vq, vp) = ((2.0 * lq).exp(), (2.0 * lp).exp());
            let dm = q_mean[[r, i]] - p_mean[[r, i]];
            acc += lp - lq + (vq + dm * dm) / (2.0 * vp) - 0.5;
        }
        acc
    })
}
