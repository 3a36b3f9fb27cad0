use crate::dpr::LatentSpace;
use crate::error::{MetricError, Result};
use crate::linalg::solve_linear;
use lplab_substrate::Rng;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

const RIDGE_LAMBDA: f64 = 1e-8;

/// Settings for the latent local linearity measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L3Config {
    /// Radius of the latent neighborhood ball.
    pub epsilon: f64,
    /// Number of anchor points sampled from the prior.
    pub anchors: usize,
    /// Number of neighborhood points per anchor.
    pub neighbors: usize,
    /// Fraction of neighborhood points used to fit the affine map.
    pub train_fraction: f64,
}

impl L3Config {
    pub fn validate(&self, latent_dim: usize) -> Result<()> {
        if self.epsilon <= 0.0 {
            return Err(MetricError::InvalidConfig(
                "neighborhood radius must be positive".into(),
            ));
        }
        if self.anchors < 1 {
            return Err(MetricError::InvalidConfig("need at least 1 anchor".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(MetricError::InvalidConfig(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let (n_train, n_test) = self.split(self.neighbors);
        if n_train < latent_dim + 1 {
            return Err(MetricError::InvalidConfig(format!(
                "affine fit needs at least {} training points, split gives {n_train}",
                latent_dim + 1
            )));
        }
        if n_test == 0 {
            return Err(MetricError::InvalidConfig(
                "split leaves no test points".into(),
            ));
        }
        Ok(())
    }

    fn split(&self, total: usize) -> (usize, usize) {
        let n_train = ((self.train_fraction * total as f64).round() as usize).min(total);
        (n_train, total - n_train)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L3Report {
    pub mean_mse: f64,
    pub per_anchor: Vec<f64>,
}

/// Fits an affine map from latent points to targets on the first `n_train`
/// rows and returns the mean squared error on the remaining rows. Singular
/// normal equations fall back to a small ridge penalty.
pub fn affine_fit_mse(xs: &Array2<f64>, ys: &Array2<f64>, n_train: usize) -> Result<f64> {
    let total = xs.nrows();
    let dim = xs.ncols();
    let out_dim = ys.ncols();
    assert_eq!(ys.nrows(), total, "point/target count mismatch");
    assert!(n_train < total, "no test points left");

    // Design matrix with a trailing bias column.
    let mut design = Array2::ones((n_train, dim + 1));
    for i in 0..n_train {
        for j in 0..dim {
            design[[i, j]] = xs[[i, j]];
        }
    }
    let gram = design.t().dot(&design);
    let mut weights = Array2::zeros((dim + 1, out_dim));
    for c in 0..out_dim {
        let rhs: Array1<f64> = design.t().dot(&ys.column(c).slice(ndarray::s![..n_train]));
        let solved = solve_linear(&gram, &rhs).or_else(|| {
            let mut ridged = gram.clone();
            for k in 0..dim + 1 {
                ridged[[k, k]] += RIDGE_LAMBDA;
            }
            solve_linear(&ridged, &rhs)
        });
        let w = solved.ok_or_else(|| {
            MetricError::InvalidConfig("affine fit is singular even with ridge".into())
        })?;
        weights.column_mut(c).assign(&w);
    }

    let n_test = total - n_train;
    let mut acc = 0.0;
    for i in n_train..total {
        for c in 0..out_dim {
            let mut pred = weights[[dim, c]];
            for j in 0..dim {
                pred += xs[[i, j]] * weights[[j, c]];
            }
            let err = pred - ys[[i, c]];
            acc += err * err;
        }
    }
    Ok(acc / (n_test * out_dim) as f64)
}

/// Latent local linearity: the held-out MSE of an affine fit from latent
/// neighborhoods to executed end states, averaged over prior anchors.
pub fn l3<G: LatentSpace + ?Sized>(
    model: &G,
    exe: &mut dyn FnMut(&Array2<f64>) -> Result<Array1<f64>>,
    cfg: &L3Config,
    rng: &Rng,
) -> Result<L3Report> {
    let n_latent = model.latent_dim();
    cfg.validate(n_latent)?;
    let (n_train, _) = cfg.split(cfg.neighbors);

    let mut per_anchor = Vec::with_capacity(cfg.anchors);
    for a in 0..cfg.anchors {
        let mut stream = rng.derive("l3-anchor").derive_index(a as u64);
        let anchor = model.sample_prior(&mut stream);

        let mut xs = Array2::zeros((cfg.neighbors, n_latent));
        let mut ys: Option<Array2<f64>> = None;
        for i in 0..cfg.neighbors {
            // Uniform draw in the epsilon-ball: Gaussian direction scaled
            // by epsilon * u^(1/N) for uniform volume coverage.
            let mut dir = stream.normal_array1(n_latent);
            let norm = dir.dot(&dir).sqrt().max(1e-300);
            let radius = cfg.epsilon * stream.uniform(0.0, 1.0).powf(1.0 / n_latent as f64);
            dir.mapv_inplace(|v| v / norm * radius);
            let point = &anchor + &dir;
            let state = exe(&model.decode(&point))?;
            let y = ys.get_or_insert_with(|| Array2::zeros((cfg.neighbors, state.len())));
            if state.len() != y.ncols() {
                return Err(MetricError::DimMismatch {
                    left: y.ncols(),
                    right: state.len(),
                });
            }
            y.row_mut(i).assign(&state);
            xs.row_mut(i).assign(&point);
        }
        let ys = ys.expect("at least one neighbor");
        per_anchor.push(affine_fit_mse(&xs, &ys, n_train)?);
    }

    let mean_mse = per_anchor.iter().sum::<f64>() / per_anchor.len() as f64;
    Ok(L3Report {
        mean_mse,
        per_anchor,
    })
}
