use lplab_metrics::solve_linear;
use ndarray::{Array1, Array2, Axis};

use crate::error::{AnalysisError, Result};
use crate::features::FeatureMatrix;

/// Upper bound on per-weight precisions; a weight whose precision reaches
/// this cap is effectively switched off.
pub const PRECISION_CAP: f64 = 1e10;

/// Relative-change tolerance for stopping the evidence iterations.
pub const ARD_TOLERANCE: f64 = 1e-6;

/// Maximum number of evidence-maximisation sweeps.
pub const ARD_MAX_ITERS: usize = 500;

/// Result of fitting a Bayesian linear model with one precision
/// hyper-parameter per weight (automatic relevance determination).
#[derive(Debug, Clone)]
pub struct ArdResult {
    /// Per-feature weight precisions, aligned with the input columns.
    pub weight_precisions: Vec<f64>,
    /// Posterior mean weights.
    pub weights: Vec<f64>,
    /// Inferred noise precision of the target.
    pub noise_precision: f64,
    pub iterations: usize,
    /// Set when the iteration diverged or every precision hit the cap;
    /// the precisions are then uninformative.
    pub degenerate: bool,
}

fn centred(matrix: &FeatureMatrix) -> (Array2<f64>, Array1<f64>) {
    let mut x = matrix.values.clone();
    let means = x.mean_axis(Axis(0)).unwrap();
    for (j, mut col) in x.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v - means[j]);
    }
    let y_mean = matrix.target.mean().unwrap();
    let y = matrix.target.mapv(|v| v - y_mean);
    (x, y)
}

/// Fits the evidence approximation: alternately solve for the posterior over
/// weights under the current precisions, then re-estimate each precision as
/// its effective degrees of freedom over the squared posterior mean. Features
/// and target are centred internally, so no bias term is fitted.
pub fn ard_fit(matrix: &FeatureMatrix) -> Result<ArdResult> {
    let n = matrix.n_samples();
    let d = matrix.n_features();
    if n < 3 {
        return Err(AnalysisError::TooFewSamples { need: 3, got: n });
    }
    if d == 0 {
        return Err(AnalysisError::BadMatrix("no feature columns".into()));
    }

    let (x, y) = centred(matrix);
    let xtx = x.t().dot(&x);
    let xty = x.t().dot(&y);
    let y_var = y.dot(&y) / n as f64;

    let mut alphas = Array1::from_elem(d, 1.0);
    let mut beta = if y_var > 0.0 { 1.0 / y_var } else { 1.0 };
    let mut weights = Array1::zeros(d);
    let mut iterations = 0;
    let mut degenerate = false;

    for iter in 0..ARD_MAX_ITERS {
        iterations = iter + 1;

        // Posterior: S = (beta X'X + diag(alpha))^-1, m = beta S X'y.
        let mut s_inv = &xtx * beta;
        for j in 0..d {
            s_inv[[j, j]] += alphas[j];
        }
        let mut sigma_diag = Array1::zeros(d);
        let mut singular = false;
        for j in 0..d {
            let mut unit = Array1::zeros(d);
            unit[j] = 1.0;
            match solve_linear(&s_inv, &unit) {
                Some(col) => sigma_diag[j] = col[j],
                None => {
                    singular = true;
                    break;
                }
            }
        }
        let mean = solve_linear(&s_inv, &xty).map(|m| m * beta);
        let mean = match (singular, mean) {
            (false, Some(m)) => m,
            _ => {
                degenerate = true;
                break;
            }
        };

        // Hyper-parameter updates.
        let mut new_alphas = Array1::zeros(d);
        let mut gamma_sum = 0.0;
        for j in 0..d {
            let gamma = (1.0 - alphas[j] * sigma_diag[j]).max(0.0);
            gamma_sum += gamma;
            let m2 = mean[j] * mean[j];
            new_alphas[j] = if m2 > 0.0 {
                (gamma / m2).min(PRECISION_CAP)
            } else {
                PRECISION_CAP
            };
        }
        let residual = &y - &x.dot(&mean);
        let rss = residual.dot(&residual);
        let new_beta = if rss > 0.0 {
            ((n as f64 - gamma_sum) / rss).clamp(1e-10, PRECISION_CAP)
        } else {
            PRECISION_CAP
        };

        if !new_alphas.iter().all(|a| a.is_finite()) || !new_beta.is_finite() {
            degenerate = true;
            break;
        }

        let mut max_rel = (new_beta - beta).abs() / beta.abs().max(1e-300);
        for j in 0..d {
            let rel = (new_alphas[j] - alphas[j]).abs() / alphas[j].abs().max(1e-300);
            max_rel = max_rel.max(rel);
        }
        alphas = new_alphas;
        beta = new_beta;
        weights = mean;
        if max_rel < ARD_TOLERANCE {
            break;
        }
    }

    if alphas.iter().all(|&a| a >= PRECISION_CAP) {
        degenerate = true;
    }

    Ok(ArdResult {
        weight_precisions: alphas.to_vec(),
        weights: weights.to_vec(),
        noise_precision: beta,
        iterations,
        degenerate,
    })
}

/// Orders feature names by ascending weight precision, i.e. most relevant
/// first. Exact ties are broken alphabetically.
pub fn rank_features(names: &[String], precisions: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| {
        precisions[a]
            .total_cmp(&precisions[b])
            .then_with(|| names[a].cmp(&names[b]))
    });
    order.into_iter().map(|i| names[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lplab_substrate::Rng;

    fn matrix(values: Array2<f64>, target: Array1<f64>) -> FeatureMatrix {
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        let labels = (0..values.nrows()).map(|i| format!("m{i}")).collect();
        FeatureMatrix::new(names, labels, values, target).unwrap()
    }

    fn synthetic(seed: u64, n: usize, slopes: &[f64], noise: f64) -> FeatureMatrix {
        let mut rng = Rng::new(seed);
        let d = slopes.len();
        let x = rng.normal_array2(n, d);
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let mut v = noise * rng.standard_normal();
            for j in 0..d {
                v += slopes[j] * x[[i, j]];
            }
            y[i] = v;
        }
        matrix(x, y)
    }

    #[test]
    fn irrelevant_feature_gets_much_larger_precision() {
        // x0 irrelevant, x1 drives the target: the precision of x0 should
        // dwarf the precision of x1.
        let m = synthetic(11, 60, &[0.0, 2.0], 0.05);
        let fit = ard_fit(&m).unwrap();
        assert!(!fit.degenerate);
        assert!(
            fit.weight_precisions[0] >= 100.0 * fit.weight_precisions[1],
            "precisions {:?}",
            fit.weight_precisions
        );
    }

    #[test]
    fn recovered_weights_match_the_generating_slopes() {
        let m = synthetic(3, 200, &[1.5, -0.8, 0.0], 0.02);
        let fit = ard_fit(&m).unwrap();
        assert!((fit.weights[0] - 1.5).abs() < 0.05);
        assert!((fit.weights[1] + 0.8).abs() < 0.05);
        assert!(fit.weights[2].abs() < 0.05);
    }

    #[test]
    fn constant_target_caps_every_precision() {
        let mut rng = Rng::new(7);
        let x = rng.normal_array2(20, 3);
        let m = matrix(x, Array1::from_elem(20, 4.2));
        let fit = ard_fit(&m).unwrap();
        assert!(fit.degenerate);
        for &a in &fit.weight_precisions {
            assert!(a >= PRECISION_CAP);
        }
    }

    #[test]
    fn duplicated_column_shares_relevance() {
        let mut rng = Rng::new(21);
        let base = rng.normal_array1(80);
        let mut x = Array2::zeros((80, 2));
        x.column_mut(0).assign(&base);
        x.column_mut(1).assign(&base);
        let y = base.mapv(|v| 1.2 * v) + rng.normal_array1(80).mapv(|v| 0.05 * v);
        let fit = ard_fit(&matrix(x, y)).unwrap();
        let (a, b) = (fit.weight_precisions[0], fit.weight_precisions[1]);
        let ratio = a.max(b) / a.min(b);
        assert!(ratio < 10.0, "precisions {a} vs {b}");
    }

    #[test]
    fn support_is_recovered_on_orthonormal_designs() {
        // Orthonormalised random design, two active and two silent features;
        // the active features must rank ahead of the silent ones.
        let mut recovered = 0;
        let trials = 100;
        for trial in 0..trials {
            let mut rng = Rng::new(1000 + trial);
            let n = 40;
            let mut x = rng.normal_array2(n, 4);
            for j in 0..4 {
                for k in 0..j {
                    let proj = x.column(j).dot(&x.column(k));
                    let prev = x.column(k).to_owned();
                    let mut col = x.column_mut(j);
                    col.zip_mut_with(&prev, |a, &b| *a -= proj * b);
                }
                let norm = x.column(j).dot(&x.column(j)).sqrt();
                x.column_mut(j).mapv_inplace(|v| v / norm);
            }
            let y = x.column(0).mapv(|v| 3.0 * v)
                + x.column(1).mapv(|v| -2.0 * v)
                + rng.normal_array1(n).mapv(|v| 0.05 * v);
            let fit = ard_fit(&matrix(x, y)).unwrap();
            let p = &fit.weight_precisions;
            if p[0].max(p[1]) < p[2].min(p[3]) {
                recovered += 1;
            }
        }
        assert!(recovered >= 95, "support recovered in {recovered}/{trials} trials");
    }

    #[test]
    fn fit_is_deterministic() {
        let m = synthetic(5, 50, &[1.0, 0.0], 0.1);
        let a = ard_fit(&m).unwrap();
        let b = ard_fit(&m).unwrap();
        assert_eq!(a.weight_precisions, b.weight_precisions);
        assert_eq!(a.noise_precision, b.noise_precision);
    }

    #[test]
    fn too_few_rows_are_rejected() {
        let m = matrix(Array2::zeros((2, 1)), Array1::zeros(2));
        assert!(matches!(
            ard_fit(&m),
            Err(AnalysisError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn ranking_sorts_by_precision_with_alphabetical_ties() {
        let names: Vec<String> = ["recall", "dip", "l3", "precision"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let precisions = [0.5, 3.0, 3.0, 0.1];
        let ranked = rank_features(&names, &precisions);
        assert_eq!(ranked, vec!["precision", "recall", "dip", "l3"]);
    }
}
