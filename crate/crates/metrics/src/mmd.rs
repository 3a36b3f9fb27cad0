use crate::error::{MetricError, Result};
use lplab_substrate::Rng;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// Kernel bandwidth and permutation-test settings shared by the MMD-based
/// metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmdConfig {
    /// Bandwidth of the exponential kernel exp(-gamma * ||x - y||^2).
    pub gamma: f64,
    /// Number of pooled shuffles used to estimate the critical value.
    pub permutations: usize,
    /// Significance level of the test.
    pub eta: f64,
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(MetricError::InvalidConfig(format!(
                "kernel bandwidth must be positive, got {}",
                self.gamma
            )));
        }
        if self.permutations < 1 {
            return Err(MetricError::InvalidConfig(
                "permutation count must be at least 1".into(),
            ));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(MetricError::InvalidConfig(format!(
                "significance level must lie in (0, 1), got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

fn check_sets(s_r: &ArrayView2<f64>, s_g: &ArrayView2<f64>) -> Result<()> {
    if s_r.nrows() < 2 {
        return Err(MetricError::SetTooSmall {
            need: 2,
            got: s_r.nrows(),
        });
    }
    if s_g.nrows() < 2 {
        return Err(MetricError::SetTooSmall {
            need: 2,
            got: s_g.nrows(),
        });
    }
    if s_r.ncols() != s_g.ncols() {
        return Err(MetricError::DimMismatch {
            left: s_r.ncols(),
            right: s_g.ncols(),
        });
    }
    Ok(())
}

fn kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
    }
    (-gamma * sq).exp()
}

/// Unbiased estimator of the squared maximum mean discrepancy between the
/// empirical distributions of `s_r` and `s_g` (rows are samples). Can be
/// slightly negative because the diagonal terms are excluded.
pub fn mmd2_unbiased(s_r: ArrayView2<f64>, s_g: ArrayView2<f64>, gamma: f64) -> Result<f64> {
    check_sets(&s_r, &s_g)?;
    let m = s_r.nrows();
    let n = s_g.nrows();

    let rows_r: Vec<&[f64]> = (0..m).map(|i| s_r.row(i).to_slice().unwrap()).collect();
    let rows_g: Vec<&[f64]> = (0..n).map(|i| s_g.row(i).to_slice().unwrap()).collect();

    let mut within_r = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            within_r += kernel(rows_r[i], rows_r[j], gamma);
        }
    }
    let mut within_g = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            within_g += kernel(rows_g[i], rows_g[j], gamma);
        }
    }
    let mut cross = 0.0;
    for row_r in &rows_r {
        for row_g in &rows_g {
            cross += kernel(row_r, row_g, gamma);
        }
    }

    Ok(2.0 * within_r / (m * (m - 1)) as f64 + 2.0 * within_g / (n * (n - 1)) as f64
        - 2.0 * cross / (m * n) as f64)
}

/// Evaluates the unbiased squared-MMD estimator on a pooled kernel matrix:
/// the first `m` entries of `idx` form the first set, the remaining `n` the
/// second. `diag_included` sums exclude the diagonal by construction.
fn mmd2_from_kernel(pool_kernel: &[f64], size: usize, idx: &[usize], m: usize, n: usize) -> f64 {
    let mut within_r = 0.0;
    for a in 0..m {
        let ia = idx[a] * size;
        for b in a + 1..m {
            within_r += pool_kernel[ia + idx[b]];
        }
    }
    let mut within_g = 0.0;
    for a in m..m + n {
        let ia = idx[a] * size;
        for b in a + 1..m + n {
            within_g += pool_kernel[ia + idx[b]];
        }
    }
    let mut cross = 0.0;
    for a in 0..m {
        let ia = idx[a] * size;
        for b in m..m + n {
            cross += pool_kernel[ia + idx[b]];
        }
    }
    2.0 * within_r / (m * (m - 1)) as f64 + 2.0 * within_g / (n * (n - 1)) as f64
        - 2.0 * cross / (m * n) as f64
}

/// Critical value of the two-sample MMD test: pools both sets, shuffles and
/// re-splits `permutations` times, and returns the empirical (1 - eta)
/// quantile of the permuted statistics. The quantile is taken as the order
/// statistic with index ceil((1 - eta) * permutations), clamped to the
/// largest permuted value.
pub fn permutation_critical_value(
    s_r: ArrayView2<f64>,
    s_g: ArrayView2<f64>,
    gamma: f64,
    permutations: usize,
    eta: f64,
    rng: &mut Rng,
) -> Result<f64> {
    check_sets(&s_r, &s_g)?;
    if permutations < 1 {
        return Err(MetricError::InvalidConfig(
            "permutation count must be at least 1".into(),
        ));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(MetricError::InvalidConfig(format!(
            "significance level must lie in (0, 1), got {eta}"
        )));
    }
    let m = s_r.nrows();
    let n = s_g.nrows();
    let size = m + n;

    let mut pool: Vec<&[f64]> = Vec::with_capacity(size);
    for i in 0..m {
        pool.push(s_r.row(i).to_slice().unwrap());
    }
    for i in 0..n {
        pool.push(s_g.row(i).to_slice().unwrap());
    }

    let mut pool_kernel = vec![0.0; size * size];
    for i in 0..size {
        for j in i + 1..size {
            let k = kernel(pool[i], pool[j], gamma);
            pool_kernel[i * size + j] = k;
            pool_kernel[j * size + i] = k;
        }
    }

    let mut idx: Vec<usize> = (0..size).collect();
    let mut stats = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        rng.shuffle(&mut idx);
        stats.push(mmd2_from_kernel(&pool_kernel, size, &idx, m, n));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let rank = ((1.0 - eta) * permutations as f64).ceil() as usize;
    let rank = rank.clamp(1, permutations);
    Ok(stats[rank - 1])
}
