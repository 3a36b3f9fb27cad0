use crate::error::{MetricError, Result};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// Settings for kNN-manifold precision/recall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrConfig {
    /// Neighborhood rank k defining each hypersphere radius.
    pub k: usize,
    /// Number of trajectories drawn from each side.
    pub sample_count: usize,
}

impl PrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(MetricError::InvalidConfig(
                "neighborhood rank must be at least 1".into(),
            ));
        }
        if self.sample_count <= self.k {
            return Err(MetricError::InvalidConfig(format!(
                "sample count {} must exceed neighborhood rank {}",
                self.sample_count, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrReport {
    pub precision: f64,
    pub recall: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Squared radius of the k-th nearest neighbor of each row within its own
/// set, excluding the row itself.
fn knn_radii_sq(set: &[&[f64]], k: usize) -> Vec<f64> {
    let n = set.len();
    let mut radii = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        for (j, other) in set.iter().enumerate() {
            if j != i {
                dists.push(sq_dist(set[i], other));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.push(dists[k - 1]);
    }
    radii
}

/// Fraction of `points` that land inside at least one hypersphere of
/// `manifold` (radius = that point's k-th within-set neighbor distance).
fn coverage(points: &[&[f64]], manifold: &[&[f64]], radii_sq: &[f64]) -> f64 {
    let mut hits = 0usize;
    for p in points {
        let inside = manifold
            .iter()
            .zip(radii_sq)
            .any(|(m, &r)| sq_dist(p, m) <= r);
        if inside {
            hits += 1;
        }
    }
    hits as f64 / points.len() as f64
}

/// kNN-manifold precision and recall between flattened trajectory sets
/// (rows are trajectories). Precision asks how many generated trajectories
/// fall on the real manifold; recall asks the reverse.
pub fn precision_recall(
    t_r: ArrayView2<f64>,
    t_g: ArrayView2<f64>,
    k: usize,
) -> Result<PrReport> {
    if t_r.ncols() != t_g.ncols() {
        return Err(MetricError::DimMismatch {
            left: t_r.ncols(),
            right: t_g.ncols(),
        });
    }
    for rows in [t_r.nrows(), t_g.nrows()] {
        if rows <= k {
            return Err(MetricError::SetTooSmall {
                need: k + 1,
                got: rows,
            });
        }
    }

    let rows_r: Vec<&[f64]> = (0..t_r.nrows())
        .map(|i| t_r.row(i).to_slice().unwrap())
        .collect();
    let rows_g: Vec<&[f64]> = (0..t_g.nrows())
        .map(|i| t_g.row(i).to_slice().unwrap())
        .collect();

    let radii_r = knn_radii_sq(&rows_r, k);
    let radii_g = knn_radii_sq(&rows_g, k);

    Ok(PrReport {
        precision: coverage(&rows_g, &rows_r, &radii_r),
        recall: coverage(&rows_r, &rows_g, &radii_g),
    })
}
