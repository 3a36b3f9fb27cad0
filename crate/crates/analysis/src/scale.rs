use crate::features::FeatureMatrix;

/// Interpolated percentile of a sample, `p` in [0, 1].
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range of a sample. A zero IQR (e.g. a column
/// with at most two distinct values) falls back to a scale of one so the
/// column is centred but not blown up.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = percentile(&sorted, 0.5);
    let iqr = percentile(&sorted, 0.75) - percentile(&sorted, 0.25);
    let scale = if iqr > 0.0 { iqr } else { 1.0 };
    (median, scale)
}

/// Rescales every feature column to (x - median) / IQR. The target column
/// is left untouched; row labels and names are preserved.
pub fn robust_scale(matrix: &FeatureMatrix) -> FeatureMatrix {
    let mut out = matrix.clone();
    for mut col in out.values.columns_mut() {
        let (median, scale) = median_iqr(col.as_slice().map_or_else(
            || col.to_vec(),
            |s| s.to_vec(),
        ).as_slice());
        col.mapv_inplace(|v| (v - median) / scale);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn matrix(values: ndarray::Array2<f64>) -> FeatureMatrix {
        let n = values.nrows();
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        let labels = (0..n).map(|i| format!("m{i}")).collect();
        FeatureMatrix::new(names, labels, values, Array1::zeros(n)).unwrap()
    }

    #[test]
    fn known_quartiles_scale_as_expected() {
        // Column [1..5]: median 3, IQR 4 - 2 = 2.
        let m = matrix(array![[1.0], [2.0], [3.0], [4.0], [5.0]]);
        let scaled = robust_scale(&m);
        let got = scaled.values.column(0).to_vec();
        assert_eq!(got, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_is_centred_with_unit_scale() {
        let m = matrix(array![[7.0, 1.0], [7.0, 2.0], [7.0, 3.0]]);
        let scaled = robust_scale(&m);
        assert_eq!(scaled.values.column(0).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(scaled.values.column(1).to_vec(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn scaling_is_insensitive_to_affine_shifts() {
        let base = array![[0.4], [1.9], [-2.3], [0.0], [5.5], [1.1]];
        let shifted = base.mapv(|v| 10.0 * v + 3.0);
        let a = robust_scale(&matrix(base));
        let b = robust_scale(&matrix(shifted));
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn output_is_already_scaled() {
        let m = matrix(array![[0.4], [1.9], [-2.3], [0.0], [5.5]]);
        let once = robust_scale(&m);
        let twice = robust_scale(&once);
        for (x, y) in once.values.iter().zip(twice.values.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn target_and_metadata_are_preserved() {
        let m = FeatureMatrix::new(
            vec!["a".into()],
            vec!["x".into(), "y".into(), "z".into()],
            array![[1.0], [2.0], [3.0]],
            array![9.0, 8.0, 7.0],
        )
        .unwrap();
        let scaled = robust_scale(&m);
        assert_eq!(scaled.target.to_vec(), vec![9.0, 8.0, 7.0]);
        assert_eq!(scaled.row_labels, m.row_labels);
        assert_eq!(scaled.feature_names, m.feature_names);
    }
}
