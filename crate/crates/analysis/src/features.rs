use ndarray::{Array1, Array2};

use crate::error::{AnalysisError, Result};

/// A named design matrix: one row per model, one column per scalar feature,
/// plus a target column kept alongside the features.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub row_labels: Vec<String>,
    pub values: Array2<f64>,
    pub target: Array1<f64>,
}

impl FeatureMatrix {
    /// Builds and validates a feature matrix. Every column must be named,
    /// names must be unique, and all entries (including the target) finite.
    pub fn new(
        feature_names: Vec<String>,
        row_labels: Vec<String>,
        values: Array2<f64>,
        target: Array1<f64>,
    ) -> Result<Self> {
        if feature_names.len() != values.ncols() {
            return Err(AnalysisError::BadMatrix(format!(
                "{} names for {} columns",
                feature_names.len(),
                values.ncols()
            )));
        }
        if row_labels.len() != values.nrows() {
            return Err(AnalysisError::BadMatrix(format!(
                "{} labels for {} rows",
                row_labels.len(),
                values.nrows()
            )));
        }
        if target.len() != values.nrows() {
            return Err(AnalysisError::LengthMismatch {
                left: target.len(),
                right: values.nrows(),
            });
        }
        for (j, name) in feature_names.iter().enumerate() {
            if feature_names[..j].contains(name) {
                return Err(AnalysisError::BadMatrix(format!("duplicate column '{name}'")));
            }
            if values.column(j).iter().any(|v| !v.is_finite()) {
                return Err(AnalysisError::NonFinite {
                    column: name.clone(),
                });
            }
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite {
                column: "target".into(),
            });
        }
        Ok(Self {
            feature_names,
            row_labels,
            values,
            target,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Returns the column with the given name, if present.
    pub fn column(&self, name: &str) -> Option<Array1<f64>> {
        let j = self.feature_names.iter().position(|n| n == name)?;
        Some(self.values.column(j).to_owned())
    }

    /// Restricts the matrix to the named columns, in the order given.
    /// Columns absent from the matrix are skipped.
    pub fn select(&self, names: &[&str]) -> FeatureMatrix {
        let kept: Vec<usize> = names
            .iter()
            .filter_map(|name| self.feature_names.iter().position(|n| n == name))
            .collect();
        let mut values = Array2::zeros((self.n_samples(), kept.len()));
        for (out, &j) in kept.iter().enumerate() {
            values.column_mut(out).assign(&self.values.column(j));
        }
        FeatureMatrix {
            feature_names: kept.iter().map(|&j| self.feature_names[j].clone()).collect(),
            row_labels: self.row_labels.clone(),
            values,
            target: self.target.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["m0".into(), "m1".into(), "m2".into()],
            array![[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]],
            array![0.1, 0.2, 0.3],
        )
        .unwrap()
    }

    #[test]
    fn select_keeps_requested_columns_in_order() {
        let m = small().select(&["b", "missing", "a"]);
        assert_eq!(m.feature_names, vec!["b", "a"]);
        assert_eq!(m.values.column(0).to_vec(), vec![4.0, 5.0, 6.0]);
        assert_eq!(m.values.column(1).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let err = FeatureMatrix::new(
            vec!["a".into(), "a".into()],
            vec!["m".into()],
            array![[1.0, 2.0]],
            array![0.0],
        );
        assert!(matches!(err, Err(AnalysisError::BadMatrix(_))));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let err = FeatureMatrix::new(
            vec!["a".into()],
            vec!["m".into()],
            array![[f64::NAN]],
            array![0.0],
        );
        assert!(matches!(err, Err(AnalysisError::NonFinite { .. })));
    }
}
