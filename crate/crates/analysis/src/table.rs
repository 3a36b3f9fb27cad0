use std::io::Write;
use std::path::Path;

use crate::ard::{ard_fit, rank_features};
use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::pearson::pearson_r;
use crate::scale::robust_scale;

/// One feature's correlation summary against the target.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub feature: String,
    pub pearson_r: f64,
    pub p_value: f64,
    pub ard_precision: f64,
}

/// Per-feature correlations plus the joint relevance ranking.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    pub rows: Vec<TableRow>,
    /// Feature names ordered from most to least relevant.
    pub ranking: Vec<String>,
    /// Set when the relevance fit collapsed and the precisions carry no
    /// information.
    pub ard_degenerate: bool,
}

/// Builds the per-feature summary for a feature matrix: Pearson correlation
/// with a permutation p-value per column, plus weight precisions from a
/// single joint relevance fit on robustly scaled columns.
pub fn correlation_table(matrix: &FeatureMatrix) -> Result<CorrelationTable> {
    let scaled = robust_scale(matrix);
    let fit = ard_fit(&scaled)?;
    let target = matrix.target.to_vec();
    let mut rows = Vec::with_capacity(matrix.n_features());
    for (j, name) in matrix.feature_names.iter().enumerate() {
        let column = matrix.values.column(j).to_vec();
        let stats = pearson_r(&column, &target)?;
        rows.push(TableRow {
            feature: name.clone(),
            pearson_r: stats.r,
            p_value: stats.p_value,
            ard_precision: fit.weight_precisions[j],
        });
    }
    let ranking = rank_features(&matrix.feature_names, &fit.weight_precisions);
    Ok(CorrelationTable {
        rows,
        ranking,
        ard_degenerate: fit.degenerate,
    })
}

impl CorrelationTable {
    /// Writes the table as CSV with full-precision values.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "feature,pearson_r,p_value,ard_precision")?;
        for row in &self.rows {
            writeln!(
                file,
                "{},{},{},{}",
                row.feature, row.pearson_r, row.p_value, row.ard_precision
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lplab_substrate::Rng;
    use ndarray::{Array1, Array2};

    fn toy_matrix() -> FeatureMatrix {
        let mut rng = Rng::new(31);
        let n = 30;
        let mut values = Array2::zeros((n, 3));
        let mut target = Array1::zeros(n);
        for i in 0..n {
            let signal = rng.standard_normal();
            values[[i, 0]] = signal;
            values[[i, 1]] = rng.standard_normal();
            values[[i, 2]] = 10.0 + rng.uniform(0.0, 0.1);
            target[i] = 2.0 * signal + 0.1 * rng.standard_normal();
        }
        FeatureMatrix::new(
            vec!["driver".into(), "noise".into(), "drift".into()],
            (0..n).map(|i| format!("m{i}")).collect(),
            values,
            target,
        )
        .unwrap()
    }

    #[test]
    fn driving_feature_dominates_the_table() {
        let table = correlation_table(&toy_matrix()).unwrap();
        assert!(!table.ard_degenerate);
        let driver = &table.rows[0];
        assert!(driver.pearson_r > 0.9);
        assert!(driver.p_value < 0.01);
        assert_eq!(table.ranking[0], "driver");
        for other in &table.rows[1..] {
            assert!(driver.ard_precision < other.ard_precision);
        }
    }

    #[test]
    fn csv_has_one_line_per_feature() {
        let table = correlation_table(&toy_matrix()).unwrap();
        let dir = std::env::temp_dir().join("lplab-analysis-table-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("table.csv");
        table.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "feature,pearson_r,p_value,ard_precision");
        assert_eq!(lines.len(), 1 + table.rows.len());
        assert!(lines[1].starts_with("driver,"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
