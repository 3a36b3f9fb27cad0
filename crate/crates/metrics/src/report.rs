use crate::dpr::DprRow;
use serde::{Deserialize, Serialize};

/// Per-model evaluation summary written as JSON and aggregated into the
/// cross-model CSV consumed by the correlation analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_id: String,
    pub dip: f64,
    pub dir: f64,
    pub l3_mse: f64,
    pub precision: f64,
    pub recall: f64,
    pub dpr_table: Vec<DprRow>,
    /// Echo of the metric configuration the report was produced with.
    pub config: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let report = MetricReport {
            model_id: "vae-2-1.5".into(),
            dip: 0.83,
            dir: 2.0 / 3.0,
            l3_mse: 0.012,
            precision: 0.9,
            recall: 0.85,
            dpr_table: vec![DprRow {
                latent: 0,
                component: Some(1),
                d_g: 0.4,
                significant_count: 7,
            }],
            config: serde_json::json!({"gamma": 15.0}),
        };
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: MetricReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.model_id, report.model_id);
        assert_eq!(back.dpr_table[0].component, Some(1));
        assert_eq!(back.dir, report.dir);
    }
}
