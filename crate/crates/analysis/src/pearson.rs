use lplab_substrate::Rng;

use crate::error::{AnalysisError, Result};

/// Number of shuffles used by the permutation test for the p-value.
pub const PEARSON_PERMUTATIONS: usize = 10_000;

/// Seed of the internal shuffle stream, fixed so p-values are reproducible.
const PEARSON_SEED: u64 = 0x7065_6172_736f_6e;

/// A correlation coefficient together with its two-sided permutation p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonResult {
    pub r: f64,
    pub p_value: f64,
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson correlation between two samples with a two-sided permutation
/// p-value: one operand is shuffled `PEARSON_PERMUTATIONS` times from a fixed
/// seed and the p-value is the add-one-smoothed fraction of shuffles whose
/// absolute correlation reaches the observed one.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFewSamples {
            need: 3,
            got: x.len(),
        });
    }
    if is_constant(x) {
        return Err(AnalysisError::ConstantInput("x".into()));
    }
    if is_constant(y) {
        return Err(AnalysisError::ConstantInput("y".into()));
    }

    let r = correlation(x, y);
    let observed = r.abs();
    let mut shuffled = y.to_vec();
    let mut rng = Rng::new(PEARSON_SEED);
    let mut hits = 0usize;
    for _ in 0..PEARSON_PERMUTATIONS {
        rng.shuffle(&mut shuffled);
        if correlation(x, &shuffled).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    let p_value = (hits + 1) as f64 / (PEARSON_PERMUTATIONS + 1) as f64;
    Ok(PearsonResult { r, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_linear_relation_has_unit_correlation() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        let got = pearson_r(&x, &y).unwrap();
        assert!((got.r - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let got = pearson_r(&x, &neg).unwrap();
        assert!((got.r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_is_symmetric_and_affine_invariant() {
        let x = [0.3, -1.2, 2.4, 0.9, -0.5, 1.7];
        let y = [1.1, 0.2, 2.9, 1.4, 0.6, 2.0];
        let a = pearson_r(&x, &y).unwrap();
        let b = pearson_r(&y, &x).unwrap();
        assert!((a.r - b.r).abs() < 1e-12);
        let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v - 11.0).collect();
        let c = pearson_r(&scaled, &y).unwrap();
        assert!((a.r - c.r).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_rejected() {
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [0.1, 0.4, 0.2, 0.9];
        assert!(matches!(
            pearson_r(&x, &y),
            Err(AnalysisError::ConstantInput(_))
        ));
        assert!(matches!(
            pearson_r(&y, &x),
            Err(AnalysisError::ConstantInput(_))
        ));
    }

    #[test]
    fn short_or_mismatched_inputs_are_rejected() {
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[3.0, 4.0]),
            Err(AnalysisError::TooFewSamples { .. })
        ));
        assert!(matches!(
            pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(AnalysisError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn p_value_is_reproducible_and_detects_strong_signal() {
        let mut rng = Rng::new(99);
        let x: Vec<f64> = (0..40).map(|i| i as f64 + 0.3 * rng.standard_normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v + 0.5 * rng.standard_normal()).collect();
        let a = pearson_r(&x, &y).unwrap();
        let b = pearson_r(&x, &y).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert!(a.p_value < 0.01, "p={}", a.p_value);
        assert!(a.r > 0.9);
    }

    /// Two-sided permutation p-values should agree with the classical
    /// t-distribution p-values for Gaussian data at small n.
    #[test]
    fn p_value_tracks_t_distribution_reference() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let n = 9usize;
        let mut rng = Rng::new(4242);
        for trial in 0..6 {
            let x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
            let slope = 0.4 * trial as f64;
            let y: Vec<f64> = x.iter().map(|v| slope * v + rng.standard_normal()).collect();
            let got = pearson_r(&x, &y).unwrap();
            let df = (n - 2) as f64;
            let t = got.r * (df / (1.0 - got.r * got.r)).sqrt();
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            let p_t = 2.0 * (1.0 - dist.cdf(t.abs()));
            assert!(
                (got.p_value - p_t).abs() < 0.02,
                "trial {trial}: permutation p {} vs t p {}",
                got.p_value,
                p_t
            );
        }
    }
}
