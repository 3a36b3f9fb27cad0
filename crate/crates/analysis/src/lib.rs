//! Correlation analysis between generative-model quality metrics and
//! downstream policy performance: Pearson correlations with permutation
//! p-values and a Bayesian relevance fit that ranks features jointly.

mod ard;
mod error;
mod features;
mod pearson;
mod scale;
mod table;

pub use ard::{ard_fit, rank_features, ArdResult, ARD_MAX_ITERS, ARD_TOLERANCE, PRECISION_CAP};
pub use error::{AnalysisError, Result};
pub use features::FeatureMatrix;
pub use pearson::{pearson_r, PearsonResult, PEARSON_PERMUTATIONS};
pub use scale::{median_iqr, robust_scale};
pub use table::{correlation_table, CorrelationTable, TableRow};
