//! Evaluation suite for latent-variable trajectory generators: unbiased
//! squared MMD with permutation-test critical values, disentangling
//! precision & recall, latent local linearity, and kNN-manifold
//! precision/recall.

mod dpr;
mod error;
mod l3;
mod linalg;
mod mmd;
mod pr;
mod report;

pub use dpr::{dpr, DprConfig, DprReport, DprRow, LatentSpace};
pub use error::{MetricError, Result};
pub use l3::{l3, L3Config, L3Report};
pub use linalg::solve_linear;
pub use mmd::{mmd2_unbiased, permutation_critical_value, MmdConfig};
pub use pr::{precision_recall, PrConfig, PrReport};
pub use report::MetricReport;
