//! Experiment pipeline for the latent-planning lab: dataset generation,
//! generative-model training, evaluation metrics, policy training, and
//! correlation analysis, driven by a single sectioned config file.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;
pub mod zoo;

pub use config::{parse_config, ExperimentConfig, GoalSector, ModelSpec};
pub use error::{CliError, Result};
pub use manifest::{config_hash, RunManifest, StageEntry};
pub use stages::{
    cmd_analyze, cmd_eval_gen, cmd_gen_data, cmd_train_gen, cmd_train_policy, PolicyLabel,
};
pub use zoo::{run_stage, run_zoo};
