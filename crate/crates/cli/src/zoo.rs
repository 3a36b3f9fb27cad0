use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::manifest::StageEntry;
use crate::stages;

/// Runs a stage closure, turning its outcome and wall time into a
/// manifest entry.
pub fn run_stage<F>(f: F) -> (StageEntry, bool)
where
    F: FnOnce() -> Result<Vec<PathBuf>>,
{
    let start = Instant::now();
    let outcome = f();
    let wall = start.elapsed().as_secs_f64();
    match outcome {
        Ok(artifacts) => (
            StageEntry {
                status: "success".to_string(),
                wall_time_secs: wall,
                artifacts: artifacts
                    .into_iter()
                    .map(|p| p.to_string_lossy().into_owned())
                    .collect(),
            },
            true,
        ),
        Err(e) => (
            StageEntry {
                status: format!("failed: {e}"),
                wall_time_secs: wall,
                artifacts: Vec::new(),
            },
            false,
        ),
    }
}

/// Runs every per-model stage for one model: training, evaluation, and
/// one policy run per configured seed.
fn run_model(
    config: &ExperimentConfig,
    workdir: &Path,
    model_id: &str,
) -> Vec<(String, StageEntry)> {
    let mut out = Vec::new();
    let (entry, trained) = run_stage(|| stages::cmd_train_gen(config, workdir, model_id));
    out.push((format!("train-gen:{model_id}"), entry));
    if !trained {
        return out;
    }
    let (entry, _) = run_stage(|| stages::cmd_eval_gen(config, workdir, model_id));
    out.push((format!("eval-gen:{model_id}"), entry));
    for seed in 0..config.policy_seeds as u64 {
        let (entry, _) = run_stage(|| stages::cmd_train_policy(config, workdir, model_id, seed));
        out.push((format!("train-policy:{model_id}:{seed}"), entry));
    }
    out
}

/// Runs the full pipeline: dataset generation, then every model's
/// training/evaluation/policy stages (spread over `jobs` worker threads),
/// then the correlation analysis. Returns the manifest entries in a
/// deterministic order.
pub fn run_zoo(
    config: &ExperimentConfig,
    workdir: &Path,
    jobs: usize,
) -> Vec<(String, StageEntry)> {
    let mut results = Vec::new();

    let (entry, ok) = run_stage(|| stages::cmd_gen_data(config, workdir));
    results.push(("gen-data".to_string(), entry));
    if !ok {
        return results;
    }

    let queue: Mutex<VecDeque<String>> = Mutex::new(
        config
            .models
            .iter()
            .map(|m| m.id().to_string())
            .collect(),
    );
    let collected: Mutex<Vec<(String, StageEntry)>> = Mutex::new(Vec::new());
    let workers = jobs.max(1).min(config.models.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let id = match queue.lock().unwrap().pop_front() {
                    Some(id) => id,
                    None => break,
                };
                let entries = run_model(config, workdir, &id);
                collected.lock().unwrap().extend(entries);
            });
        }
    });
    let mut model_entries = collected.into_inner().unwrap();
    // Worker completion order is nondeterministic; sort for a stable manifest.
    model_entries.sort_by(|a, b| a.0.cmp(&b.0));
    results.extend(model_entries);

    let (entry, _) = run_stage(|| stages::cmd_analyze(config, workdir));
    results.push(("analyze".to_string(), entry));
    results
}
