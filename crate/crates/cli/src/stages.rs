use std::io::Write;
use std::path::{Path, PathBuf};

use lplab_arm::dataset::{export_csv, load_dataset, save_dataset};
use lplab_arm::{execute, DatasetRecord, Trajectory};
use lplab_genmod::{load_model, save_model, train_infogan, train_vae, GenerativeModel};
use lplab_metrics::{dpr, l3, precision_recall, MetricError, MetricReport};
use lplab_policy::train_em;
use lplab_substrate::{checkpoint, Rng};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelSpec};
use crate::error::{CliError, Result, StageContext};

pub const DATASET_FILE: &str = "dataset.lpds";
const PREVIEW_ROWS: usize = 100;
const HISTOGRAM_BINS: usize = 10;

fn dataset_path(workdir: &Path) -> PathBuf {
    workdir.join(DATASET_FILE)
}

pub fn model_path(workdir: &Path, id: &str) -> PathBuf {
    workdir.join("models").join(format!("{id}.lplb"))
}

pub fn report_path(workdir: &Path, id: &str) -> PathBuf {
    workdir.join("reports").join(format!("{id}.json"))
}

pub fn curve_path(workdir: &Path, id: &str, seed: u64) -> PathBuf {
    workdir.join("curves").join(format!("{id}_seed{seed}.csv"))
}

pub fn label_path(workdir: &Path, id: &str, seed: u64) -> PathBuf {
    workdir.join("labels").join(format!("{id}_seed{seed}.json"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

/// The master RNG stream for a pipeline stage of one model.
fn stage_rng(config: &ExperimentConfig, stage: &str, model_id: &str) -> Rng {
    Rng::new(config.master_seed).derive(stage).derive(model_id)
}

fn load_records(config: &ExperimentConfig, workdir: &Path, stage: &str) -> Result<Vec<DatasetRecord>> {
    let path = dataset_path(workdir);
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            stage: stage.to_string(),
            detail: format!("dataset not found at {} (run gen-data first)", path.display()),
        });
    }
    let (records, t, m) = load_dataset(&path).stage(stage)?;
    if t != config.arm.t || m != config.arm.m {
        return Err(CliError::MissingArtifact {
            stage: stage.to_string(),
            detail: format!(
                "dataset shape {t}x{m} does not match configured arm {}x{}",
                config.arm.t, config.arm.m
            ),
        });
    }
    Ok(records)
}

/// Generates the trajectory dataset plus a CSV preview and a goal histogram
/// over the configured workspace.
pub fn cmd_gen_data(config: &ExperimentConfig, workdir: &Path) -> Result<Vec<PathBuf>> {
    let stage = "gen-data";
    let rng = Rng::new(config.master_seed).derive(stage);
    let records =
        lplab_arm::generate_dataset(config.dataset_count, &config.arm, &rng).stage(stage)?;

    let data_file = dataset_path(workdir);
    ensure_parent(&data_file)?;
    save_dataset(&records, &config.arm, &data_file).stage(stage)?;

    let preview_file = workdir.join("dataset_preview.csv");
    let preview = &records[..records.len().min(PREVIEW_ROWS)];
    export_csv(preview, &config.arm, &preview_file).stage(stage)?;

    let histogram_file = workdir.join("goal_histogram.csv");
    write_goal_histogram(&records, config, &histogram_file)?;

    Ok(vec![data_file, preview_file, histogram_file])
}

/// Bins the dataset goals on a radius x polar-angle grid over the
/// configured workspace and writes the counts.
fn write_goal_histogram(
    records: &[DatasetRecord],
    config: &ExperimentConfig,
    path: &Path,
) -> Result<()> {
    let ws = &config.arm.workspace;
    let mut counts = vec![vec![0usize; HISTOGRAM_BINS]; HISTOGRAM_BINS];
    for rec in records {
        let (x, y) = (rec.end_state.x, rec.end_state.y);
        let radius = (x * x + y * y).sqrt();
        let theta = y.atan2(x);
        let u = (radius - ws.radius_min) / (ws.radius_max - ws.radius_min);
        let v = (theta - (ws.sector_center - ws.angle_span / 2.0)) / ws.angle_span;
        let i = ((u * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        let j = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        counts[i][j] += 1;
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# rows: radius bins, columns: polar-angle bins")?;
    for row in &counts {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// Trains the named generative model and writes its checkpoint, sidecar,
/// and loss-history CSV.
pub fn cmd_train_gen(
    config: &ExperimentConfig,
    workdir: &Path,
    model_id: &str,
) -> Result<Vec<PathBuf>> {
    let stage = "train-gen";
    let spec = config.model(model_id)?;
    let records = load_records(config, workdir, stage)?;
    let rng = stage_rng(config, stage, model_id);

    let ckpt = model_path(workdir, model_id);
    ensure_parent(&ckpt)?;
    let loss_file = workdir.join("models").join(format!("{model_id}_loss.csv"));

    match spec {
        ModelSpec::Vae { .. } => {
            let vae_cfg = spec.vae_config().expect("vae spec");
            let (model, state) = train_vae(&records, &config.arm, &vae_cfg, &rng).stage(stage)?;
            let last = state.history.last().expect("history non-empty");
            let extra = serde_json::json!({
                "kl_threshold": vae_cfg.kl_threshold,
                "beta": last.beta,
                "kl": last.kl,
                "reconstruction": last.reconstruction,
                "frozen": state.frozen,
            });
            save_model(&model, extra, &ckpt).stage(stage)?;
            let mut f = std::fs::File::create(&loss_file)?;
            writeln!(f, "epoch,kl,reconstruction,beta")?;
            for row in &state.history {
                writeln!(f, "{},{},{},{}", row.epoch, row.kl, row.reconstruction, row.beta)?;
            }
        }
        ModelSpec::InfoGan { .. } => {
            let gan_cfg = spec.infogan_config().expect("infogan spec");
            let (model, state) =
                train_infogan(&records, &config.arm, &gan_cfg, &rng).stage(stage)?;
            let last = state.history.last().expect("history non-empty");
            let extra = serde_json::json!({
                "lambda": gan_cfg.lambda,
                "d_loss": last.d_loss,
                "g_loss": last.g_loss,
                "i_loss": last.i_loss,
                "m_loss": last.m_loss,
            });
            save_model(&model, extra, &ckpt).stage(stage)?;
            let mut f = std::fs::File::create(&loss_file)?;
            writeln!(f, "epoch,d_loss,g_loss,i_loss,m_loss")?;
            for row in &state.history {
                writeln!(
                    f,
                    "{},{},{},{},{}",
                    row.epoch, row.d_loss, row.g_loss, row.i_loss, row.m_loss
                )?;
            }
        }
    }
    Ok(vec![ckpt, loss_file])
}

fn load_model_checked(workdir: &Path, model_id: &str, stage: &str) -> Result<GenerativeModel> {
    let path = model_path(workdir, model_id);
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            stage: stage.to_string(),
            detail: format!(
                "checkpoint not found at {} (run train-gen first)",
                path.display()
            ),
        });
    }
    let (model, _) = load_model(&path).stage(stage)?;
    Ok(model)
}

fn flatten_trajectories(rows: &[&Trajectory]) -> Array2<f64> {
    let n = rows.len();
    let len = rows.first().map_or(0, |t| t.velocities.len());
    let mut out = Array2::zeros((n, len));
    for (i, traj) in rows.iter().enumerate() {
        for (j, v) in traj.velocities.iter().enumerate() {
            out[[i, j]] = *v;
        }
    }
    out
}

/// Evaluates a trained model: disentangling precision/recall, latent-space
/// linearity, and trajectory-space precision/recall, written as one report.
pub fn cmd_eval_gen(
    config: &ExperimentConfig,
    workdir: &Path,
    model_id: &str,
) -> Result<Vec<PathBuf>> {
    let stage = "eval-gen";
    let model = load_model_checked(workdir, model_id, stage)?;
    let records = load_records(config, workdir, stage)?;
    let rng = stage_rng(config, stage, model_id);

    let arm_cfg = config.arm.clone();
    let mut exe = |velocities: &Array2<f64>| -> lplab_metrics::Result<Array1<f64>> {
        let traj = Trajectory::new(velocities.clone());
        let end = execute(&traj, &arm_cfg).map_err(|e| MetricError::Execution(e.to_string()))?;
        Ok(Array1::from(vec![end.x, end.y, end.phi]))
    };

    let mut end_states = Array2::zeros((records.len(), 3));
    for (i, rec) in records.iter().enumerate() {
        end_states[[i, 0]] = rec.end_state.x;
        end_states[[i, 1]] = rec.end_state.y;
        end_states[[i, 2]] = rec.end_state.phi;
    }

    let dpr_report = dpr(
        &model,
        &mut exe,
        end_states.view(),
        &config.mmd,
        &config.dpr,
        &rng.derive("dpr"),
    )
    .stage(stage)?;

    let l3_report = l3(&model, &mut exe, &config.l3, &rng.derive("l3")).stage(stage)?;

    let sample_count = config.pr.sample_count.min(records.len());
    let mut pr_rng = rng.derive("pr");
    let real_idx = pr_rng.sample_indices(records.len(), sample_count);
    let real_rows: Vec<&Trajectory> = real_idx.iter().map(|&i| &records[i].trajectory).collect();
    let t_r = flatten_trajectories(&real_rows);
    let generated: Vec<Trajectory> = model
        .sample_prior(sample_count, &mut pr_rng)
        .iter()
        .map(|alpha| model.decode(alpha))
        .collect::<lplab_genmod::Result<_>>()
        .stage(stage)?;
    let gen_refs: Vec<&Trajectory> = generated.iter().collect();
    let t_g = flatten_trajectories(&gen_refs);
    let pr_report = precision_recall(t_r.view(), t_g.view(), config.pr.k).stage(stage)?;

    let report = MetricReport {
        model_id: model_id.to_string(),
        dip: dpr_report.dip,
        dir: dpr_report.dir,
        l3_mse: l3_report.mean_mse,
        precision: pr_report.precision,
        recall: pr_report.recall,
        dpr_table: dpr_report.rows,
        config: serde_json::json!({
            "mmd": config.mmd,
            "dpr": config.dpr,
            "l3": config.l3,
            "pr": config.pr,
        }),
    };
    let path = report_path(workdir, model_id);
    ensure_parent(&path)?;
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    Ok(vec![path])
}

/// Label emitted by one policy-training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyLabel {
    pub model_id: String,
    pub seed: u64,
    /// Maximum per-iteration mean reward over the run.
    pub max_mean_reward: f64,
    /// Maximum per-iteration success rate over the run.
    pub max_success_rate: f64,
}

/// Trains one goal-conditioned policy on the model's latent space and
/// writes the training curve, the label, and the policy checkpoint.
pub fn cmd_train_policy(
    config: &ExperimentConfig,
    workdir: &Path,
    model_id: &str,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    let stage = "train-policy";
    config.model(model_id)?;
    let model = load_model_checked(workdir, model_id, stage)?;
    let rng = stage_rng(config, stage, model_id).derive_index(seed);

    let goal_arm = config.policy_goal.apply(&config.arm);
    let (policy, _value, curve) =
        train_em(&model, &goal_arm, &config.policy, &rng).stage(stage)?;

    let curve_file = curve_path(workdir, model_id, seed);
    ensure_parent(&curve_file)?;
    curve.write_csv(&curve_file).stage(stage)?;

    let label = PolicyLabel {
        model_id: model_id.to_string(),
        seed,
        max_mean_reward: curve.max_mean_reward,
        max_success_rate: curve
            .rows
            .iter()
            .map(|r| r.success_rate)
            .fold(0.0, f64::max),
    };
    let label_file = label_path(workdir, model_id, seed);
    ensure_parent(&label_file)?;
    std::fs::write(&label_file, serde_json::to_string_pretty(&label)?)?;

    let policy_file = workdir
        .join("policies")
        .join(format!("{model_id}_seed{seed}.lplb"));
    ensure_parent(&policy_file)?;
    checkpoint::save_net(&policy.net, &policy_file)
        .map_err(|e| CliError::Config(format!("saving policy: {e}")))?;

    Ok(vec![curve_file, label_file, policy_file])
}

/// Everything the analysis stage needs about one model.
struct ModelRow {
    id: String,
    is_vae: bool,
    report: MetricReport,
    extra: serde_json::Value,
    latent_dim: usize,
    label: f64,
}

fn load_rows(config: &ExperimentConfig, workdir: &Path, stage: &str) -> Result<Vec<ModelRow>> {
    let mut rows = Vec::new();
    for spec in &config.models {
        let id = spec.id().to_string();
        let report_file = report_path(workdir, &id);
        if !report_file.exists() {
            continue;
        }
        let report: MetricReport =
            serde_json::from_str(&std::fs::read_to_string(&report_file)?)?;

        let mut label = f64::NEG_INFINITY;
        for seed in 0..config.policy_seeds as u64 {
            let label_file = label_path(workdir, &id, seed);
            if !label_file.exists() {
                continue;
            }
            let parsed: PolicyLabel = serde_json::from_str(&std::fs::read_to_string(&label_file)?)?;
            label = label.max(parsed.max_mean_reward);
        }
        if !label.is_finite() {
            continue;
        }

        let sidecar = model_path(workdir, &id).with_extension("json");
        let meta: lplab_genmod::ModelMeta =
            serde_json::from_str(&std::fs::read_to_string(&sidecar).map_err(|_| {
                CliError::MissingArtifact {
                    stage: stage.to_string(),
                    detail: format!("sidecar missing for model '{id}'"),
                }
            })?)?;

        rows.push(ModelRow {
            id,
            is_vae: spec.is_vae(),
            report,
            extra: meta.extra,
            latent_dim: meta.latent_dim,
            label,
        });
    }
    Ok(rows)
}

fn extra_f64(extra: &serde_json::Value, key: &str) -> f64 {
    extra.get(key).and_then(|v| v.as_f64()).unwrap_or(f64::NAN)
}

fn feature_matrix(
    rows: &[&ModelRow],
    names: &[&str],
) -> Result<lplab_analysis::FeatureMatrix> {
    let mut values = Array2::zeros((rows.len(), names.len()));
    let mut target = Array1::zeros(rows.len());
    for (i, row) in rows.iter().enumerate() {
        target[i] = row.label;
        for (j, name) in names.iter().enumerate() {
            values[[i, j]] = match *name {
                "dip" => row.report.dip,
                "dir" => row.report.dir,
                "l3" => row.report.l3_mse,
                "precision" => row.report.precision,
                "recall" => row.report.recall,
                "latent_dim" => row.latent_dim as f64,
                other => extra_f64(&row.extra, other),
            };
        }
    }
    lplab_analysis::FeatureMatrix::new(
        names.iter().map(|n| n.to_string()).collect(),
        rows.iter().map(|r| r.id.clone()).collect(),
        values,
        target,
    )
    .stage("analyze")
}

pub const SHARED_FEATURES: [&str; 5] = ["dip", "dir", "l3", "precision", "recall"];
pub const VAE_FEATURES: [&str; 7] =
    ["dip", "dir", "l3", "precision", "recall", "latent_dim", "beta"];
pub const GAN_FEATURES: [&str; 10] = [
    "dip", "dir", "l3", "precision", "recall", "latent_dim", "lambda", "g_loss", "i_loss",
    "m_loss",
];

/// Builds the per-family and combined correlation tables from the metric
/// reports and policy labels.
pub fn cmd_analyze(config: &ExperimentConfig, workdir: &Path) -> Result<Vec<PathBuf>> {
    let stage = "analyze";
    let rows = load_rows(config, workdir, stage)?;
    if rows.len() < 6 {
        return Err(CliError::TooFewModels {
            need: 6,
            got: rows.len(),
        });
    }

    let out_dir = workdir.join("analysis");
    std::fs::create_dir_all(&out_dir)?;
    let mut artifacts = Vec::new();

    let vaes: Vec<&ModelRow> = rows.iter().filter(|r| r.is_vae).collect();
    if vaes.len() >= 3 {
        let matrix = feature_matrix(&vaes, &VAE_FEATURES)?;
        let table = lplab_analysis::correlation_table(&matrix).stage(stage)?;
        let path = out_dir.join("vae.csv");
        table.write_csv(&path)?;
        artifacts.push(path);
    }

    let gans: Vec<&ModelRow> = rows.iter().filter(|r| !r.is_vae).collect();
    if gans.len() >= 3 {
        let matrix = feature_matrix(&gans, &GAN_FEATURES)?;
        let table = lplab_analysis::correlation_table(&matrix).stage(stage)?;
        let path = out_dir.join("gan.csv");
        table.write_csv(&path)?;
        artifacts.push(path);
    }

    let all: Vec<&ModelRow> = rows.iter().collect();
    let matrix = feature_matrix(&all, &SHARED_FEATURES)?;
    let table = lplab_analysis::correlation_table(&matrix).stage(stage)?;
    let path = out_dir.join("combined.csv");
    table.write_csv(&path)?;
    artifacts.push(path);

    Ok(artifacts)
}
