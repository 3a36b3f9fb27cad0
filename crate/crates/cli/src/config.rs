use std::collections::BTreeMap;
use std::path::PathBuf;

use lplab_arm::ArmConfig;
use lplab_genmod::{InfoGanConfig, VaeConfig};
use lplab_metrics::{DprConfig, L3Config, MmdConfig, PrConfig};
use lplab_policy::EmConfig;

use crate::error::{CliError, Result};

/// One generative model declared in the experiment configuration.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Vae {
        id: String,
        latent_dim: usize,
        kl_threshold: f64,
        epochs: Option<usize>,
    },
    InfoGan {
        id: String,
        latent_dim: usize,
        lambda: f64,
        epochs: Option<usize>,
    },
}

impl ModelSpec {
    pub fn id(&self) -> &str {
        match self {
            ModelSpec::Vae { id, .. } | ModelSpec::InfoGan { id, .. } => id,
        }
    }

    pub fn is_vae(&self) -> bool {
        matches!(self, ModelSpec::Vae { .. })
    }

    pub fn vae_config(&self) -> Option<VaeConfig> {
        match self {
            ModelSpec::Vae {
                latent_dim,
                kl_threshold,
                epochs,
                ..
            } => {
                let mut cfg = VaeConfig::new(*latent_dim, *kl_threshold);
                if let Some(e) = epochs {
                    cfg.epochs = *e;
                }
                Some(cfg)
            }
            ModelSpec::InfoGan { .. } => None,
        }
    }

    pub fn infogan_config(&self) -> Option<InfoGanConfig> {
        match self {
            ModelSpec::InfoGan {
                latent_dim,
                lambda,
                epochs,
                ..
            } => {
                let mut cfg = InfoGanConfig::new(*latent_dim, *lambda);
                if let Some(e) = epochs {
                    cfg.epochs = *e;
                }
                Some(cfg)
            }
            ModelSpec::Vae { .. } => None,
        }
    }
}

/// Optional narrowing of the goal sector used for policy training. The
/// dataset workspace covers what the generative models see; policies can
/// be trained against a tighter target region inside it.
#[derive(Debug, Clone, Default)]
pub struct GoalSector {
    pub radius_min: Option<f64>,
    pub radius_max: Option<f64>,
    pub sector_center: Option<f64>,
    pub angle_span: Option<f64>,
    pub orientation_span: Option<f64>,
}

impl GoalSector {
    /// Arm configuration with the goal-sector overrides applied.
    pub fn apply(&self, base: &ArmConfig) -> ArmConfig {
        let mut cfg = base.clone();
        let ws = &mut cfg.workspace;
        if let Some(v) = self.radius_min {
            ws.radius_min = v;
        }
        if let Some(v) = self.radius_max {
            ws.radius_max = v;
        }
        if let Some(v) = self.sector_center {
            ws.sector_center = v;
        }
        if let Some(v) = self.angle_span {
            ws.angle_span = v;
        }
        if let Some(v) = self.orientation_span {
            ws.orientation_span = v;
        }
        cfg
    }
}

/// Fully parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub arm: ArmConfig,
    pub dataset_count: usize,
    pub models: Vec<ModelSpec>,
    pub mmd: MmdConfig,
    pub dpr: DprConfig,
    pub l3: L3Config,
    pub pr: PrConfig,
    pub policy: EmConfig,
    /// Policy training seeds per model.
    pub policy_seeds: usize,
    pub policy_goal: GoalSector,
    pub workdir: PathBuf,
}

impl ExperimentConfig {
    pub fn model(&self, id: &str) -> Result<&ModelSpec> {
        self.models
            .iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| CliError::UnknownModel(id.to_string()))
    }

    /// Working directory after applying the LPLB_WORKDIR override.
    pub fn resolved_workdir(&self) -> PathBuf {
        match std::env::var("LPLB_WORKDIR") {
            Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.workdir.clone(),
        }
    }
}

type Section = BTreeMap<String, String>;

struct RawConfig {
    sections: BTreeMap<String, Section>,
    /// Model sections in declaration order.
    model_order: Vec<String>,
}

fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut model_order = Vec::new();
    let mut current = String::new();
    sections.insert(current.clone(), Section::new());

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if sections.contains_key(&current) {
                return Err(CliError::Config(format!(
                    "line {}: duplicate section [{current}]",
                    lineno + 1
                )));
            }
            if current.starts_with("model ") {
                model_order.push(current.clone());
            }
            sections.insert(current.clone(), Section::new());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let section = sections.get_mut(&current).expect("current section exists");
        if section
            .insert(key.trim().to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(CliError::Config(format!(
                "line {}: duplicate key '{}'",
                lineno + 1,
                key.trim()
            )));
        }
    }
    Ok(RawConfig {
        sections,
        model_order,
    })
}

struct SectionReader<'a> {
    name: &'a str,
    section: Option<&'a Section>,
}

impl<'a> SectionReader<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.section.and_then(|s| s.get(key)).map(|v| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                CliError::Config(format!("[{}] {key}: cannot parse '{v}'", self.name))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?.ok_or_else(|| {
            CliError::Config(format!("[{}] missing required key '{key}'", self.name))
        })
    }

    fn parse_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| {
                        CliError::Config(format!("[{}] {key}: cannot parse '{tok}'", self.name))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

fn reader<'a>(raw: &'a RawConfig, name: &'a str) -> SectionReader<'a> {
    SectionReader {
        name,
        section: raw.sections.get(name),
    }
}

fn parse_arm(raw: &RawConfig) -> Result<ArmConfig> {
    let s = reader(raw, "arm");
    let mut cfg = ArmConfig::default();
    if let Some(v) = s.parse::<f64>("dt")? {
        cfg.dt = v;
    }
    if let Some(v) = s.parse::<usize>("steps")? {
        cfg.t = v;
    }
    if let Some(v) = s.parse::<f64>("velocity_limit")? {
        cfg.joint_velocity_limit = v;
    }
    if let Some(v) = s.parse::<f64>("radius_min")? {
        cfg.workspace.radius_min = v;
    }
    if let Some(v) = s.parse::<f64>("radius_max")? {
        cfg.workspace.radius_max = v;
    }
    if let Some(v) = s.parse::<f64>("sector_center")? {
        cfg.workspace.sector_center = v;
    }
    if let Some(v) = s.parse::<f64>("angle_span")? {
        cfg.workspace.angle_span = v;
    }
    if let Some(v) = s.parse::<f64>("orientation_span")? {
        cfg.workspace.orientation_span = v;
    }
    Ok(cfg)
}

fn parse_model(raw: &RawConfig, section_name: &str) -> Result<ModelSpec> {
    let id = section_name
        .strip_prefix("model ")
        .expect("model section")
        .trim()
        .to_string();
    if id.is_empty() {
        return Err(CliError::Config("model section with empty id".into()));
    }
    let s = reader(raw, section_name);
    let kind: String = s.require("kind")?;
    let latent_dim: usize = s.require("latent_dim")?;
    let epochs = s.parse::<usize>("epochs")?;
    match kind.as_str() {
        "vae" => Ok(ModelSpec::Vae {
            id,
            latent_dim,
            kl_threshold: s.require("kl_threshold")?,
            epochs,
        }),
        "infogan" => Ok(ModelSpec::InfoGan {
            id,
            latent_dim,
            lambda: s.require("lambda")?,
            epochs,
        }),
        other => Err(CliError::Config(format!(
            "[{section_name}] unknown kind '{other}' (expected vae or infogan)"
        ))),
    }
}

fn parse_policy(raw: &RawConfig) -> Result<(EmConfig, usize, GoalSector)> {
    let s = reader(raw, "policy");
    let mut cfg = EmConfig::default();
    if let Some(v) = s.parse::<usize>("outer_iters")? {
        cfg.outer_iters = v;
    }
    if let Some(v) = s.parse::<usize>("rollouts")? {
        cfg.rollouts = v;
    }
    if let Some(v) = s.parse::<usize>("e_iters")? {
        cfg.e_iters = v;
    }
    if let Some(v) = s.parse::<f64>("e_lr")? {
        cfg.e_lr = v;
    }
    if let Some(v) = s.parse::<f64>("e_kl_limit")? {
        cfg.e_kl_limit = v;
    }
    if let Some(v) = s.parse::<f64>("e_kl_final")? {
        cfg.e_kl_final = v;
    }
    if let Some(v) = s.parse::<usize>("m_iters")? {
        cfg.m_iters = v;
    }
    if let Some(v) = s.parse::<f64>("m_lr")? {
        cfg.m_lr = v;
    }
    if let Some(v) = s.parse::<usize>("value_iters")? {
        cfg.value_iters = v;
    }
    if let Some(v) = s.parse::<f64>("value_lr")? {
        cfg.value_lr = v;
    }
    if let Some(v) = s.parse_list("hidden")? {
        cfg.hidden = v;
    }
    if let Some(v) = s.parse::<f64>("init_log_std")? {
        cfg.init_log_std = v;
    }
    let seeds = s.parse::<usize>("seeds")?.unwrap_or(3);
    let goal = GoalSector {
        radius_min: s.parse("goal_radius_min")?,
        radius_max: s.parse("goal_radius_max")?,
        sector_center: s.parse("goal_sector_center")?,
        angle_span: s.parse("goal_angle_span")?,
        orientation_span: s.parse("goal_orientation_span")?,
    };
    Ok((cfg, seeds, goal))
}

/// Parses the sectioned key-value experiment configuration; the grammar is
/// documented in the repository README.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw = parse_raw(text)?;

    let top = reader(&raw, "");
    let master_seed: u64 = top.require("master_seed")?;

    let arm = parse_arm(&raw)?;

    let dataset = reader(&raw, "dataset");
    let dataset_count = dataset.parse::<usize>("count")?.unwrap_or(512);

    let mut models = Vec::new();
    for name in &raw.model_order {
        models.push(parse_model(&raw, name)?);
    }
    for (i, m) in models.iter().enumerate() {
        if models[..i].iter().any(|o| o.id() == m.id()) {
            return Err(CliError::Config(format!("duplicate model id '{}'", m.id())));
        }
    }

    let mmd_s = reader(&raw, "metrics.mmd");
    let mmd = MmdConfig {
        gamma: mmd_s.parse::<f64>("gamma")?.unwrap_or(15.0),
        permutations: mmd_s.parse::<usize>("permutations")?.unwrap_or(100),
        eta: mmd_s.parse::<f64>("eta")?.unwrap_or(0.05),
    };

    let dpr_s = reader(&raw, "metrics.dpr");
    let dpr = DprConfig {
        interventions: dpr_s.parse::<usize>("interventions")?.unwrap_or(5),
        half_range: dpr_s.parse::<f64>("half_range")?.unwrap_or(2.0),
        samples: dpr_s.parse::<usize>("samples")?.unwrap_or(32),
        replicates: dpr_s.parse::<usize>("replicates")?.unwrap_or(2),
    };

    let l3_s = reader(&raw, "metrics.l3");
    let l3 = L3Config {
        epsilon: l3_s.parse::<f64>("epsilon")?.unwrap_or(1e-3),
        anchors: l3_s.parse::<usize>("anchors")?.unwrap_or(8),
        neighbors: l3_s.parse::<usize>("neighbors")?.unwrap_or(64),
        train_fraction: l3_s.parse::<f64>("train_fraction")?.unwrap_or(0.75),
    };

    let pr_s = reader(&raw, "metrics.pr");
    let pr = PrConfig {
        k: pr_s.parse::<usize>("k")?.unwrap_or(3),
        sample_count: pr_s.parse::<usize>("sample_count")?.unwrap_or(128),
    };

    let (policy, policy_seeds, policy_goal) = parse_policy(&raw)?;

    let paths = reader(&raw, "paths");
    let workdir = PathBuf::from(
        paths
            .get("workdir")
            .ok_or_else(|| CliError::Config("[paths] missing required key 'workdir'".into()))?,
    );

    Ok(ExperimentConfig {
        master_seed,
        arm,
        dataset_count,
        models,
        mmd,
        dpr,
        l3,
        pr,
        policy,
        policy_seeds,
        policy_goal,
        workdir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# experiment
master_seed = 42

[arm]
steps = 20
radius_min = 0.9

[dataset]
count = 64

[model vae-2-1.5]
kind = vae
latent_dim = 2
kl_threshold = 1.5
epochs = 50

[model gan-2-0.1]
kind = infogan
latent_dim = 2
lambda = 0.1

[metrics.mmd]
permutations = 50

[policy]
outer_iters = 10
hidden = 32 32
seeds = 2
goal_radius_min = 1.1
goal_angle_span = 0.4

[paths]
workdir = runs/test
"#;

    #[test]
    fn sample_config_parses() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.arm.t, 20);
        assert_eq!(cfg.arm.workspace.radius_min, 0.9);
        assert_eq!(cfg.dataset_count, 64);
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(cfg.models[0].id(), "vae-2-1.5");
        let vae = cfg.models[0].vae_config().unwrap();
        assert_eq!(vae.epochs, 50);
        assert_eq!(vae.kl_threshold, 1.5);
        let gan = cfg.models[1].infogan_config().unwrap();
        assert_eq!(gan.lambda, 0.1);
        assert_eq!(cfg.mmd.permutations, 50);
        assert_eq!(cfg.mmd.gamma, 15.0);
        assert_eq!(cfg.policy.outer_iters, 10);
        assert_eq!(cfg.policy.hidden, vec![32, 32]);
        assert_eq!(cfg.policy_seeds, 2);
        let goal_arm = cfg.policy_goal.apply(&cfg.arm);
        assert_eq!(goal_arm.workspace.radius_min, 1.1);
        assert_eq!(goal_arm.workspace.angle_span, 0.4);
        assert_eq!(goal_arm.workspace.radius_max, cfg.arm.workspace.radius_max);
        assert_eq!(cfg.workdir, PathBuf::from("runs/test"));
    }

    #[test]
    fn duplicate_model_ids_are_rejected() {
        let text = SAMPLE.replace("gan-2-0.1", "vae-2-1.5");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_workdir_is_rejected() {
        let text = SAMPLE.replace("workdir = runs/test", "");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_config("master_seed").is_err());
        assert!(parse_config("master_seed = 1\nmaster_seed = 2").is_err());
    }

    #[test]
    fn unknown_model_kind_is_rejected() {
        let text = SAMPLE.replace("kind = infogan", "kind = flow");
        assert!(parse_config(&text).is_err());
    }
}
