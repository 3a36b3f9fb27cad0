use thiserror::Error;

/// Top-level errors for the experiment pipeline.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown model id '{0}'")]
    UnknownModel(String),
    #[error("{stage}: missing prerequisite: {detail}")]
    MissingArtifact { stage: String, detail: String },
    #[error("config hash mismatch: workdir was produced by a different configuration (use --force to overwrite)")]
    HashMismatch,
    #[error("analysis needs at least {need} models with reports and labels, found {got}")]
    TooFewModels { need: usize, got: usize },
    #[error("{stage}: {source}")]
    Arm {
        stage: String,
        source: lplab_arm::ArmError,
    },
    #[error("{stage}: {source}")]
    GenMod {
        stage: String,
        source: lplab_genmod::GenModError,
    },
    #[error("{stage}: {source}")]
    Metrics {
        stage: String,
        source: lplab_metrics::MetricError,
    },
    #[error("{stage}: {source}")]
    Policy {
        stage: String,
        source: lplab_policy::PolicyError,
    },
    #[error("{stage}: {source}")]
    Analysis {
        stage: String,
        source: lplab_analysis::AnalysisError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches a stage name to domain errors for readable failure reports.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageContext<T> for std::result::Result<T, lplab_arm::ArmError> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|source| CliError::Arm {
            stage: stage.to_string(),
            source,
        })
    }
}

impl<T> StageContext<T> for std::result::Result<T, lplab_genmod::GenModError> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|source| CliError::GenMod {
            stage: stage.to_string(),
            source,
        })
    }
}

impl<T> StageContext<T> for std::result::Result<T, lplab_metrics::MetricError> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|source| CliError::Metrics {
            stage: stage.to_string(),
            source,
        })
    }
}

impl<T> StageContext<T> for std::result::Result<T, lplab_policy::PolicyError> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|source| CliError::Policy {
            stage: stage.to_string(),
            source,
        })
    }
}

impl<T> StageContext<T> for std::result::Result<T, lplab_analysis::AnalysisError> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|source| CliError::Analysis {
            stage: stage.to_string(),
            source,
        })
    }
}
