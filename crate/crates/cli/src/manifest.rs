use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Status and artifacts of one pipeline stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageEntry {
    pub status: String,
    pub wall_time_secs: f64,
    pub artifacts: Vec<String>,
}

impl StageEntry {
    pub fn is_success(&self) -> bool {
        self.status == "success"
    }
}

/// On-disk record of what a workdir contains and which configuration
/// produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub stages: BTreeMap<String, StageEntry>,
}

pub fn config_hash(config_text: &str) -> String {
    let digest = Sha256::digest(config_text.as_bytes());
    format!("{digest:x}")
}

fn manifest_path(workdir: &Path) -> PathBuf {
    workdir.join("manifest.json")
}

impl RunManifest {
    /// Loads the workdir manifest, enforcing the config-hash guard: a
    /// manifest written under a different configuration refuses to be
    /// reused unless `force` is set (which resets it).
    pub fn open(workdir: &Path, hash: &str, force: bool) -> Result<Self> {
        let path = manifest_path(workdir);
        if path.exists() {
            let existing: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            if existing.config_hash == hash {
                return Ok(existing);
            }
            if !force {
                return Err(CliError::HashMismatch);
            }
        }
        Ok(RunManifest {
            config_hash: hash.to_string(),
            stages: BTreeMap::new(),
        })
    }

    pub fn record(
        &mut self,
        stage: &str,
        status: String,
        wall_time_secs: f64,
        artifacts: Vec<PathBuf>,
    ) {
        self.stages.insert(
            stage.to_string(),
            StageEntry {
                status,
                wall_time_secs,
                artifacts: artifacts
                    .into_iter()
                    .map(|p| p.to_string_lossy().into_owned())
                    .collect(),
            },
        );
    }

    pub fn save(&self, workdir: &Path) -> Result<()> {
        std::fs::create_dir_all(workdir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(manifest_path(workdir), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_guard_blocks_mismatched_config() {
        let dir = tempfile::tempdir().unwrap();
        let hash_a = config_hash("config a");
        let hash_b = config_hash("config b");
        assert_ne!(hash_a, hash_b);

        let mut m = RunManifest::open(dir.path(), &hash_a, false).unwrap();
        m.record("gen-data", "success".into(), 0.5, vec!["x.lpds".into()]);
        m.save(dir.path()).unwrap();

        // Same hash reloads the existing stages.
        let m2 = RunManifest::open(dir.path(), &hash_a, false).unwrap();
        assert!(m2.stages["gen-data"].is_success());

        // Different hash refuses without force, resets with it.
        assert!(matches!(
            RunManifest::open(dir.path(), &hash_b, false),
            Err(CliError::HashMismatch)
        ));
        let m3 = RunManifest::open(dir.path(), &hash_b, true).unwrap();
        assert!(m3.stages.is_empty());
    }
}
