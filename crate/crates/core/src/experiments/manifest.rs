use super::config::ExperimentConfig;
use crate::error::Result;
use crate::noise::trajectory_key;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrajectorySeed {
    pub trajectory: u64,
    pub seed: u64,
    /// ChaCha8 key derived from `(seed, trajectory)`.
    pub key: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FailureRecord {
    pub eps: f64,
    pub trajectory: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub kind: String,
    pub crate_version: String,
    /// Content hash over every artifact, git-style short form.
    pub artifact_version: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub steps: usize,
    pub effective_final_time: f64,
    /// `complete`, or `partial` when some trajectories failed.
    pub status: String,
    pub stages: Vec<StageTiming>,
    pub trajectories: Vec<TrajectorySeed>,
    pub failures: Vec<FailureRecord>,
    pub artifacts: Vec<Artifact>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        let trajectories = (0..config.trajectories as u64)
            .map(|p| TrajectorySeed { trajectory: p, seed: config.seed, key: hex(&trajectory_key(config.seed, p)) })
            .collect();
        RunManifest {
            kind: config.kind.name().into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            artifact_version: String::new(),
            config_sha256: sha256_hex(config.to_toml_string().as_bytes()),
            config: config.clone(),
            steps: config.steps(),
            effective_final_time: config.effective_final_time(),
            status: "complete".into(),
            stages: Vec::new(),
            trajectories,
            failures: Vec::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn stage(&mut self, name: &str, started: std::time::Instant) {
        self.stages.push(StageTiming { name: name.into(), seconds: started.elapsed().as_secs_f64() });
    }

    pub fn fail(&mut self, eps: f64, trajectory: u64, error: String) {
        self.status = "partial".into();
        self.failures.push(FailureRecord { eps, trajectory, error });
    }

    /// Hashes `file` (relative to `dir`) into the artifact list.
    pub fn record_artifact(&mut self, dir: &Path, file: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(file))?;
        self.artifacts.push(Artifact { file: file.into(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        let joined: String = self.artifacts.iter().map(|a| a.sha256.as_str()).collect();
        self.artifact_version = sha256_hex(joined.as_bytes())[..12].to_string();
        let text =
            serde_json::to_string_pretty(self).map_err(|e| crate::OddsError::Config(format!("manifest: {e}")))?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
