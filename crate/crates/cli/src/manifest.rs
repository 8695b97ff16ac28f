//! Run manifest and per-artifact sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    /// The fit finished but some R̂ is at or above the threshold.
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub seconds: f64,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    /// Artifact file names (relative to the output directory) by stage.
    pub stages: BTreeMap<String, StageRecord>,
}

/// Written next to each artifact as `<file>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub artifact: String,
    pub stage: String,
    pub config_hash: String,
    pub sha256: String,
    pub version: String,
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_sidecar(artifact: &Path, stage: &str, config_hash: &str) -> Result<()> {
    let s = Sidecar {
        artifact: artifact.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        stage: stage.to_string(),
        config_hash: config_hash.to_string(),
        sha256: file_sha256(artifact)?,
        version: VERSION.to_string(),
    };
    write_json(&sidecar_path(artifact), &s)
}

pub fn read_sidecar(artifact: &Path) -> Result<Sidecar> {
    let p = sidecar_path(artifact);
    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    Ok(serde_json::from_str(&text)?)
}

impl RunManifest {
    /// The manifest in `dir` if it belongs to the same configuration, else a fresh one.
    pub fn load_or_new(dir: &Path, config_hash: &str, seed: u64, threads: usize) -> RunManifest {
        let existing = std::fs::read_to_string(dir.join(MANIFEST_FILE))
            .ok()
            .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok())
            .filter(|m| m.config_hash == config_hash);
        let mut m = existing.unwrap_or_else(|| RunManifest {
            version: VERSION.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            threads,
            stages: BTreeMap::new(),
        });
        m.threads = threads;
        m
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    /// Checks that every listed artifact exists and its sidecar carries this manifest's hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (stage, rec) in &self.stages {
            for a in &rec.artifacts {
                let path = dir.join(a);
                anyhow::ensure!(path.exists(), "stage {stage}: artifact {} is missing", path.display());
                let side = read_sidecar(&path)?;
                anyhow::ensure!(
                    side.config_hash == self.config_hash,
                    "stage {stage}: {a} was produced under config {}",
                    side.config_hash
                );
                anyhow::ensure!(side.sha256 == file_sha256(&path)?, "stage {stage}: {a} changed after it was written");
            }
        }
        Ok(())
    }
}
