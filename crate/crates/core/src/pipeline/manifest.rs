use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub wall_clock_s: f64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationStatus {
    pub duration_days: u32,
    pub ok: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStatus {
    pub sample_id: usize,
    pub durations: Vec<DurationStatus>,
}

/// Run bookkeeping. Only the orchestrator writes it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
    pub rows: Vec<RowStatus>,
}

impl RunManifest {
    pub fn path(output_dir: &Path) -> PathBuf {
        output_dir.join("manifest.json")
    }

    /// The manifest in `output_dir`, or a fresh one when absent or written
    /// for a different configuration.
    pub fn open(output_dir: &Path, config_hash: &str, master_seed: u64) -> Result<Self, PipelineError> {
        let path = Self::path(output_dir);
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
            if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
                if m.config_hash == config_hash {
                    return Ok(m);
                }
                log::info!("configuration changed; starting a new manifest");
            }
        }
        Ok(RunManifest {
            config_hash: config_hash.to_string(),
            master_seed,
            ..Default::default()
        })
    }

    pub fn save(&self, output_dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        write_atomic(&Self::path(output_dir), text.as_bytes())
    }

    /// Artifact path of a completed stage.
    pub fn artifact(&self, stage: &str, name: &str, output_dir: &Path) -> Result<PathBuf, PipelineError> {
        let record = self
            .stages
            .get(stage)
            .ok_or_else(|| PipelineError::Dependency(format!("stage `{stage}` has not been run")))?;
        let rel = record
            .artifacts
            .iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| PipelineError::Dependency(format!("stage `{stage}` did not record {name}")))?;
        let path = output_dir.join(rel);
        if !path.exists() {
            return Err(PipelineError::Dependency(format!("{} is missing", path.display())));
        }
        Ok(path)
    }
}
