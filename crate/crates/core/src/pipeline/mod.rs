//! Config-driven experiment: weather generation, target, calibration sweep
//! and report, with every artifact persisted under the output directory.

mod config;
mod manifest;
mod report;
mod stages;

pub use config::{AnalysisConfig, ExperimentConfig, RunConfig, TargetConfig};
pub use manifest::{DurationStatus, RowStatus, RunManifest, StageRecord};
pub use report::{cmd_report, REPORT_FILES};
pub use stages::{
    calibrate_row, cmd_generate_weather, cmd_sweep, cmd_target, run_all, window_means, EstimateRow, RowResult,
    TwoThirdsResult,
};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("missing prerequisite: {0}")]
    Dependency(String),
    #[error("stage failed: {0}")]
    Stage(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// Process exit code for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Writes through a temporary sibling so readers never see partial files.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}
