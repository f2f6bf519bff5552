use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::greybox::FitOptions;
use crate::inference::SigmaMethod;
use crate::refsim::{NoiseLevels, RunWindow, WARMUP_DAYS};
use crate::seeds::sha256_hex;
use crate::weather::Site;

mod datetime {
    use chrono::NaiveDateTime;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::weather::{parse_time, TIME_FORMAT};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format(TIME_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = String::deserialize(d)?;
        parse_time(&text).ok_or_else(|| D::Error::custom(format!("invalid timestamp {text:?}")))
    }
}

fn at(text: &str) -> NaiveDateTime {
    crate::weather::parse_time(text).expect("valid default timestamp")
}

/// Simulated period, warm-up included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "datetime")]
    pub start: NaiveDateTime,
    #[serde(with = "datetime")]
    pub end: NaiveDateTime,
    pub step_s: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            start: at("2000-11-15T00:00:00"),
            end: at("2001-02-15T00:00:00"),
            step_s: 600,
        }
    }
}

impl RunConfig {
    pub fn window(&self) -> RunWindow {
        RunWindow {
            start: self.start,
            end: self.end,
            step_s: self.step_s,
        }
    }

    /// First timestamp kept after the warm-up.
    pub fn data_start(&self) -> NaiveDateTime {
        self.start + Duration::days(WARMUP_DAYS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Constant outdoor temperature; defaults to the base-weather mean over
    /// the run window.
    pub t_out: Option<f64>,
    /// Defaults to the occupied setpoint of the building.
    pub setpoint: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub sigma_method: SigmaMethod,
    pub convergence_threshold_pct: f64,
    pub histogram_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sigma_method: SigmaMethod::PerfectCorrelation,
            convergence_threshold_pct: 5.0,
            histogram_bins: 10,
        }
    }
}

fn default_n() -> usize {
    32
}

fn default_durations() -> Vec<u32> {
    vec![2, 3, 5, 8, 11, 15, 25]
}

fn default_subset_start() -> NaiveDateTime {
    at("2001-01-02T00:00:00")
}

fn default_true() -> bool {
    true
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub building_spec: PathBuf,
    pub base_weather: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_n")]
    pub n_samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_durations")]
    pub durations: Vec<u32>,
    #[serde(default = "default_subset_start", with = "datetime")]
    pub subset_start: NaiveDateTime,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default = "default_true")]
    pub noise: bool,
    #[serde(default)]
    pub noise_levels: NoiseLevels,
    /// Scale of the stochastic weather residuals.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub site: Site,
    /// `seed` is ignored; each fit derives its own.
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(format!("config: {e}")))?;
        for p in [&mut cfg.building_spec, &mut cfg.base_weather, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, dir)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::Config(m));
        if self.n_samples < 2 {
            return fail(format!("n_samples must be at least 2, got {}", self.n_samples));
        }
        if self.durations.is_empty() || self.durations[0] == 0 {
            return fail("durations must be a non-empty list of positive day counts".into());
        }
        if self.durations.windows(2).any(|w| w[1] <= w[0]) {
            return fail(format!("durations must be strictly increasing, got {:?}", self.durations));
        }
        if self.run.step_s == 0 || 86_400 % self.run.step_s != 0 {
            return fail(format!("run.step_s must divide one day, got {}", self.run.step_s));
        }
        if self.run.end <= self.run.start {
            return fail("run.end must be after run.start".into());
        }
        let longest = *self.durations.last().unwrap() as i64;
        let subset_end = self.subset_start + Duration::days(longest);
        if self.subset_start < self.run.data_start() || subset_end > self.run.end {
            return fail(format!(
                "subset {} + {longest} days is outside the post-warm-up window {} to {}",
                self.subset_start,
                self.run.data_start(),
                self.run.end
            ));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return fail(format!("amplitude must be finite and >= 0, got {}", self.amplitude));
        }
        if self.fit.n_restarts == 0 {
            return fail("fit.n_restarts must be at least 1".into());
        }
        if !(self.analysis.convergence_threshold_pct > 0.0) || self.analysis.histogram_bins == 0 {
            return fail("analysis thresholds must be positive".into());
        }
        Ok(())
    }

    /// Hash of the configuration together with the contents of its input files.
    pub fn hash(&self) -> Result<String, PipelineError> {
        let mut text = serde_json::to_string(self).expect("config serialises");
        for p in [&self.building_spec, &self.base_weather] {
            let bytes = std::fs::read(p).map_err(|e| PipelineError::io(p, e))?;
            text.push_str(&sha256_hex(&bytes));
        }
        Ok(sha256_hex(text.as_bytes()))
    }
}
