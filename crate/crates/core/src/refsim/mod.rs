//! High-order reference simulator.
//!
//! A building is described by a [`BuildingSpec`], assembled into an
//! immutable finite-difference [`NetworkModel`] and integrated with implicit
//! Euler under a [`WeatherSeries`](crate::weather::WeatherSeries). The module
//! also computes the steady-state target resistance and provides the dataset
//! utilities (noise injection, subset extraction, CSV/JSON persistence).

mod dataset;
mod network;
mod schedule;
mod simulate;
mod spec;
mod target;

pub use dataset::{add_measurement_noise, extract_subset, DatasetMeta, NoiseLevels, SimDataset};
pub use network::{build_thermal_network, BoundaryKind, BoundaryLink, Link, NetworkModel};
pub use schedule::{setpoint, ventilation_flow, SetpointSchedule, VentilationCoefficients, AIR_CP, AIR_DENSITY};
pub use simulate::{simulate, simulate_traced, EnergyTrace, RunWindow, WARMUP_DAYS};
pub use spec::{BoundarySpec, BuildingSpec, HeaterSpec, Layer, ScheduleFraction, VentilationSpec, WallAssembly, WindowSpec, ZoneSpec};
pub use target::{compute_target_req, SteadyConditions, TargetReport, MIN_TARGET_DAYS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid building spec: {0}")]
    Spec(String),
    #[error("network construction failed: {0}")]
    Construction(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("numerical instability at step {step}: {message}")]
    Numerical { step: usize, message: String },
    #[error("dataset state error: {0}")]
    State(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("format error: {0}")]
    Format(String),
}
