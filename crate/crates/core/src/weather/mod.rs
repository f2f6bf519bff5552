//! Weather ingestion, stochastic generation and the pick-freeze sample plan.
//!
//! Each of the six generated variables is modelled independently as a
//! harmonic trend plus an AR(1) Gaussian residual mapped through the empirical
//! residual quantiles. Independent seeding per variable is what makes the
//! group substitution of the sample plan well defined.

mod model;
mod plan;
mod series;
mod solar;

pub use model::{fit_variable_model, sample_weather, Ar1, HarmonicTrend, QuantileMap, VariableModel};
pub use plan::{build_sample_plan, Block, PlanRow, SamplePlan};
pub use series::{load_weather, parse_time, read_weather, Site, WeatherSeries, WeatherVariable, TIME_FORMAT};
pub use solar::{cos_zenith, global_horizontal};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("validation error at row {row}, column {column}: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}
