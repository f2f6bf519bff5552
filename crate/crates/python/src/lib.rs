//! Python bindings for the weather-variability study.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use reqvar_core::greybox::{fit_ml, Estimate as CoreEstimate, FitOptions};
use reqvar_core::inference::{self, SigmaMethod};
use reqvar_core::pipeline::{run_all, ExperimentConfig};
use reqvar_core::refsim::{self, NoiseLevels, RunWindow, SteadyConditions};
use reqvar_core::sensan;
use reqvar_core::weather::{self, parse_time, Site, WeatherVariable};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn time(s: &str) -> PyResult<chrono::NaiveDateTime> {
    parse_time(s).ok_or_else(|| PyValueError::new_err(format!("bad timestamp {s:?}, expected YYYY-MM-DDTHH:MM:SS")))
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Six aligned weather series on a uniform grid.
#[pyclass(name = "WeatherSeries", frozen)]
struct PyWeather(weather::WeatherSeries);

#[pymethods]
impl PyWeather {
    #[staticmethod]
    #[pyo3(signature = (path, latitude = 46.2, longitude = 6.13, utc_offset = 1.0))]
    fn load(path: PathBuf, latitude: f64, longitude: f64, utc_offset: f64) -> PyResult<Self> {
        let site = Site { latitude, longitude, utc_offset };
        weather::load_weather(&path, site).map(PyWeather).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn start(&self) -> String {
        self.0.start.format(weather::TIME_FORMAT).to_string()
    }

    #[getter]
    fn step_s(&self) -> u32 {
        self.0.step_s
    }

    /// Values of one variable (`t_out`, `rh`, `i_dn`, `i_dh`, `wind_speed`, `wind_dir`).
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        WeatherVariable::ALL
            .into_iter()
            .find(|v| v.id() == name)
            .map(|v| self.0.values(v).to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("unknown weather variable {name:?}")))
    }
}

/// Building description for the reference simulator.
#[pyclass(name = "BuildingSpec", frozen)]
struct PySpec(refsim::BuildingSpec);

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        refsim::BuildingSpec::load(&path).map(PySpec).map_err(value_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        refsim::BuildingSpec::from_toml(text).map(PySpec).map_err(value_err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml()
    }
}

/// Indoor temperature, outdoor temperature, solar gain and heating power.
#[pyclass(name = "SimDataset", frozen)]
struct PyDataset(refsim::SimDataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        refsim::SimDataset::load(&path).map(PyDataset).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn start(&self) -> String {
        self.0.start.format(weather::TIME_FORMAT).to_string()
    }

    #[getter]
    fn step_s(&self) -> u32 {
        self.0.step_s
    }

    #[getter]
    fn t_in(&self) -> Vec<f64> {
        self.0.t_in.clone()
    }

    #[getter]
    fn t_out(&self) -> Vec<f64> {
        self.0.t_out.clone()
    }

    #[getter]
    fn i_sol(&self) -> Vec<f64> {
        self.0.i_sol.clone()
    }

    #[getter]
    fn p_h(&self) -> Vec<f64> {
        self.0.p_h.clone()
    }

    #[getter]
    fn noisy(&self) -> bool {
        self.0.meta.noisy
    }

    #[pyo3(signature = (seed, temperature = 0.2, power = 20.0, irradiance = 5.0))]
    fn with_noise(&self, seed: u64, temperature: f64, power: f64, irradiance: f64) -> PyResult<Self> {
        let levels = NoiseLevels { temperature, power, irradiance };
        refsim::add_measurement_noise(&self.0, seed, levels).map(PyDataset).map_err(value_err)
    }

    fn subset(&self, start: &str, days: f64) -> PyResult<Self> {
        refsim::extract_subset(&self.0, time(start)?, days).map(PyDataset).map_err(value_err)
    }
}

/// Maximum-likelihood calibration of the two-state RC model.
#[pyclass(name = "Estimate", frozen)]
struct PyEstimate(CoreEstimate);

#[pymethods]
impl PyEstimate {
    #[getter]
    fn r_eq(&self) -> f64 {
        self.0.r_eq()
    }

    #[getter]
    fn log_likelihood(&self) -> f64 {
        self.0.log_likelihood
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn non_convergence_reason(&self) -> Option<String> {
        self.0.non_convergence_reason.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.0.residuals.clone()
    }

    /// Parameter names mapped to natural-space values.
    #[getter]
    fn params(&self) -> Vec<(String, f64)> {
        self.0.params.iter().map(|p| p.name.clone()).zip(self.0.values.iter().copied()).collect()
    }

    /// `R_eq` with its standard deviation; `method` is `perfect_correlation` or `covariance`.
    #[pyo3(signature = (duration_days, method = "perfect_correlation"))]
    fn req<'py>(&self, py: Python<'py>, duration_days: f64, method: &str) -> PyResult<Bound<'py, PyAny>> {
        let method = match method {
            "perfect_correlation" => SigmaMethod::PerfectCorrelation,
            "covariance" => SigmaMethod::Covariance,
            other => return Err(PyValueError::new_err(format!("unknown sigma method {other:?}"))),
        };
        let r = inference::infer_req_with(&self.0, duration_days, None, method).map_err(value_err)?;
        to_py(py, &r)
    }
}

#[pyfunction]
#[pyo3(signature = (spec, weather, start, end, step_s = 600))]
fn simulate(spec: &PySpec, weather: &PyWeather, start: &str, end: &str, step_s: u32) -> PyResult<PyDataset> {
    let network = refsim::build_thermal_network(&spec.0).map_err(value_err)?;
    let run = RunWindow { start: time(start)?, end: time(end)?, step_s };
    refsim::simulate(&network, &weather.0, &run).map(PyDataset).map_err(value_err)
}

/// Steady-state target `R*_eq` and its regression diagnostics.
#[pyfunction]
#[pyo3(signature = (spec, t_out, setpoint, start, days, step_s = 600, wind = None))]
#[allow(clippy::too_many_arguments)]
fn compute_target<'py>(
    py: Python<'py>,
    spec: &PySpec,
    t_out: f64,
    setpoint: f64,
    start: &str,
    days: usize,
    step_s: u32,
    wind: Option<&PyWeather>,
) -> PyResult<Bound<'py, PyAny>> {
    let network = refsim::build_thermal_network(&spec.0).map_err(value_err)?;
    let steady = SteadyConditions { t_out, setpoint, wind: wind.map(|w| &w.0), start: time(start)?, step_s };
    let report = refsim::compute_target_req(&network, steady, days).map_err(value_err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (dataset, n_restarts = 8, seed = 0))]
fn fit(py: Python<'_>, dataset: &PyDataset, n_restarts: usize, seed: u64) -> PyResult<PyEstimate> {
    let options = FitOptions { n_restarts, seed, ..FitOptions::default() };
    py.detach(|| fit_ml(&dataset.0, &options)).map(PyEstimate).map_err(value_err)
}

#[pyfunction]
fn interpretability(r_eq: f64, sigma: f64, target: f64) -> f64 {
    inference::interpretability(r_eq, sigma, target)
}

#[pyfunction]
#[pyo3(signature = (residuals, max_lag = 50))]
fn residual_autocorrelation<'py>(py: Python<'py>, residuals: Vec<f64>, max_lag: usize) -> PyResult<Bound<'py, PyAny>> {
    let report = inference::residual_autocorrelation(&residuals, max_lag).map_err(value_err)?;
    to_py(py, &report)
}

/// Duration-convergence verdict for `(duration_days, r_eq)` pairs.
#[pyfunction]
#[pyo3(signature = (series, threshold_pct = 5.0, two_thirds = None))]
fn iso9869_convergence<'py>(
    py: Python<'py>,
    series: Vec<(f64, f64)>,
    threshold_pct: f64,
    two_thirds: Option<(f64, f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let verdict = inference::iso9869_convergence(&series, threshold_pct, two_thirds).map_err(value_err)?;
    to_py(py, &verdict)
}

/// Pick-freeze plan rows as lists of six group seeds, block A first.
#[pyfunction]
fn build_sample_plan(n: usize, master_seed: u64) -> PyResult<Vec<[u64; 6]>> {
    let plan = weather::build_sample_plan(n, master_seed).map_err(value_err)?;
    Ok(plan.rows.into_iter().map(|r| r.group_seeds).collect())
}

/// First-order index of one group from base outputs and the block freezing it.
#[pyfunction]
#[pyo3(signature = (y_a, y_c, seed = 0))]
fn first_order_group_index(y_a: Vec<f64>, y_c: Vec<f64>, seed: u64) -> PyResult<(f64, f64)> {
    let g = sensan::first_order_group_index(&y_a, &y_c, seed).map_err(value_err)?;
    Ok((g.s1, g.se))
}

/// Runs every pipeline stage for a config file and returns the output directory.
#[pyfunction]
#[pyo3(signature = (config, workers = 1, resume = false))]
fn run_pipeline(py: Python<'_>, config: PathBuf, workers: usize, resume: bool) -> PyResult<PathBuf> {
    let cfg = ExperimentConfig::load(&config).map_err(value_err)?;
    py.detach(|| run_all(&cfg, workers, resume)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(cfg.output_dir)
}

#[pymodule]
fn reqvar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeather>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_target, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(interpretability, m)?)?;
    m.add_function(wrap_pyfunction!(residual_autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(iso9869_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(build_sample_plan, m)?)?;
    m.add_function(wrap_pyfunction!(first_order_group_index, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
