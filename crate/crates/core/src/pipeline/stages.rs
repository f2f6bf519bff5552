use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::{DurationStatus, RowStatus, RunManifest, StageRecord};
use super::{write_atomic, PipelineError};
use crate::greybox::{fit_ml, FitOptions};
use crate::inference::{infer_req_with, interpretability, two_thirds_days};
use crate::refsim::{
    add_measurement_noise, build_thermal_network, compute_target_req, extract_subset, simulate, BuildingSpec,
    NetworkModel, SimDataset, SteadyConditions, TargetReport, WARMUP_DAYS,
};
use crate::seeds::{derive_seed, sha256_hex};
use crate::weather::{
    build_sample_plan, fit_variable_model, load_weather, sample_weather, Block, PlanRow, SamplePlan, WeatherSeries,
    WeatherVariable,
};

pub(crate) const WEATHER_STAGE: &str = "generate-weather";
pub(crate) const TARGET_STAGE: &str = "target";
pub(crate) const SWEEP_STAGE: &str = "sweep";

pub(crate) const PLAN_FILE: &str = "weather/plan.json";
pub(crate) const TARGET_FILE: &str = "target.json";
pub(crate) const ESTIMATES_FILE: &str = "sweep/estimates.csv";
pub(crate) const TWO_THIRDS_FILE: &str = "sweep/two_thirds.csv";

fn sample_file(index: usize) -> String {
    format!("weather/sample_{index:05}.csv")
}

fn row_file(index: usize) -> String {
    format!("sweep/rows/row_{index:05}.json")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::io(path, e))
}

fn load_base(cfg: &ExperimentConfig) -> Result<WeatherSeries, PipelineError> {
    load_weather(&cfg.base_weather, cfg.site).map_err(|e| PipelineError::Config(format!("base weather: {e}")))
}

fn load_network(cfg: &ExperimentConfig) -> Result<(BuildingSpec, NetworkModel), PipelineError> {
    let spec = BuildingSpec::load(&cfg.building_spec).map_err(|e| PipelineError::Config(format!("building: {e}")))?;
    let net = build_thermal_network(&spec).map_err(|e| PipelineError::Config(format!("building: {e}")))?;
    Ok((spec, net))
}

fn record(manifest: &mut RunManifest, stage: &str, artifacts: Vec<String>, started: Instant, cache_hit: bool) {
    manifest.stages.insert(
        stage.to_string(),
        StageRecord {
            artifacts,
            wall_clock_s: started.elapsed().as_secs_f64(),
            cache_hit,
        },
    );
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WeatherStamp {
    hash: String,
    files: Vec<String>,
}

fn weather_hash(cfg: &ExperimentConfig) -> Result<String, PipelineError> {
    let base = std::fs::read(&cfg.base_weather).map_err(|e| PipelineError::io(&cfg.base_weather, e))?;
    let key = serde_json::json!({
        "base": sha256_hex(&base),
        "n": cfg.n_samples,
        "seed": cfg.master_seed,
        "amplitude": cfg.amplitude,
        "site": cfg.site,
    });
    Ok(sha256_hex(key.to_string().as_bytes()))
}

/// Writes `n·7` perturbed weather files and the sample plan. A rerun with the
/// same inputs leaves existing files untouched.
pub fn cmd_generate_weather(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<(), PipelineError> {
    let started = Instant::now();
    let out = &cfg.output_dir;
    let stamp_path = out.join("weather/stage.json");
    let hash = weather_hash(cfg)?;
    if let Ok(stamp) = read_json::<WeatherStamp>(&stamp_path) {
        if stamp.hash == hash && stamp.files.iter().all(|f| out.join(f).exists()) {
            log::info!("weather samples up to date ({} files)", stamp.files.len());
            record(manifest, WEATHER_STAGE, stamp.files, started, true);
            return Ok(());
        }
    }

    let base = load_base(cfg)?;
    let models = WeatherVariable::ALL
        .iter()
        .map(|&v| fit_variable_model(&base, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Stage(format!("weather model: {e}")))?;
    let plan = build_sample_plan(cfg.n_samples, cfg.master_seed).map_err(|e| PipelineError::Config(e.to_string()))?;
    write_atomic(&out.join(PLAN_FILE), plan.to_json().as_bytes())?;

    plan.rows.par_iter().try_for_each(|row| -> Result<(), PipelineError> {
        let ws = sample_weather(&models, &base, &row.group_seeds, cfg.amplitude)
            .map_err(|e| PipelineError::Stage(format!("weather sample {}: {e}", row.index)))?;
        let mut buf = Vec::new();
        ws.write_csv(&mut buf).map_err(|e| PipelineError::Stage(e.to_string()))?;
        write_atomic(&out.join(sample_file(row.index)), &buf)
    })?;

    let mut files = vec![PLAN_FILE.to_string()];
    files.extend(plan.rows.iter().map(|r| sample_file(r.index)));
    let stamp = WeatherStamp { hash, files: files.clone() };
    write_atomic(&stamp_path, serde_json::to_string_pretty(&stamp).unwrap().as_bytes())?;
    log::info!("wrote {} weather samples", plan.rows.len());
    record(manifest, WEATHER_STAGE, files, started, false);
    Ok(())
}

/// Mean of the base outdoor temperature over `[start, end)`.
fn mean_t_out(base: &WeatherSeries, start: NaiveDateTime, end: NaiveDateTime) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for k in 0..base.len() {
        let t = base.time_at(k);
        if t >= start && t < end {
            sum += base.t_out[k];
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn cmd_target(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<TargetReport, PipelineError> {
    let started = Instant::now();
    let (spec, net) = load_network(cfg)?;
    let base = load_base(cfg)?;
    let t_out = match cfg.target.t_out {
        Some(v) => v,
        None => mean_t_out(&base, cfg.run.start, cfg.run.end)
            .ok_or_else(|| PipelineError::Config("base weather does not cover the run window".into()))?,
    };
    let setpoint = cfg.target.setpoint.unwrap_or(spec.setpoint.occupied);
    let run_days = (cfg.run.end - cfg.run.start).num_days() - WARMUP_DAYS;
    let days = usize::try_from(run_days).unwrap_or(0);
    let report = compute_target_req(
        &net,
        SteadyConditions {
            t_out,
            setpoint,
            wind: Some(&base),
            start: cfg.run.start,
            step_s: cfg.run.step_s,
        },
        days,
    )
    .map_err(|e| PipelineError::Stage(format!("target: {e}")))?;
    if report.steady_state_warning() {
        log::warn!("target regression R² = {:.5} < 0.99; steady state may not be reached", report.r_squared);
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "t_out": t_out,
        "setpoint": setpoint,
        "steady_state_warning": report.steady_state_warning(),
        "report": report,
    }))
    .unwrap();
    write_atomic(&cfg.output_dir.join(TARGET_FILE), text.as_bytes())?;
    log::info!("target R*_eq = {:.4} K/kW (R² {:.5})", report.r_eq_star * 1e3, report.r_squared);
    record(manifest, TARGET_STAGE, vec![TARGET_FILE.to_string()], started, false);
    Ok(report)
}

pub(crate) fn load_target(path: &Path) -> Result<TargetReport, PipelineError> {
    let v: serde_json::Value = read_json(path)?;
    serde_json::from_value(v["report"].clone()).map_err(|e| PipelineError::io(path, e))
}

/// One calibration outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub sample_id: usize,
    pub duration_days: u32,
    pub r_eq: Option<f64>,
    pub sigma: Option<f64>,
    pub interpretability: Option<f64>,
    pub converged: bool,
    pub mean_t_out: f64,
    pub mean_wind: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoThirdsResult {
    pub window_days: u32,
    pub first: Option<f64>,
    pub last: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub sample_id: usize,
    pub estimates: Vec<EstimateRow>,
    pub two_thirds: Option<TwoThirdsResult>,
}

/// Means of outdoor temperature and wind speed over `[start, start + days)`
/// from the weather file rows.
pub fn window_means(ws: &WeatherSeries, start: NaiveDateTime, days: u32) -> (f64, f64) {
    let end = start + Duration::days(days as i64);
    let (mut t, mut w, mut n) = (0.0, 0.0, 0usize);
    for k in 0..ws.len() {
        let time = ws.time_at(k);
        if time >= start && time < end {
            t += ws.t_out[k];
            w += ws.wind_speed[k];
            n += 1;
        }
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    (t / n as f64, w / n as f64)
}

fn fit_window(
    cfg: &ExperimentConfig,
    ds: &SimDataset,
    start: NaiveDateTime,
    days: u32,
    seed: u64,
) -> Result<crate::inference::ReqEstimate, String> {
    let sub = extract_subset(ds, start, days as f64).map_err(|e| e.to_string())?;
    let options = FitOptions { seed, ..cfg.fit };
    let est = fit_ml(&sub, &options).map_err(|e| e.to_string())?;
    infer_req_with(&est, days as f64, None, cfg.analysis.sigma_method).map_err(|e| e.to_string())
}

/// Calibrates every configured duration on one simulated dataset. With
/// `two_thirds`, the first and last two-thirds windows of the longest subset
/// are calibrated as well.
pub fn calibrate_row(
    cfg: &ExperimentConfig,
    target: f64,
    weather: &WeatherSeries,
    ds: &SimDataset,
    sample_id: usize,
    two_thirds: bool,
) -> RowResult {
    let seed = cfg.master_seed;
    let estimates = cfg
        .durations
        .iter()
        .map(|&days| {
            let (mean_t_out, mean_wind) = window_means(weather, cfg.subset_start, days);
            let fit_seed = derive_seed("fit", &[seed, sample_id as u64, days as u64]);
            let mut row = EstimateRow {
                sample_id,
                duration_days: days,
                r_eq: None,
                sigma: None,
                interpretability: None,
                converged: false,
                mean_t_out,
                mean_wind,
                reason: None,
            };
            match fit_window(cfg, ds, cfg.subset_start, days, fit_seed) {
                Ok(r) => {
                    row.r_eq = Some(r.r_eq);
                    row.sigma = Some(r.sigma);
                    row.interpretability = Some(interpretability(r.r_eq, r.sigma, target));
                    row.converged = true;
                }
                Err(reason) => row.reason = Some(reason),
            }
            row
        })
        .collect();
    let two_thirds = two_thirds.then(|| {
        let longest = *cfg.durations.last().unwrap();
        let window = two_thirds_days(longest as f64) as u32;
        let late = cfg.subset_start + Duration::days((longest - window) as i64);
        let fit = |start, which: u64| {
            fit_window(cfg, ds, start, window, derive_seed("two-thirds", &[seed, sample_id as u64, which])).ok()
        };
        TwoThirdsResult {
            window_days: window,
            first: fit(cfg.subset_start, 0).map(|r| r.r_eq),
            last: fit(late, 1).map(|r| r.r_eq),
        }
    });
    RowResult {
        sample_id,
        estimates,
        two_thirds,
    }
}

fn failed_row(cfg: &ExperimentConfig, weather: Option<&WeatherSeries>, sample_id: usize, reason: String) -> RowResult {
    RowResult {
        sample_id,
        estimates: cfg
            .durations
            .iter()
            .map(|&days| {
                let (mean_t_out, mean_wind) =
                    weather.map_or((f64::NAN, f64::NAN), |w| window_means(w, cfg.subset_start, days));
                EstimateRow {
                    sample_id,
                    duration_days: days,
                    r_eq: None,
                    sigma: None,
                    interpretability: None,
                    converged: false,
                    mean_t_out,
                    mean_wind,
                    reason: Some(reason.clone()),
                }
            })
            .collect(),
        two_thirds: None,
    }
}

fn sweep_row(cfg: &ExperimentConfig, net: &NetworkModel, target: f64, row: &PlanRow, weather_path: &Path) -> RowResult {
    let weather = match load_weather(weather_path, cfg.site) {
        Ok(w) => w,
        Err(e) => return failed_row(cfg, None, row.index, format!("weather: {e}")),
    };
    let ds = match simulate(net, &weather, &cfg.run.window()) {
        Ok(ds) => ds,
        Err(e) => return failed_row(cfg, Some(&weather), row.index, format!("simulation: {e}")),
    };
    let ds = if cfg.noise {
        let noise_seed = derive_seed("row-noise", &[cfg.master_seed, row.index as u64]);
        match add_measurement_noise(&ds, noise_seed, cfg.noise_levels) {
            Ok(d) => d,
            Err(e) => return failed_row(cfg, Some(&weather), row.index, format!("noise: {e}")),
        }
    } else {
        ds
    };
    let mut ds = ds;
    ds.meta.weather_sample = Some(row.index);
    calibrate_row(cfg, target, &weather, &ds, row.index, row.block == Block::A)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn block_label(plan: &SamplePlan, sample_id: usize) -> String {
    match plan.rows[sample_id].block {
        Block::A => "A".to_string(),
        Block::C(i) => format!("C_{}", plan.groups[i].id()),
    }
}

fn estimates_csv(plan: &SamplePlan, rows: &[RowResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sample_id",
        "duration_days",
        "r_eq",
        "sigma",
        "interpretability",
        "converged",
        "block",
        "base_row",
        "mean_t_out",
        "mean_wind",
        "reason",
    ])
    .unwrap();
    for row in rows {
        for e in &row.estimates {
            w.write_record([
                e.sample_id.to_string(),
                e.duration_days.to_string(),
                fmt_opt(e.r_eq),
                fmt_opt(e.sigma),
                fmt_opt(e.interpretability),
                e.converged.to_string(),
                block_label(plan, e.sample_id),
                plan.rows[e.sample_id].base_row.to_string(),
                e.mean_t_out.to_string(),
                e.mean_wind.to_string(),
                e.reason.clone().unwrap_or_default(),
            ])
            .unwrap();
        }
    }
    w.into_inner().unwrap()
}

fn two_thirds_csv(rows: &[RowResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "window_days", "r_eq_first", "r_eq_last"]).unwrap();
    for row in rows {
        if let Some(t) = &row.two_thirds {
            w.write_record([
                row.sample_id.to_string(),
                t.window_days.to_string(),
                fmt_opt(t.first),
                fmt_opt(t.last),
            ])
            .unwrap();
        }
    }
    w.into_inner().unwrap()
}

/// Simulates and calibrates every plan row on a pool of `workers` threads.
/// With `resume`, rows that already have a result file are not recomputed.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    workers: usize,
    resume: bool,
) -> Result<Vec<RowResult>, PipelineError> {
    let started = Instant::now();
    let out = &cfg.output_dir;
    let plan_path = manifest.artifact(WEATHER_STAGE, PLAN_FILE, out)?;
    let target = load_target(&manifest.artifact(TARGET_STAGE, TARGET_FILE, out)?)?;
    let plan_text = std::fs::read_to_string(&plan_path).map_err(|e| PipelineError::io(&plan_path, e))?;
    let plan = SamplePlan::from_json(&plan_text).map_err(|e| PipelineError::Dependency(e.to_string()))?;
    let weather_paths: Vec<PathBuf> = plan
        .rows
        .iter()
        .map(|r| manifest.artifact(WEATHER_STAGE, &sample_file(r.index), out))
        .collect::<Result<_, _>>()?;
    let (_, net) = load_network(cfg)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Stage(format!("worker pool: {e}")))?;
    let total = plan.rows.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let mut rows: Vec<RowResult> = pool.install(|| {
        plan.rows
            .par_iter()
            .map(|row| -> Result<RowResult, PipelineError> {
                let path = out.join(row_file(row.index));
                if resume {
                    if let Ok(existing) = read_json::<RowResult>(&path) {
                        return Ok(existing);
                    }
                }
                let result = sweep_row(cfg, &net, target.r_eq_star, row, &weather_paths[row.index]);
                write_atomic(&path, serde_json::to_string(&result).unwrap().as_bytes())?;
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!("row {} done ({n}/{total} computed this run)", row.index);
                Ok(result)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by_key(|r| r.sample_id);

    write_atomic(&out.join(ESTIMATES_FILE), &estimates_csv(&plan, &rows))?;
    write_atomic(&out.join(TWO_THIRDS_FILE), &two_thirds_csv(&rows))?;
    manifest.rows = rows
        .iter()
        .map(|r| RowStatus {
            sample_id: r.sample_id,
            durations: r
                .estimates
                .iter()
                .map(|e| DurationStatus {
                    duration_days: e.duration_days,
                    ok: e.converged,
                    reason: e.reason.clone(),
                })
                .collect(),
        })
        .collect();
    let failed = manifest.rows.iter().flat_map(|r| &r.durations).filter(|d| !d.ok).count();
    log::info!("sweep complete: {} fits, {failed} failed", total * cfg.durations.len());
    let mut artifacts = vec![ESTIMATES_FILE.to_string(), TWO_THIRDS_FILE.to_string()];
    artifacts.extend(plan.rows.iter().map(|r| row_file(r.index)));
    record(manifest, SWEEP_STAGE, artifacts, started, false);
    Ok(rows)
}

/// Every stage in order, saving the manifest after each.
pub fn run_all(cfg: &ExperimentConfig, workers: usize, resume: bool) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let mut manifest = RunManifest::open(&cfg.output_dir, &cfg.hash()?, cfg.master_seed)?;
    cmd_generate_weather(cfg, &mut manifest)?;
    manifest.save(&cfg.output_dir)?;
    cmd_target(cfg, &mut manifest)?;
    manifest.save(&cfg.output_dir)?;
    cmd_sweep(cfg, &mut manifest, workers, resume)?;
    manifest.save(&cfg.output_dir)?;
    super::cmd_report(cfg, &mut manifest)?;
    manifest.save(&cfg.output_dir)?;
    Ok(manifest)
}
