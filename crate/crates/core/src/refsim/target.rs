use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::network::NetworkModel;
use super::schedule::SetpointSchedule;
use super::simulate::{simulate, RunWindow, WARMUP_DAYS};
use super::SimError;
use crate::weather::{WeatherSeries, WeatherVariable};

/// Boundary conditions of the steady-state target experiment.
#[derive(Debug, Clone, Copy)]
pub struct SteadyConditions<'a> {
    pub t_out: f64,
    pub setpoint: f64,
    /// Wind speed source; `None` means still air.
    pub wind: Option<&'a WeatherSeries>,
    /// Start of the simulated period, warm-up included.
    pub start: NaiveDateTime,
    pub step_s: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    /// K/W
    pub r_eq_star: f64,
    /// W/K
    pub htc: f64,
    /// Uncentered coefficient of determination of the through-origin fit.
    pub r_squared: f64,
    /// Daily `(ΔT, P)` means used in the regression.
    pub daily_points: Vec<(f64, f64)>,
    pub days: usize,
}

impl TargetReport {
    pub fn steady_state_warning(&self) -> bool {
        self.r_squared < 0.99
    }
}

/// Simulates `days` recorded days under constant setpoint and outdoor
/// temperature without sun and regresses daily mean power on daily mean
/// `T_in - T_out` through the origin.
/// Fewest daily points accepted for the regression.
pub const MIN_TARGET_DAYS: usize = 10;

pub fn compute_target_req(network: &NetworkModel, steady: SteadyConditions, days: usize) -> Result<TargetReport, SimError> {
    if days < MIN_TARGET_DAYS {
        return Err(SimError::InsufficientData(format!(
            "target needs at least {MIN_TARGET_DAYS} daily points, got {days}"
        )));
    }
    let net = network.clone().with_setpoint(SetpointSchedule::constant(steady.setpoint));
    let total_days = days as i64 + WARMUP_DAYS;
    let hourly = (total_days * 24 + 1) as usize;
    let mut weather = WeatherSeries::constant(
        steady.start,
        3600,
        hourly,
        [steady.t_out, 50.0, 0.0, 0.0, 0.0, 0.0],
        steady.wind.map(|w| w.site).unwrap_or_default(),
    );
    if let Some(src) = steady.wind {
        for k in 0..hourly {
            let t = weather.time_at(k);
            let v = src.interpolate(WeatherVariable::WindSpeed, t).ok_or_else(|| {
                SimError::Range(format!("wind source does not cover {t}"))
            })?;
            weather.wind_speed[k] = v;
        }
    }
    let run = RunWindow {
        start: steady.start,
        end: steady.start + Duration::days(total_days),
        step_s: steady.step_s,
    };
    let ds = simulate(&net, &weather, &run)?;
    let per_day = (86_400 / steady.step_s) as usize;
    let mut points = Vec::with_capacity(days);
    for d in 0..days {
        let rows = d * per_day..(d + 1) * per_day;
        let dt = rows.clone().map(|k| ds.t_in[k] - ds.t_out[k]).sum::<f64>() / per_day as f64;
        let p = rows.map(|k| ds.p_h[k]).sum::<f64>() / per_day as f64;
        points.push((dt, p));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let syy: f64 = points.iter().map(|(_, y)| y * y).sum();
    if !(sxx > 0.0) || !(sxy > 0.0) {
        return Err(SimError::InsufficientData(
            "no heating demand under the steady conditions".into(),
        ));
    }
    let htc = sxy / sxx;
    let sse: f64 = points.iter().map(|(x, y)| (y - htc * x).powi(2)).sum();
    Ok(TargetReport {
        r_eq_star: 1.0 / htc,
        htc,
        r_squared: 1.0 - sse / syy,
        daily_points: points,
        days,
    })
}
