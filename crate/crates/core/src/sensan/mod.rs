//! Grouped first-order Sobol indices from the pick-freeze sample plan, and
//! per-duration variability summaries of the estimates.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds::rng_for;
use crate::weather::{Block, SamplePlan, WeatherVariable};

/// Indices below this are reported as not significant.
pub const SIGNIFICANCE_FLOOR: f64 = 0.1;
/// Number of paired bootstrap resamples for index standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 500;
/// Failed-row fraction above which a report is flagged unreliable.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum SensanError {
    #[error("output variance is zero; the index is undefined")]
    ZeroVariance,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupIndex {
    pub s1: f64,
    /// Bootstrap standard error.
    pub se: f64,
}

fn pick_freeze(y_a: &[f64], y_c: &[f64], rows: impl Iterator<Item = usize> + Clone) -> Option<f64> {
    let n = rows.clone().count() as f64;
    let (mut sm, mut sp, mut ss) = (0.0, 0.0, 0.0);
    for r in rows {
        let (a, c) = (y_a[r], y_c[r]);
        sm += 0.5 * (a + c);
        sp += a * c;
        ss += 0.5 * (a * a + c * c);
    }
    let m = sm / n;
    let den = ss / n - m * m;
    let scale = ss / n;
    if !(den > 1e-14 * scale.abs()) || !(den > 0.0) {
        return None;
    }
    Some((sp / n - m * m) / den)
}

/// Centred pick-freeze estimate of the first-order index of the group
/// shared between the paired outputs `y_a` and `y_c`.
pub fn first_order_group_index(y_a: &[f64], y_c: &[f64], seed: u64) -> Result<GroupIndex, SensanError> {
    if y_a.len() != y_c.len() {
        return Err(SensanError::Argument(format!("{} vs {} outputs", y_a.len(), y_c.len())));
    }
    let n = y_a.len();
    if n < 8 {
        return Err(SensanError::InsufficientData(format!("{n} paired outputs, need at least 8")));
    }
    if y_a.iter().chain(y_c).any(|v| !v.is_finite()) {
        return Err(SensanError::Argument("outputs must be finite".into()));
    }
    // Shift by the pooled mean for numerical stability; the estimator is
    // translation invariant.
    let shift = (y_a.iter().sum::<f64>() + y_c.iter().sum::<f64>()) / (2 * n) as f64;
    let a: Vec<f64> = y_a.iter().map(|v| v - shift).collect();
    let c: Vec<f64> = y_c.iter().map(|v| v - shift).collect();
    let s1 = pick_freeze(&a, &c, 0..n).ok_or(SensanError::ZeroVariance)?;

    let mut rng = rng_for("sobol-bootstrap", &[seed]);
    let mut draws = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut idx = vec![0usize; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..n);
        }
        if let Some(s) = pick_freeze(&a, &c, idx.iter().copied()) {
            draws.push(s);
        }
    }
    let se = if draws.len() > 1 {
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(GroupIndex { s1, se })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: WeatherVariable,
    pub s1: f64,
    pub se: f64,
    pub partial_variance: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub duration_days: f64,
    /// Variance of the block-A outputs, (K/W)².
    pub total_variance: f64,
    pub groups: Vec<GroupRow>,
    /// Base sample count of the plan.
    pub n: usize,
    /// Base rows with all seven outputs available.
    pub n_effective: usize,
    pub failed_rows: usize,
    pub unreliable: bool,
    /// `1 - Σ s1`.
    pub unattributed: f64,
    pub significance_floor: f64,
}

/// Indices for one duration. `outputs[k]` belongs to `plan.rows[k]`; `None`
/// marks a failed calibration, which removes its base row from every block.
pub fn run_sensitivity(
    outputs: &[Option<f64>],
    plan: &SamplePlan,
    duration_days: f64,
    seed: u64,
) -> Result<SensitivityReport, SensanError> {
    if outputs.len() != plan.rows.len() {
        return Err(SensanError::Argument(format!(
            "{} outputs for {} plan rows",
            outputs.len(),
            plan.rows.len()
        )));
    }
    let ok = |k: usize| outputs[k].is_some_and(f64::is_finite);
    let groups = plan.n_groups();
    let valid: Vec<usize> = (0..plan.n)
        .filter(|&r| ok(plan.row_index(Block::A, r)) && (0..groups).all(|i| ok(plan.row_index(Block::C(i), r))))
        .collect();
    let failed_rows = outputs.iter().filter(|o| !o.is_some_and(f64::is_finite)).count();
    let n_eff = valid.len();
    let unreliable = (plan.n - n_eff) as f64 / plan.n as f64 > MAX_FAILED_FRACTION;
    let value = |block, r| outputs[plan.row_index(block, r)].unwrap();
    let y_a: Vec<f64> = valid.iter().map(|&r| value(Block::A, r)).collect();
    if n_eff < 8 {
        return Err(SensanError::InsufficientData(format!(
            "{n_eff} complete base rows at {duration_days} days, need at least 8"
        )));
    }
    let mean = y_a.iter().sum::<f64>() / n_eff as f64;
    let total_variance = y_a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_eff - 1) as f64;

    let mut rows = Vec::with_capacity(groups);
    for (i, group) in plan.groups.iter().enumerate() {
        let y_c: Vec<f64> = valid.iter().map(|&r| value(Block::C(i), r)).collect();
        let gi = first_order_group_index(&y_a, &y_c, seed.wrapping_add(i as u64))?;
        rows.push(GroupRow {
            group: *group,
            s1: gi.s1,
            se: gi.se,
            partial_variance: gi.s1 * total_variance,
            significant: gi.s1 >= SIGNIFICANCE_FLOOR,
        });
    }
    Ok(SensitivityReport {
        duration_days,
        total_variance,
        unattributed: 1.0 - rows.iter().map(|r| r.s1).sum::<f64>(),
        groups: rows,
        n: plan.n,
        n_effective: n_eff,
        failed_rows,
        unreliable,
        significance_floor: SIGNIFICANCE_FLOOR,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilitySummary {
    pub duration_days: f64,
    pub count: usize,
    pub median: f64,
    pub std: f64,
    pub q05: f64,
    pub q95: f64,
    pub fraction_within_10pct_of_median: f64,
    pub fraction_interpretability_ge_05: f64,
}

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of `(r_eq, interpretability)` pairs for one duration.
pub fn summarize_variability(values: &[(f64, f64)], duration_days: f64) -> Result<VariabilitySummary, SensanError> {
    let n = values.len();
    if n < 8 {
        return Err(SensanError::InsufficientData(format!(
            "{n} estimates at {duration_days} days, need at least 8"
        )));
    }
    let mut r: Vec<f64> = values.iter().map(|v| v.0).collect();
    r.sort_by(f64::total_cmp);
    let median = quantile(&r, 0.5);
    let mean = r.iter().sum::<f64>() / n as f64;
    let std = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let within = r.iter().filter(|v| (*v - median).abs() <= 0.1 * median.abs()).count();
    let interpretable = values.iter().filter(|v| v.1 >= 0.5).count();
    Ok(VariabilitySummary {
        duration_days,
        count: n,
        median,
        std,
        q05: quantile(&r, 0.05),
        q95: quantile(&r, 0.95),
        fraction_within_10pct_of_median: within as f64 / n as f64,
        fraction_interpretability_ge_05: interpretable as f64 / n as f64,
    })
}
