use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::{RunManifest, StageRecord};
use super::stages::{load_target, ESTIMATES_FILE, PLAN_FILE, SWEEP_STAGE, TARGET_FILE, TARGET_STAGE, TWO_THIRDS_FILE, WEATHER_STAGE};
use super::{write_atomic, PipelineError};
use crate::inference::{iso9869_convergence, ConvergenceVerdict};
use crate::sensan::{run_sensitivity, summarize_variability, SensitivityReport};
use crate::weather::{Block, SamplePlan};

/// Files written by [`cmd_report`], relative to the output directory.
pub const REPORT_FILES: [&str; 7] = [
    "report/variability.csv",
    "report/sensitivity.csv",
    "report/sensitivity.json",
    "report/convergence.json",
    "report/estimates_vs_duration.csv",
    "report/interpretability_histogram.csv",
    "report/weather_scatter.csv",
];

#[derive(Debug, Deserialize)]
struct EstimateRecord {
    sample_id: usize,
    duration_days: u32,
    r_eq: Option<f64>,
    sigma: Option<f64>,
    interpretability: Option<f64>,
    converged: bool,
    mean_t_out: f64,
    mean_wind: f64,
}

#[derive(Debug, Deserialize)]
struct TwoThirdsRecord {
    sample_id: usize,
    r_eq_first: Option<f64>,
    r_eq_last: Option<f64>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| PipelineError::io(path, e))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| PipelineError::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).unwrap();
    for row in rows {
        w.write_record(&row).unwrap();
    }
    w.into_inner().unwrap()
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Outcome<T> {
    Ok(T),
    Err { error: String },
}

#[derive(Debug, Serialize)]
struct DurationSensitivity {
    duration_days: u32,
    #[serde(flatten)]
    outcome: Outcome<SensitivityReport>,
}

#[derive(Debug, Serialize)]
struct SampleConvergence {
    sample_id: usize,
    #[serde(flatten)]
    outcome: Outcome<ConvergenceVerdict>,
}

#[derive(Debug, Serialize)]
struct ConvergenceSummary {
    threshold_pct: f64,
    assessable: usize,
    criterion_24h_met: usize,
    criterion_min_duration_met: usize,
    criterion_two_thirds_met: usize,
    samples: Vec<SampleConvergence>,
}

/// Variability, sensitivity and convergence tables plus plot-ready data.
pub fn cmd_report(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<(), PipelineError> {
    let started = Instant::now();
    let out = &cfg.output_dir;
    let estimates: Vec<EstimateRecord> = read_csv(&manifest.artifact(SWEEP_STAGE, ESTIMATES_FILE, out)?)?;
    let two_thirds: Vec<TwoThirdsRecord> = read_csv(&manifest.artifact(SWEEP_STAGE, TWO_THIRDS_FILE, out)?)?;
    let target = load_target(&manifest.artifact(TARGET_STAGE, TARGET_FILE, out)?)?.r_eq_star;
    let plan_path = manifest.artifact(WEATHER_STAGE, PLAN_FILE, out)?;
    let plan = SamplePlan::from_json(&std::fs::read_to_string(&plan_path).map_err(|e| PipelineError::io(&plan_path, e))?)
        .map_err(|e| PipelineError::Dependency(e.to_string()))?;
    if estimates.is_empty() {
        return Err(PipelineError::Stage("estimates table is empty".into()));
    }

    let mut by_duration: BTreeMap<u32, Vec<&EstimateRecord>> = BTreeMap::new();
    for e in &estimates {
        by_duration.entry(e.duration_days).or_default().push(e);
    }

    let mut variability = Vec::new();
    for (&d, rows) in &by_duration {
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|e| e.converged)
            .filter_map(|e| Some((e.r_eq?, e.interpretability?)))
            .collect();
        match summarize_variability(&pairs, d as f64) {
            Ok(s) => variability.push(vec![
                d.to_string(),
                s.count.to_string(),
                s.median.to_string(),
                s.std.to_string(),
                s.q05.to_string(),
                s.q95.to_string(),
                s.fraction_within_10pct_of_median.to_string(),
                s.fraction_interpretability_ge_05.to_string(),
            ]),
            Err(e) => log::warn!("no variability row for {d} days: {e}"),
        }
    }

    let mut sensitivity_rows = Vec::new();
    let mut sensitivity = Vec::new();
    for (&d, rows) in &by_duration {
        let mut outputs = vec![None; plan.rows.len()];
        for e in rows {
            if e.converged && e.sample_id < outputs.len() {
                outputs[e.sample_id] = e.r_eq;
            }
        }
        let seed = crate::seeds::derive_seed("sensitivity", &[cfg.master_seed, d as u64]);
        let outcome = match run_sensitivity(&outputs, &plan, d as f64, seed) {
            Ok(report) => {
                if report.unreliable {
                    log::warn!("sensitivity at {d} days is unreliable: {} failed rows", report.failed_rows);
                }
                for g in &report.groups {
                    sensitivity_rows.push(vec![
                        d.to_string(),
                        g.group.id().to_string(),
                        g.s1.to_string(),
                        g.se.to_string(),
                        g.partial_variance.to_string(),
                        report.total_variance.to_string(),
                        report.n_effective.to_string(),
                    ]);
                }
                Outcome::Ok(report)
            }
            Err(e) => {
                log::warn!("sensitivity at {d} days: {e}");
                Outcome::Err { error: e.to_string() }
            }
        };
        sensitivity.push(DurationSensitivity {
            duration_days: d,
            outcome,
        });
    }

    let thirds: BTreeMap<usize, (Option<f64>, Option<f64>)> =
        two_thirds.iter().map(|t| (t.sample_id, (t.r_eq_first, t.r_eq_last))).collect();
    let mut samples = Vec::new();
    for r in 0..plan.n {
        let sample_id = plan.row_index(Block::A, r);
        let series: Vec<(f64, f64)> = estimates
            .iter()
            .filter(|e| e.sample_id == sample_id && e.converged)
            .filter_map(|e| Some((e.duration_days as f64, e.r_eq?)))
            .collect();
        let pair = thirds.get(&sample_id).and_then(|&(a, b)| Some((a?, b?)));
        let outcome = match iso9869_convergence(&series, cfg.analysis.convergence_threshold_pct, pair) {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Err { error: e.to_string() },
        };
        samples.push(SampleConvergence { sample_id, outcome });
    }
    let verdicts: Vec<&ConvergenceVerdict> = samples
        .iter()
        .filter_map(|s| match &s.outcome {
            Outcome::Ok(v) => Some(v),
            Outcome::Err { .. } => None,
        })
        .collect();
    let convergence = ConvergenceSummary {
        threshold_pct: cfg.analysis.convergence_threshold_pct,
        assessable: verdicts.len(),
        criterion_24h_met: verdicts.iter().filter(|v| v.criterion_24h_met).count(),
        criterion_min_duration_met: verdicts.iter().filter(|v| v.criterion_min_duration_met).count(),
        criterion_two_thirds_met: verdicts.iter().filter(|v| v.criterion_two_thirds_met == Some(true)).count(),
        samples,
    };

    let converged: Vec<&EstimateRecord> = estimates.iter().filter(|e| e.converged && e.r_eq.is_some()).collect();
    let scatter = converged.iter().map(|e| {
        let (r, s) = (e.r_eq.unwrap(), e.sigma.unwrap_or(f64::NAN));
        vec![
            e.sample_id.to_string(),
            e.duration_days.to_string(),
            r.to_string(),
            s.to_string(),
            (r - s).to_string(),
            (r + s).to_string(),
            target.to_string(),
        ]
    });
    let bins = cfg.analysis.histogram_bins;
    let mut histogram = Vec::new();
    for (&d, rows) in &by_duration {
        let mut counts = vec![0usize; bins];
        for v in rows.iter().filter_map(|e| e.interpretability) {
            counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            histogram.push(vec![
                d.to_string(),
                (b as f64 / bins as f64).to_string(),
                ((b + 1) as f64 / bins as f64).to_string(),
                c.to_string(),
            ]);
        }
    }
    let weather_scatter = converged.iter().map(|e| {
        vec![
            e.sample_id.to_string(),
            e.duration_days.to_string(),
            e.mean_t_out.to_string(),
            e.mean_wind.to_string(),
            e.r_eq.unwrap().to_string(),
        ]
    });

    let files: [(&str, Vec<u8>); 7] = [
        (
            REPORT_FILES[0],
            csv_bytes(
                &[
                    "duration_days",
                    "count",
                    "median",
                    "std",
                    "q05",
                    "q95",
                    "fraction_within_10pct_of_median",
                    "fraction_interpretability_ge_05",
                ],
                variability,
            ),
        ),
        (
            REPORT_FILES[1],
            csv_bytes(
                &["duration_days", "group", "s1", "se", "partial_variance", "total_variance", "n_effective"],
                sensitivity_rows,
            ),
        ),
        (REPORT_FILES[2], serde_json::to_vec_pretty(&sensitivity).unwrap()),
        (REPORT_FILES[3], serde_json::to_vec_pretty(&convergence).unwrap()),
        (
            REPORT_FILES[4],
            csv_bytes(
                &["sample_id", "duration_days", "r_eq", "sigma", "lower", "upper", "target"],
                scatter,
            ),
        ),
        (
            REPORT_FILES[5],
            csv_bytes(&["duration_days", "bin_lower", "bin_upper", "count"], histogram),
        ),
        (
            REPORT_FILES[6],
            csv_bytes(&["sample_id", "duration_days", "mean_t_out", "mean_wind", "r_eq"], weather_scatter),
        ),
    ];
    for (name, bytes) in &files {
        write_atomic(&out.join(name), bytes)?;
    }
    manifest.stages.insert(
        "report".to_string(),
        StageRecord {
            artifacts: REPORT_FILES.iter().map(|s| s.to_string()).collect(),
            wall_clock_s: started.elapsed().as_secs_f64(),
            cache_hit: false,
        },
    );
    Ok(())
}
