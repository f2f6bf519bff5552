use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::seeds::rng_for;
use crate::weather::{parse_time, TIME_FORMAT};

/// Standard deviations of the additive measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseLevels {
    /// °C, applied to both temperatures.
    pub temperature: f64,
    /// W
    pub power: f64,
    /// W/m²
    pub irradiance: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels {
            temperature: 0.2,
            power: 20.0,
            irradiance: 5.0,
        }
    }
}

/// Provenance stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub noisy: bool,
    pub noise_seed: Option<u64>,
    pub noise: Option<NoiseLevels>,
    pub spec_hash: Option<String>,
    pub weather_sample: Option<usize>,
    /// Start and end of the parent dataset if this is a subset.
    pub parent_window: Option<(String, String)>,
}

/// Uniform-step simulation output. Row `k` holds the instantaneous
/// temperatures and irradiance at `time(k)` and the mean heating power over
/// `[time(k), time(k+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub start: NaiveDateTime,
    pub step_s: u32,
    pub t_in: Vec<f64>,
    pub t_out: Vec<f64>,
    pub i_sol: Vec<f64>,
    pub p_h: Vec<f64>,
    pub meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    start: String,
    step_s: u32,
    rows: usize,
    #[serde(flatten)]
    meta: DatasetMeta,
}

impl SimDataset {
    pub fn len(&self) -> usize {
        self.t_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_in.is_empty()
    }

    pub fn time(&self, k: usize) -> NaiveDateTime {
        self.start + Duration::seconds(k as i64 * self.step_s as i64)
    }

    /// Exclusive end of the covered interval.
    pub fn end(&self) -> NaiveDateTime {
        self.time(self.len())
    }

    pub fn duration_days(&self) -> f64 {
        self.len() as f64 * self.step_s as f64 / 86_400.0
    }

    pub fn slice(&self, from: usize, to: usize) -> SimDataset {
        SimDataset {
            start: self.time(from),
            step_s: self.step_s,
            t_in: self.t_in[from..to].to_vec(),
            t_out: self.t_out[from..to].to_vec(),
            i_sol: self.i_sol[from..to].to_vec(),
            p_h: self.p_h[from..to].to_vec(),
            meta: self.meta.clone(),
        }
    }

    fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes `path` as CSV and a JSON sidecar with the same stem.
    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let io = |e: std::io::Error| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "time,t_in,t_out,i_sol,p_h").map_err(io)?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{:.6},{:.6},{:.6},{:.6}",
                self.time(k).format(TIME_FORMAT),
                self.t_in[k],
                self.t_out[k],
                self.i_sol[k],
                self.p_h[k]
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
        let sidecar = Sidecar {
            start: self.start.format(TIME_FORMAT).to_string(),
            step_s: self.step_s,
            rows: self.len(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises");
        std::fs::write(Self::sidecar_path(path), json).map_err(io)
    }

    pub fn load(path: &Path) -> Result<SimDataset, SimError> {
        let io = |e: std::io::Error| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let text = std::fs::read_to_string(Self::sidecar_path(path)).map_err(io)?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| SimError::Format(e.to_string()))?;
        let mut reader = csv::Reader::from_path(path).map_err(|e| SimError::Format(e.to_string()))?;
        let mut cols: [Vec<f64>; 4] = Default::default();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| SimError::Format(e.to_string()))?;
            if rec.len() != 5 {
                return Err(SimError::Format(format!("row {} has {} fields", i + 1, rec.len())));
            }
            for (c, col) in cols.iter_mut().enumerate() {
                let v: f64 = rec[c + 1]
                    .trim()
                    .parse()
                    .map_err(|_| SimError::Format(format!("row {}: bad number `{}`", i + 1, &rec[c + 1])))?;
                col.push(v);
            }
        }
        let [t_in, t_out, i_sol, p_h] = cols;
        if t_in.len() != sidecar.rows {
            return Err(SimError::Format(format!(
                "sidecar declares {} rows, csv has {}",
                sidecar.rows,
                t_in.len()
            )));
        }
        let start = parse_time(&sidecar.start).ok_or_else(|| SimError::Format(format!("bad start `{}`", sidecar.start)))?;
        Ok(SimDataset {
            start,
            step_s: sidecar.step_s,
            t_in,
            t_out,
            i_sol,
            p_h,
            meta: sidecar.meta,
        })
    }
}

/// Adds independent Gaussian noise. Refuses datasets that are already noisy.
pub fn add_measurement_noise(ds: &SimDataset, seed: u64, levels: NoiseLevels) -> Result<SimDataset, SimError> {
    if ds.meta.noisy {
        return Err(SimError::State("dataset already carries measurement noise".into()));
    }
    let mut rng = rng_for("measurement-noise", &[seed]);
    let mut out = ds.clone();
    let columns: [(&mut Vec<f64>, f64); 4] = [
        (&mut out.t_in, levels.temperature),
        (&mut out.t_out, levels.temperature),
        (&mut out.i_sol, levels.irradiance),
        (&mut out.p_h, levels.power),
    ];
    for (col, sigma) in columns {
        if sigma > 0.0 {
            let dist = Normal::new(0.0, sigma).map_err(|e| SimError::State(e.to_string()))?;
            for v in col.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }
    }
    out.meta.noisy = true;
    out.meta.noise_seed = Some(seed);
    out.meta.noise = Some(levels);
    Ok(out)
}

/// Contiguous block of `days` starting at `start`.
pub fn extract_subset(ds: &SimDataset, start: NaiveDateTime, days: f64) -> Result<SimDataset, SimError> {
    if !(days > 0.0) {
        return Err(SimError::Range(format!("subset duration must be positive, got {days}")));
    }
    let offset = (start - ds.start).num_seconds();
    if offset < 0 || offset % ds.step_s as i64 != 0 {
        return Err(SimError::Range(format!(
            "subset start {start} is before the dataset or off the time grid"
        )));
    }
    let from = (offset / ds.step_s as i64) as usize;
    let rows = (days * 86_400.0 / ds.step_s as f64).round() as usize;
    if from + rows > ds.len() {
        return Err(SimError::Range(format!(
            "subset {start} + {days} d exceeds dataset end {}",
            ds.end()
        )));
    }
    let mut out = ds.slice(from, from + rows);
    out.meta.parent_window = Some((
        ds.start.format(TIME_FORMAT).to_string(),
        ds.end().format(TIME_FORMAT).to_string(),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(rows: usize) -> SimDataset {
        SimDataset {
            start: parse_time("2001-01-01T00:00:00").unwrap(),
            step_s: 600,
            t_in: vec![20.0; rows],
            t_out: vec![5.0; rows],
            i_sol: vec![0.0; rows],
            p_h: vec![500.0; rows],
            meta: DatasetMeta::default(),
        }
    }

    #[test]
    fn noise_statistics_and_double_noise_refusal() {
        let ds = flat(20_000);
        let noisy = add_measurement_noise(&ds, 4, NoiseLevels::default()).unwrap();
        let diffs: Vec<f64> = noisy.t_in.iter().map(|v| v - 20.0).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 0.01);
        assert!((sd - 0.2).abs() < 0.01);
        assert!(matches!(
            add_measurement_noise(&noisy, 5, NoiseLevels::default()),
            Err(SimError::State(_))
        ));
        assert_eq!(noisy, add_measurement_noise(&ds, 4, NoiseLevels::default()).unwrap());
    }

    #[test]
    fn two_day_subset_has_288_rows() {
        let ds = flat(6 * 24 * 10);
        let s = extract_subset(&ds, parse_time("2001-01-02T00:00:00").unwrap(), 2.0).unwrap();
        assert_eq!(s.len(), 288);
        assert_eq!(s.start, parse_time("2001-01-02T00:00:00").unwrap());
        assert!(extract_subset(&ds, parse_time("2001-01-10T00:00:00").unwrap(), 2.0).is_err());
        assert!(extract_subset(&ds, parse_time("2001-01-09T00:00:00").unwrap(), 2.0).is_ok());
        assert!(extract_subset(&ds, parse_time("2000-12-31T00:00:00").unwrap(), 2.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut ds = flat(10);
        ds.t_in[3] = 21.123456;
        ds.meta.spec_hash = Some("abc".into());
        ds.save(&path).unwrap();
        assert_eq!(SimDataset::load(&path).unwrap(), ds);
    }
}
