use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::WeatherError;

pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// The six stochastic weather variables, in group order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherVariable {
    TOut,
    Rh,
    IDn,
    IDh,
    WindSpeed,
    WindDir,
}

impl WeatherVariable {
    pub const ALL: [WeatherVariable; 6] = [
        WeatherVariable::TOut,
        WeatherVariable::Rh,
        WeatherVariable::IDn,
        WeatherVariable::IDh,
        WeatherVariable::WindSpeed,
        WeatherVariable::WindDir,
    ];

    /// Column name in the CSV schema.
    pub fn id(self) -> &'static str {
        match self {
            WeatherVariable::TOut => "t_out",
            WeatherVariable::Rh => "rh",
            WeatherVariable::IDn => "i_dn",
            WeatherVariable::IDh => "i_dh",
            WeatherVariable::WindSpeed => "wind_speed",
            WeatherVariable::WindDir => "wind_dir",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.id() == id)
    }

    /// Physical clamp range.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            WeatherVariable::TOut => (-60.0, 60.0),
            WeatherVariable::Rh => (0.0, 100.0),
            WeatherVariable::IDn => (0.0, 1400.0),
            WeatherVariable::IDh => (0.0, 800.0),
            WeatherVariable::WindSpeed => (0.0, 60.0),
            WeatherVariable::WindDir => (0.0, 360.0),
        }
    }

    pub fn is_irradiance(self) -> bool {
        matches!(self, WeatherVariable::IDn | WeatherVariable::IDh)
    }

    fn check(self, value: f64) -> Result<(), String> {
        if !value.is_finite() {
            return Err("value is not finite".into());
        }
        let ok = match self {
            WeatherVariable::TOut => true,
            WeatherVariable::Rh => (0.0..=100.0).contains(&value),
            WeatherVariable::IDn | WeatherVariable::IDh | WeatherVariable::WindSpeed => value >= 0.0,
            WeatherVariable::WindDir => (0.0..360.0).contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{value} is outside the admissible range"))
        }
    }
}

impl fmt::Display for WeatherVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Geographic location used for solar geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    /// Degrees north.
    pub latitude: f64,
    /// Degrees east.
    pub longitude: f64,
    /// Hours ahead of UTC of the local standard time used by the timestamps.
    pub utc_offset: f64,
}

impl Default for Site {
    /// Geneva.
    fn default() -> Self {
        Site {
            latitude: 46.2,
            longitude: 6.13,
            utc_offset: 1.0,
        }
    }
}

/// Six aligned weather series on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub start: NaiveDateTime,
    pub step_s: u32,
    pub t_out: Vec<f64>,
    pub rh: Vec<f64>,
    pub i_dn: Vec<f64>,
    pub i_dh: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub wind_dir: Vec<f64>,
    pub site: Site,
}

impl WeatherSeries {
    /// A series with every variable held constant.
    pub fn constant(start: NaiveDateTime, step_s: u32, len: usize, values: [f64; 6], site: Site) -> Self {
        WeatherSeries {
            start,
            step_s,
            t_out: vec![values[0]; len],
            rh: vec![values[1]; len],
            i_dn: vec![values[2]; len],
            i_dh: vec![values[3]; len],
            wind_speed: vec![values[4]; len],
            wind_dir: vec![values[5]; len],
            site,
        }
    }

    pub fn len(&self) -> usize {
        self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out.is_empty()
    }

    pub fn values(&self, var: WeatherVariable) -> &[f64] {
        match var {
            WeatherVariable::TOut => &self.t_out,
            WeatherVariable::Rh => &self.rh,
            WeatherVariable::IDn => &self.i_dn,
            WeatherVariable::IDh => &self.i_dh,
            WeatherVariable::WindSpeed => &self.wind_speed,
            WeatherVariable::WindDir => &self.wind_dir,
        }
    }

    pub fn values_mut(&mut self, var: WeatherVariable) -> &mut Vec<f64> {
        match var {
            WeatherVariable::TOut => &mut self.t_out,
            WeatherVariable::Rh => &mut self.rh,
            WeatherVariable::IDn => &mut self.i_dn,
            WeatherVariable::IDh => &mut self.i_dh,
            WeatherVariable::WindSpeed => &mut self.wind_speed,
            WeatherVariable::WindDir => &mut self.wind_dir,
        }
    }

    pub fn time_at(&self, k: usize) -> NaiveDateTime {
        self.start + Duration::seconds(self.step_s as i64 * k as i64)
    }

    /// Timestamp of the last sample.
    pub fn end(&self) -> NaiveDateTime {
        self.time_at(self.len().saturating_sub(1))
    }

    /// Seconds elapsed since `start` for every sample.
    pub fn elapsed_seconds(&self) -> Vec<f64> {
        (0..self.len()).map(|k| (k as u64 * self.step_s as u64) as f64).collect()
    }

    /// Linear interpolation of one variable at an arbitrary time. Returns
    /// `None` outside the covered range. Wind direction is interpolated on
    /// the circle.
    pub fn interpolate(&self, var: WeatherVariable, t: NaiveDateTime) -> Option<f64> {
        let dt = (t - self.start).num_milliseconds() as f64 / 1000.0;
        if dt < 0.0 || self.is_empty() {
            return None;
        }
        let pos = dt / self.step_s as f64;
        let k = pos.floor() as usize;
        let values = self.values(var);
        if k + 1 >= values.len() {
            return if k + 1 == values.len() && pos == k as f64 { Some(values[k]) } else { None };
        }
        let w = pos - k as f64;
        let (a, b) = (values[k], values[k + 1]);
        if var == WeatherVariable::WindDir {
            let mut d = b - a;
            if d > 180.0 {
                d -= 360.0;
            } else if d < -180.0 {
                d += 360.0;
            }
            Some((a + w * d).rem_euclid(360.0))
        } else {
            Some(a + w * (b - a))
        }
    }

    /// Checks the type invariants.
    pub fn validate(&self) -> Result<(), WeatherError> {
        if self.step_s == 0 {
            return Err(WeatherError::Format("time step must be positive".into()));
        }
        let n = self.len();
        if n == 0 {
            return Err(WeatherError::InsufficientData("weather series is empty".into()));
        }
        for var in WeatherVariable::ALL {
            let values = self.values(var);
            if values.len() != n {
                return Err(WeatherError::Format(format!(
                    "column {var} has {} values, expected {n}",
                    values.len()
                )));
            }
            for (i, &v) in values.iter().enumerate() {
                var.check(v).map_err(|message| WeatherError::Validation {
                    row: i + 1,
                    column: var.id().to_string(),
                    message,
                })?;
            }
        }
        Ok(())
    }

    /// Writes the CSV schema `time,t_out,rh,i_dn,i_dh,wind_speed,wind_dir`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), WeatherError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| WeatherError::Format(e.to_string());
        w.write_record(["time", "t_out", "rh", "i_dn", "i_dh", "wind_speed", "wind_dir"])
            .map_err(io)?;
        for k in 0..self.len() {
            w.write_record([
                self.time_at(k).format(TIME_FORMAT).to_string(),
                format!("{:.4}", self.t_out[k]),
                format!("{:.4}", self.rh[k]),
                format!("{:.4}", self.i_dn[k]),
                format!("{:.4}", self.i_dh[k]),
                format!("{:.4}", self.wind_speed[k]),
                format!("{:.4}", self.wind_dir[k]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| WeatherError::Format(e.to_string()))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), WeatherError> {
        let file = std::fs::File::create(path).map_err(|source| WeatherError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M"))
        .ok()
}

/// Loads a weather CSV file. The site is not part of the file schema and is
/// supplied by the caller.
pub fn load_weather(path: &Path, site: Site) -> Result<WeatherSeries, WeatherError> {
    let file = std::fs::File::open(path).map_err(|source| WeatherError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_weather(std::io::BufReader::new(file), site)
}

/// Parses weather CSV from any reader.
pub fn read_weather<R: Read>(reader: R, site: Site) -> Result<WeatherSeries, WeatherError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| WeatherError::Format(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WeatherError::Schema(format!("missing column `{name}`")))
    };
    let time_col = find("time")?;
    let mut cols = [0usize; 6];
    for var in WeatherVariable::ALL {
        cols[var.index()] = find(var.id())?;
    }

    let mut times = Vec::new();
    let mut data: [Vec<f64>; 6] = Default::default();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| WeatherError::Format(format!("row {row}: {e}")))?;
        let t_raw = record.get(time_col).unwrap_or("");
        let t = parse_time(t_raw).ok_or_else(|| WeatherError::Validation {
            row,
            column: "time".into(),
            message: format!("cannot parse timestamp `{t_raw}`"),
        })?;
        times.push(t);
        for var in WeatherVariable::ALL {
            let raw = record.get(cols[var.index()]).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| WeatherError::Validation {
                row,
                column: var.id().into(),
                message: format!("cannot parse number `{raw}`"),
            })?;
            var.check(value).map_err(|message| WeatherError::Validation {
                row,
                column: var.id().into(),
                message,
            })?;
            data[var.index()].push(value);
        }
    }

    if times.is_empty() {
        return Err(WeatherError::InsufficientData("weather file has no rows".into()));
    }
    let step_s = if times.len() > 1 {
        let step = (times[1] - times[0]).num_seconds();
        if step <= 0 {
            return Err(WeatherError::Format("timestamps must be increasing".into()));
        }
        for (k, pair) in times.windows(2).enumerate() {
            let s = (pair[1] - pair[0]).num_seconds();
            if s != step {
                return Err(WeatherError::Format(format!(
                    "non-uniform time step between rows {} and {}: {s} s instead of {step} s",
                    k + 1,
                    k + 2
                )));
            }
        }
        step as u32
    } else {
        3600
    };

    let [t_out, rh, i_dn, i_dh, wind_speed, wind_dir] = data;
    Ok(WeatherSeries {
        start: times[0],
        step_s,
        t_out,
        rh,
        i_dn,
        i_dh,
        wind_speed,
        wind_dir,
        site,
    })
}
