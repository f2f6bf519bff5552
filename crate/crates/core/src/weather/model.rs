use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{WeatherError, WeatherSeries, WeatherVariable};
use crate::seeds::rng_for;

const DAY_S: f64 = 86_400.0;
/// Shortest seasonal period resolved by the trend, in days.
const SEASONAL_RESOLUTION_DAYS: f64 = 15.0;
const QUANTILE_COUNT: usize = 99;
const MAX_PHI: f64 = 0.999;

/// Mean plus sinusoids: 24 h and 12 h harmonics and a Fourier series whose
/// fundamental is the span of the base record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTrend {
    pub mean: f64,
    /// `(period_s, cos coefficient, sin coefficient)`.
    pub harmonics: Vec<(f64, f64, f64)>,
}

impl HarmonicTrend {
    pub fn evaluate(&self, t_s: f64) -> f64 {
        self.harmonics.iter().fold(self.mean, |acc, &(p, a, b)| {
            let w = 2.0 * PI * t_s / p;
            acc + a * w.cos() + b * w.sin()
        })
    }

    /// Amplitude of the harmonic with the given period, if present.
    pub fn amplitude(&self, period_s: f64) -> Option<f64> {
        self.harmonics
            .iter()
            .find(|h| (h.0 - period_s).abs() < 1e-6)
            .map(|&(_, a, b)| a.hypot(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1 {
    pub phi: f64,
    /// Innovation standard deviation in the variable's units.
    pub sigma: f64,
}

/// Monotone table from standard-normal quantiles to residual quantiles,
/// linearly extrapolated beyond the end nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub gaussian: Vec<f64>,
    pub residual: Vec<f64>,
}

impl QuantileMap {
    pub fn map(&self, z: f64) -> f64 {
        let g = &self.gaussian;
        let r = &self.residual;
        let n = g.len();
        let seg = if z <= g[0] {
            0
        } else if z >= g[n - 1] {
            n - 2
        } else {
            g.partition_point(|&x| x <= z) - 1
        };
        let (g0, g1, r0, r1) = (g[seg], g[seg + 1], r[seg], r[seg + 1]);
        r0 + (z - g0) * (r1 - r0) / (g1 - g0)
    }

    pub fn is_monotone(&self) -> bool {
        self.residual.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Stochastic model of one weather variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableModel {
    pub variable: WeatherVariable,
    pub trend: HarmonicTrend,
    pub residual_ar1: Ar1,
    pub quantile_map: QuantileMap,
    pub bounds: (f64, f64),
    /// Set when the detrended series has no variance.
    pub degenerate: bool,
    pub len: usize,
    pub step_s: u32,
}

impl VariableModel {
    fn finish(&self, value: f64, base_value: f64) -> f64 {
        let v = match self.variable {
            WeatherVariable::WindDir => {
                let w = value.rem_euclid(360.0);
                if w >= 360.0 {
                    0.0
                } else {
                    w
                }
            }
            var if var.is_irradiance() && base_value <= 0.0 => 0.0,
            _ => value,
        };
        let (lo, hi) = self.bounds;
        if self.variable == WeatherVariable::WindDir {
            v
        } else {
            v.clamp(lo, hi)
        }
    }

    /// The trend reconstructed on the base grid, with the same wrapping,
    /// night masking and clamping applied to generated samples.
    pub fn trend_series(&self, base: &WeatherSeries) -> Vec<f64> {
        let base_values = base.values(self.variable);
        base.elapsed_seconds()
            .iter()
            .zip(base_values)
            .map(|(&t, &b)| self.finish(self.trend.evaluate(t), b))
            .collect()
    }
}

fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fits trend, AR(1) residual and quantile map for one variable.
pub fn fit_variable_model(base: &WeatherSeries, variable: WeatherVariable) -> Result<VariableModel, WeatherError> {
    let n = base.len();
    let span_s = n as f64 * base.step_s as f64;
    if span_s < 7.0 * DAY_S {
        return Err(WeatherError::InsufficientData(format!(
            "{variable}: {:.2} days of data, at least 7 required",
            span_s / DAY_S
        )));
    }
    let y = base.values(variable);
    let t = base.elapsed_seconds();

    let mut periods = vec![DAY_S, DAY_S / 2.0];
    let seasonal = (span_s / DAY_S / SEASONAL_RESOLUTION_DAYS).floor() as usize;
    periods.extend((1..=seasonal).map(|k| span_s / k as f64));

    let cols = 1 + 2 * periods.len();
    let design = DMatrix::from_fn(n, cols, |i, j| {
        if j == 0 {
            1.0
        } else {
            let p = periods[(j - 1) / 2];
            let w = 2.0 * PI * t[i] / p;
            if (j - 1) % 2 == 0 {
                w.cos()
            } else {
                w.sin()
            }
        }
    });
    let rhs = DVector::from_column_slice(y);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| WeatherError::Argument(format!("{variable}: trend fit failed: {e}")))?;
    let trend = HarmonicTrend {
        mean: coef[0],
        harmonics: periods
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, coef[1 + 2 * k], coef[2 + 2 * k]))
            .collect(),
    };
    let fitted = &design * &coef;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();

    let scale = y.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
    let var = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let degenerate = var.sqrt() <= 1e-9 * scale;

    let gaussian: Vec<f64> = {
        let normal = Normal::standard();
        (1..=QUANTILE_COUNT)
            .map(|k| normal.inverse_cdf(k as f64 / (QUANTILE_COUNT + 1) as f64))
            .collect()
    };

    let (residual_ar1, residual_q) = if degenerate {
        (Ar1 { phi: 0.0, sigma: 0.0 }, vec![0.0; QUANTILE_COUNT])
    } else {
        let num: f64 = residuals.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = residuals[..n - 1].iter().map(|r| r * r).sum();
        let phi = (num / den).clamp(-MAX_PHI, MAX_PHI);
        let innov: Vec<f64> = residuals.windows(2).map(|w| w[1] - phi * w[0]).collect();
        let mean_i = innov.iter().sum::<f64>() / innov.len() as f64;
        let sigma = (innov.iter().map(|e| (e - mean_i).powi(2)).sum::<f64>() / (innov.len() - 1) as f64).sqrt();
        let mut sorted = residuals.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let q = (1..=QUANTILE_COUNT)
            .map(|k| type7_quantile(&sorted, k as f64 / (QUANTILE_COUNT + 1) as f64))
            .collect();
        (Ar1 { phi, sigma }, q)
    };

    Ok(VariableModel {
        variable,
        trend,
        residual_ar1,
        quantile_map: QuantileMap {
            gaussian,
            residual: residual_q,
        },
        bounds: variable.bounds(),
        degenerate,
        len: n,
        step_s: base.step_s,
    })
}

/// Generates one perturbed weather series.
///
/// `group_seeds[i]` drives variable `WeatherVariable::ALL[i]`; `models` must
/// be given in the same order. With `amplitude = 0` every variable equals its
/// [`VariableModel::trend_series`].
pub fn sample_weather(
    models: &[VariableModel],
    base: &WeatherSeries,
    group_seeds: &[u64; 6],
    amplitude: f64,
) -> Result<WeatherSeries, WeatherError> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(WeatherError::Argument(format!("amplitude must be finite and >= 0, got {amplitude}")));
    }
    if models.len() != 6 {
        return Err(WeatherError::Argument(format!("expected 6 variable models, got {}", models.len())));
    }
    let mut out = base.clone();
    let t = base.elapsed_seconds();
    for (slot, var) in WeatherVariable::ALL.into_iter().enumerate() {
        let model = &models[slot];
        if model.variable != var {
            return Err(WeatherError::Argument(format!(
                "model {slot} is for {}, expected {var}",
                model.variable
            )));
        }
        if model.len != base.len() || model.step_s != base.step_s {
            return Err(WeatherError::Argument(format!(
                "model for {var} was fitted on {} steps of {} s, base has {} steps of {} s",
                model.len,
                model.step_s,
                base.len(),
                base.step_s
            )));
        }
        let mut rng = rng_for("weather-variable", &[group_seeds[slot], slot as u64]);
        let phi = model.residual_ar1.phi;
        let innov_scale = (1.0 - phi * phi).sqrt();
        let base_values = base.values(var);
        let values = out.values_mut(var);
        let mut z: f64 = rng.sample(StandardNormal);
        for k in 0..values.len() {
            if k > 0 {
                let e: f64 = rng.sample(StandardNormal);
                z = phi * z + innov_scale * e;
            }
            let residual = model.quantile_map.map(z);
            let raw = model.trend.evaluate(t[k]) + amplitude * residual;
            values[k] = model.finish(raw, base_values[k]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::series::parse_time;
    use crate::weather::Site;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hourly(days: usize, f: impl Fn(usize) -> f64) -> WeatherSeries {
        let start = parse_time("2001-01-01T00:00:00").unwrap();
        let n = days * 24;
        let mut ws = WeatherSeries::constant(start, 3600, n, [0.0, 70.0, 0.0, 0.0, 2.0, 180.0], Site::default());
        ws.t_out = (0..n).map(f).collect();
        ws
    }

    #[test]
    fn pure_sinusoid_is_recovered_exactly() {
        let ws = hourly(30, |k| 5.0 + 3.0 * (2.0 * PI * k as f64 / 24.0).sin());
        let m = fit_variable_model(&ws, WeatherVariable::TOut).unwrap();
        assert!((m.trend.amplitude(DAY_S).unwrap() - 3.0).abs() < 1e-6);
        assert!((m.trend.mean - 5.0).abs() < 1e-6);
        assert!(m.residual_ar1.sigma < 1e-6);
        assert!(m.degenerate);
    }

    #[test]
    fn white_noise_gives_small_phi_and_unit_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise: Vec<f64> = (0..30 * 24).map(|_| rng.sample(StandardNormal)).collect();
        let ws = hourly(30, |k| noise[k]);
        let m = fit_variable_model(&ws, WeatherVariable::TOut).unwrap();
        assert!(m.residual_ar1.phi.abs() < 0.1, "phi {}", m.residual_ar1.phi);
        assert!((m.residual_ar1.sigma - 1.0).abs() < 0.1, "sigma {}", m.residual_ar1.sigma);
        assert!(m.quantile_map.is_monotone());
    }

    #[test]
    fn ar1_coefficient_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = 0.0;
        let series: Vec<f64> = (0..30 * 24)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = 0.8 * x + e;
                x
            })
            .collect();
        let ws = hourly(30, |k| series[k]);
        let m = fit_variable_model(&ws, WeatherVariable::TOut).unwrap();
        assert!((0.7..=0.9).contains(&m.residual_ar1.phi), "phi {}", m.residual_ar1.phi);
    }

    #[test]
    fn short_base_is_rejected_and_constant_is_degenerate() {
        let ws = hourly(6, |_| 1.0);
        assert!(matches!(
            fit_variable_model(&ws, WeatherVariable::TOut),
            Err(WeatherError::InsufficientData(_))
        ));
        let ws = hourly(10, |_| 1.0);
        let m = fit_variable_model(&ws, WeatherVariable::TOut).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.residual_ar1.sigma, 0.0);
    }

    #[test]
    fn quantile_map_extrapolates_monotonically() {
        let q = QuantileMap {
            gaussian: vec![-1.0, 0.0, 1.0],
            residual: vec![-2.0, 0.0, 4.0],
        };
        assert_eq!(q.map(0.5), 2.0);
        assert_eq!(q.map(-2.0), -4.0);
        assert_eq!(q.map(2.0), 8.0);
    }
}
