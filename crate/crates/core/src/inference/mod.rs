//! Envelope resistance and its uncertainty from a calibrated model,
//! interpretability against a target value, residual whiteness and
//! duration-convergence criteria.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};
use thiserror::Error;

use crate::greybox::{Estimate, ModelKind};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("estimate did not converge: {0}")]
    NotConverged(String),
    #[error("autocorrelation undefined: {0}")]
    UndefinedAcf(String),
    #[error("convergence not assessable: {0}")]
    NotAssessable(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// How the resistance uncertainties are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    /// `√(σ_Ro² + σ_Ri² + 2 σ_Ro σ_Ri)`, i.e. perfectly correlated errors.
    #[default]
    PerfectCorrelation,
    /// Delta method with the full estimated covariance.
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReqEstimate {
    /// K/W
    pub r_eq: f64,
    /// K/W
    pub sigma: f64,
    pub duration_days: f64,
    pub weather_sample_id: Option<usize>,
    pub model: ModelKind,
    pub log_likelihood: f64,
}

/// Combination of two marginal standard deviations under perfect
/// positive correlation.
pub fn correlated_sigma(sigma_ro: f64, sigma_ri: f64) -> f64 {
    (sigma_ro * sigma_ro + sigma_ri * sigma_ri + 2.0 * sigma_ro * sigma_ri).sqrt()
}

pub fn infer_req(est: &Estimate, duration_days: f64, sample: Option<usize>) -> Result<ReqEstimate, InferenceError> {
    infer_req_with(est, duration_days, sample, SigmaMethod::PerfectCorrelation)
}

pub fn infer_req_with(
    est: &Estimate,
    duration_days: f64,
    sample: Option<usize>,
    method: SigmaMethod,
) -> Result<ReqEstimate, InferenceError> {
    if !est.converged {
        return Err(InferenceError::NotConverged(
            est.non_convergence_reason.clone().unwrap_or_else(|| "unknown reason".into()),
        ));
    }
    let idx = &est.resistance_indices;
    // Delta method for log-parameters: σ_R = R·σ_lnR.
    let jac: Vec<f64> = idx
        .iter()
        .map(|&i| if est.params[i].is_log() { est.values[i] } else { 1.0 })
        .collect();
    let cov = &est.covariance.matrix;
    let sigma = match method {
        SigmaMethod::PerfectCorrelation => {
            let marg: Vec<f64> = idx
                .iter()
                .zip(&jac)
                .map(|(&i, j)| j * cov[i][i].max(0.0).sqrt())
                .collect();
            match marg.as_slice() {
                [a] => *a,
                [a, b] => correlated_sigma(*a, *b),
                _ => marg.iter().sum(),
            }
        }
        SigmaMethod::Covariance => {
            let mut v = 0.0;
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    let c = cov[i][j];
                    if c.is_nan() {
                        v = f64::INFINITY;
                    } else {
                        v += jac[a] * jac[b] * c;
                    }
                }
            }
            v.max(0.0).sqrt()
        }
    };
    Ok(ReqEstimate {
        r_eq: est.r_eq(),
        sigma,
        duration_days,
        weather_sample_id: sample,
        model: est.model,
        log_likelihood: est.log_likelihood,
    })
}

/// Gaussian probability mass of `N(r_eq, σ²)` inside `[0.95, 1.05]·target`.
pub fn interpretability(r_eq: f64, sigma: f64, target: f64) -> f64 {
    let (lo, hi) = (0.95 * target, 1.05 * target);
    if sigma == 0.0 {
        return if (lo..=hi).contains(&r_eq) { 1.0 } else { 0.0 };
    }
    if !sigma.is_finite() {
        return 0.0;
    }
    let phi = Normal::standard();
    let upper = (hi - r_eq) / sigma;
    let lower = (lo - r_eq) / sigma;
    // Use the upper tail when both edges are far right to keep precision.
    let mass = if lower > 0.0 {
        phi.sf(lower) - phi.sf(upper)
    } else {
        phi.cdf(upper) - phi.cdf(lower)
    };
    mass.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfReport {
    /// Lags `0..=max_lag`.
    pub acf: Vec<f64>,
    /// `1.96/√N`
    pub bound: f64,
    pub exceedances: usize,
    /// Largest exceedance count still judged white.
    pub allowed: usize,
    pub white: bool,
}

/// Sample autocorrelation with a whiteness verdict.
///
/// A lag exceeds when `|ACF(k)| > 1.96/√N`. The series is judged white if
/// the exceedance count over lags `1..=max_lag` is at most the larger of
/// `⌊0.07·max_lag⌋` and the 95 % quantile of `Binomial(max_lag, 0.05)`.
pub fn residual_autocorrelation(residuals: &[f64], max_lag: usize) -> Result<AcfReport, InferenceError> {
    let n = residuals.len();
    if max_lag == 0 || n < 3 * max_lag {
        return Err(InferenceError::Argument(format!(
            "{n} residuals are too few for {max_lag} lags"
        )));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
    let c0: f64 = centred.iter().map(|v| v * v).sum();
    if !(c0 > 1e-300) || !c0.is_finite() {
        return Err(InferenceError::UndefinedAcf("residuals are constant".into()));
    }
    let acf: Vec<f64> = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                centred[..n - k].iter().zip(&centred[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect();
    let bound = 1.96 / (n as f64).sqrt();
    let exceedances = acf[1..].iter().filter(|v| v.abs() > bound).count();
    let allowed = whiteness_allowance(max_lag);
    Ok(AcfReport {
        acf,
        bound,
        exceedances,
        allowed,
        white: exceedances <= allowed,
    })
}

fn whiteness_allowance(lags: usize) -> usize {
    let by_fraction = (0.07 * lags as f64).floor() as usize;
    let binom = Binomial::new(0.05, lags as u64).expect("valid binomial");
    let by_quantile = (0..=lags as u64).find(|&c| binom.cdf(c) >= 0.95).unwrap_or(lags as u64) as usize;
    by_fraction.max(by_quantile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub durations: Vec<f64>,
    /// `(R_i - R_{i-1})/R_{i-1}·100` for each consecutive pair.
    pub pairwise_deviations: Vec<f64>,
    /// Some consecutive pair deviates by at most the threshold.
    pub criterion_24h_met: bool,
    pub first_pass_duration: Option<f64>,
    /// The first passing duration is at least 72 h.
    pub criterion_min_duration_met: bool,
    /// `None` when no first/last two-thirds estimates were supplied.
    pub criterion_two_thirds_met: Option<bool>,
    pub two_thirds_deviation: Option<f64>,
    pub threshold_pct: f64,
}

/// Duration-convergence check on estimates ordered by duration.
/// `two_thirds` optionally carries the estimates from the first and last
/// `⌈2N/3⌉` days of the longest dataset.
pub fn iso9869_convergence(
    series: &[(f64, f64)],
    threshold_pct: f64,
    two_thirds: Option<(f64, f64)>,
) -> Result<ConvergenceVerdict, InferenceError> {
    if series.len() < 2 {
        return Err(InferenceError::NotAssessable(format!(
            "{} estimate(s); at least two durations are needed",
            series.len()
        )));
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(InferenceError::Argument("durations must be strictly increasing".into()));
    }
    if series.iter().any(|(_, r)| !(r.is_finite() && *r > 0.0)) {
        return Err(InferenceError::Argument("resistances must be positive and finite".into()));
    }
    let deviation = |prev: f64, next: f64| (next - prev) / prev * 100.0;
    let pairwise: Vec<f64> = series.windows(2).map(|w| deviation(w[0].1, w[1].1)).collect();
    let first_pass = pairwise
        .iter()
        .position(|d| d.abs() <= threshold_pct)
        .map(|i| series[i + 1].0);
    let two = two_thirds.map(|(first, last)| deviation(first, last));
    Ok(ConvergenceVerdict {
        durations: series.iter().map(|s| s.0).collect(),
        pairwise_deviations: pairwise,
        criterion_24h_met: first_pass.is_some(),
        first_pass_duration: first_pass,
        criterion_min_duration_met: first_pass.is_some_and(|d| d >= 3.0),
        criterion_two_thirds_met: two.map(|d| d.abs() <= threshold_pct),
        two_thirds_deviation: two,
        threshold_pct,
    })
}

/// Length in days of the first and last sub-windows of the two-thirds check.
pub fn two_thirds_days(longest_days: f64) -> f64 {
    (2.0 * longest_days / 3.0).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlated_sigma_examples() {
        assert!((correlated_sigma(0.1, 0.2) - 0.3).abs() < 1e-12);
        assert_eq!(correlated_sigma(0.0, 0.0), 0.0);
    }

    #[test]
    fn interpretability_edges() {
        assert_eq!(interpretability(5.0, 0.0, 5.0), 1.0);
        assert_eq!(interpretability(5.3, 0.0, 5.0), 0.0);
        assert!(interpretability(10.0, 0.05, 5.0) <= 1e-12);
        assert_eq!(interpretability(5.0, f64::INFINITY, 5.0), 0.0);
    }

    #[test]
    fn iso_examples() {
        let v = iso9869_convergence(&[(2.0, 5.0), (3.0, 5.1)], 5.0, None).unwrap();
        assert!((v.pairwise_deviations[0] - 2.0).abs() < 1e-9);
        assert_eq!(v.first_pass_duration, Some(3.0));
        assert!(v.criterion_min_duration_met);
        let v = iso9869_convergence(&[(2.0, 5.0), (3.0, 5.5)], 5.0, None).unwrap();
        assert!((v.pairwise_deviations[0] - 10.0).abs() < 1e-9);
        assert!(!v.criterion_24h_met);
        assert!(matches!(
            iso9869_convergence(&[(2.0, 5.0)], 5.0, None),
            Err(InferenceError::NotAssessable(_))
        ));
    }

    #[test]
    fn allowance_for_fifty_lags() {
        assert_eq!(whiteness_allowance(50), 5);
        assert_eq!(two_thirds_days(25.0), 17.0);
    }
}
