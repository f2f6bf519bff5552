use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use super::discretize::{discretize, DiscreteSystem};
use super::models::{continuous_matrices, RcParameters};
use super::GreyboxError;
use crate::refsim::SimDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub log_likelihood: f64,
    /// One-step prediction residuals `ν_k`.
    pub residuals: Vec<f64>,
    /// Innovation variances `S_k`.
    pub variances: Vec<f64>,
}

/// Kalman filter over `y` with inputs `u` held over `[t_k, t_{k+1})`.
/// At each step the prior is updated with `y_k`, then propagated.
pub fn kalman_filter(sys: &DiscreteSystem, y: &[f64], u: &[[f64; 3]]) -> Result<FilterOutput, GreyboxError> {
    if y.len() != u.len() {
        return Err(GreyboxError::InsufficientData(format!(
            "{} observations but {} input rows",
            y.len(),
            u.len()
        )));
    }
    match sys.ad.nrows() {
        1 => filter_static::<1>(sys, y, u, true),
        2 => filter_static::<2>(sys, y, u, true),
        3 => filter_static::<3>(sys, y, u, true),
        n => Err(GreyboxError::Parameters(format!("unsupported state dimension {n}"))),
    }
}

/// Log-likelihood only; skips storing residuals.
pub(crate) fn loglik_only(sys: &DiscreteSystem, y: &[f64], u: &[[f64; 3]]) -> Result<f64, GreyboxError> {
    let out = match sys.ad.nrows() {
        1 => filter_static::<1>(sys, y, u, false),
        2 => filter_two(sys, y, u),
        3 => filter_static::<3>(sys, y, u, false),
        n => return Err(GreyboxError::Parameters(format!("unsupported state dimension {n}"))),
    }?;
    Ok(out.log_likelihood)
}

fn filter_static<const N: usize>(
    sys: &DiscreteSystem,
    y: &[f64],
    u: &[[f64; 3]],
    keep: bool,
) -> Result<FilterOutput, GreyboxError> {
    let ad = SMatrix::<f64, N, N>::from_fn(|i, j| sys.ad[(i, j)]);
    let bd = SMatrix::<f64, N, 3>::from_fn(|i, j| sys.bd[(i, j)]);
    let qd = SMatrix::<f64, N, N>::from_fn(|i, j| sys.qd[(i, j)]);
    let c = SVector::<f64, N>::from_fn(|i, _| sys.c[i]);
    let mut x = SVector::<f64, N>::from_fn(|i, _| sys.x0[i]);
    let mut p = SMatrix::<f64, N, N>::from_fn(|i, j| sys.p0[(i, j)]);
    let ln2pi = (2.0 * PI).ln();

    let mut out = FilterOutput {
        log_likelihood: 0.0,
        residuals: Vec::with_capacity(if keep { y.len() } else { 0 }),
        variances: Vec::with_capacity(if keep { y.len() } else { 0 }),
    };
    for k in 0..y.len() {
        let pc = p * c;
        let s = c.dot(&pc) + sys.r;
        let nu = y[k] - c.dot(&x);
        if !(s > 0.0) || !nu.is_finite() || !s.is_finite() {
            return Err(GreyboxError::Numerical {
                step: k,
                message: format!("innovation variance {s}, residual {nu}"),
            });
        }
        out.log_likelihood += -0.5 * (ln2pi + s.ln() + nu * nu / s);
        if keep {
            out.residuals.push(nu);
            out.variances.push(s);
        }
        let gain = pc / s;
        x += gain * nu;
        p -= gain * pc.transpose();
        let uk = SVector::<f64, 3>::from(u[k]);
        x = ad * x + bd * uk;
        p = ad * p * ad.transpose() + qd;
        p = 0.5 * (p + p.transpose());
    }
    Ok(out)
}

/// Scalar unrolling of the two-state recursion for the optimiser hot loop.
fn filter_two(sys: &DiscreteSystem, y: &[f64], u: &[[f64; 3]]) -> Result<FilterOutput, GreyboxError> {
    let (a11, a12, a21, a22) = (sys.ad[(0, 0)], sys.ad[(0, 1)], sys.ad[(1, 0)], sys.ad[(1, 1)]);
    let b = [
        [sys.bd[(0, 0)], sys.bd[(0, 1)], sys.bd[(0, 2)]],
        [sys.bd[(1, 0)], sys.bd[(1, 1)], sys.bd[(1, 2)]],
    ];
    let (q11, q12, q22) = (sys.qd[(0, 0)], sys.qd[(0, 1)], sys.qd[(1, 1)]);
    let (c1, c2) = (sys.c[0], sys.c[1]);
    let (mut x1, mut x2) = (sys.x0[0], sys.x0[1]);
    let (mut p11, mut p12, mut p22) = (sys.p0[(0, 0)], 0.5 * (sys.p0[(0, 1)] + sys.p0[(1, 0)]), sys.p0[(1, 1)]);
    let ln2pi = (2.0 * PI).ln();
    let mut ll = 0.0;
    for k in 0..y.len() {
        let pc1 = p11 * c1 + p12 * c2;
        let pc2 = p12 * c1 + p22 * c2;
        let s = c1 * pc1 + c2 * pc2 + sys.r;
        let nu = y[k] - (c1 * x1 + c2 * x2);
        if !(s > 0.0) || !nu.is_finite() || !s.is_finite() {
            return Err(GreyboxError::Numerical {
                step: k,
                message: format!("innovation variance {s}, residual {nu}"),
            });
        }
        ll -= 0.5 * (ln2pi + s.ln() + nu * nu / s);
        let (g1, g2) = (pc1 / s, pc2 / s);
        x1 += g1 * nu;
        x2 += g2 * nu;
        p11 -= g1 * pc1;
        p12 -= g1 * pc2;
        p22 -= g2 * pc2;
        let uk = &u[k];
        let nx1 = a11 * x1 + a12 * x2 + b[0][0] * uk[0] + b[0][1] * uk[1] + b[0][2] * uk[2];
        let nx2 = a21 * x1 + a22 * x2 + b[1][0] * uk[0] + b[1][1] * uk[1] + b[1][2] * uk[2];
        x1 = nx1;
        x2 = nx2;
        // A P Aᵀ + Q with P symmetric.
        let m11 = a11 * p11 + a12 * p12;
        let m12 = a11 * p12 + a12 * p22;
        let m21 = a21 * p11 + a22 * p12;
        let m22 = a21 * p12 + a22 * p22;
        let n11 = m11 * a11 + m12 * a12 + q11;
        let n12 = m11 * a21 + m12 * a22 + q12;
        let n22 = m21 * a21 + m22 * a22 + q22;
        p11 = n11;
        p12 = n12;
        p22 = n22;
    }
    Ok(FilterOutput {
        log_likelihood: ll,
        residuals: Vec::new(),
        variances: Vec::new(),
    })
}

/// Inputs `[T_out, I_sol, P_h]` per row.
pub(crate) fn dataset_inputs(ds: &SimDataset) -> Vec<[f64; 3]> {
    (0..ds.len()).map(|k| [ds.t_out[k], ds.i_sol[k], ds.p_h[k]]).collect()
}

/// Log-likelihood of the two-state model on a dataset.
pub fn kalman_loglik(theta: &RcParameters, ds: &SimDataset) -> Result<FilterOutput, GreyboxError> {
    theta.validate()?;
    if ds.len() < 4 {
        return Err(GreyboxError::InsufficientData(format!("{} rows, need at least 4", ds.len())));
    }
    let (a, b, sigma) = continuous_matrices(theta);
    let (ad, bd, qd) = discretize(&a, &b, &sigma, ds.step_s as f64)?;
    let sys = DiscreteSystem {
        ad,
        bd,
        qd,
        c: DVector::from_vec(vec![0.0, 1.0]),
        r: theta.sigma_eps.powi(2),
        x0: DVector::from_vec(theta.x0.to_vec()),
        p0: DMatrix::identity(2, 2) * theta.p0,
    };
    kalman_filter(&sys, &ds.t_in, &dataset_inputs(ds))
}

/// Draws an indoor-temperature path from the two-state model driven by the
/// inputs of `template`, including process and measurement noise.
pub fn simulate_two_state(theta: &RcParameters, template: &SimDataset, seed: u64) -> Result<SimDataset, GreyboxError> {
    use rand_distr::{Distribution, StandardNormal};

    theta.validate()?;
    let (a, b, sigma) = continuous_matrices(theta);
    let (ad, bd, qd) = discretize(&a, &b, &sigma, template.step_s as f64)?;
    let chol = nalgebra::Cholesky::new(qd.clone() + DMatrix::identity(2, 2) * 1e-300)
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::zeros(2, 2));
    let mut rng = crate::seeds::rng_for("two-state-simulation", &[seed]);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut x = DVector::from_vec(theta.x0.to_vec());
    let mut out = template.clone();
    for k in 0..template.len() {
        out.t_in[k] = x[1] + theta.sigma_eps * normal();
        let u = DVector::from_vec(vec![template.t_out[k], template.i_sol[k], template.p_h[k]]);
        let w = &chol * DVector::from_vec(vec![normal(), normal()]);
        x = &ad * &x + &bd * u + w;
    }
    out.meta.noisy = true;
    out.meta.noise_seed = Some(seed);
    Ok(out)
}
