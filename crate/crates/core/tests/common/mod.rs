//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDateTime;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reqvar_core::greybox::{DiscreteSystem, RcParameters};
use reqvar_core::refsim::{DatasetMeta, SimDataset};
use reqvar_core::weather::parse_time;

pub fn t0() -> NaiveDateTime {
    parse_time("2001-01-02T00:00:00").unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Physically plausible random parameters.
pub fn random_theta(rng: &mut ChaCha8Rng) -> RcParameters {
    RcParameters {
        r_o: log_uniform(rng, 1e-3, 2e-2),
        r_i: log_uniform(rng, 2e-4, 5e-3),
        c_w: log_uniform(rng, 5e6, 2e8),
        c_i: log_uniform(rng, 5e5, 1e7),
        a_w: rng.random_range(0.5..10.0),
        sigma_w: log_uniform(rng, 1e-4, 1e-2),
        sigma_i: log_uniform(rng, 1e-4, 1e-2),
        sigma_eps: log_uniform(rng, 0.02, 0.5),
        x0: [rng.random_range(5.0..15.0), rng.random_range(18.0..22.0)],
        p0: rng.random_range(0.1..2.0),
    }
}

/// Random winter-like inputs and an arbitrary observation sequence.
pub fn random_dataset(rng: &mut ChaCha8Rng, len: usize, step_s: u32) -> SimDataset {
    let mut t_out = Vec::with_capacity(len);
    let mut v: f64 = rng.random_range(-5.0..8.0);
    for _ in 0..len {
        v += rng.random_range(-0.3..0.3);
        t_out.push(v);
    }
    SimDataset {
        start: t0(),
        step_s,
        t_in: (0..len).map(|_| 20.0 + rng.random_range(-1.0..1.0)).collect(),
        t_out,
        i_sol: (0..len).map(|k| (200.0 * ((k % 144) as f64 / 144.0 * std::f64::consts::PI).sin()).max(0.0)).collect(),
        p_h: (0..len).map(|_| rng.random_range(0.0..6000.0)).collect(),
        meta: DatasetMeta::default(),
    }
}

/// Log-density of all observations as one multivariate Gaussian, built
/// from the moments of the linear recursion without any filtering.
pub fn dense_loglik(sys: &DiscreteSystem, y: &[f64], u: &[[f64; 3]]) -> f64 {
    let n = y.len();
    let dim = sys.ad.nrows();
    let mut means = Vec::with_capacity(n);
    let mut covs: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut m = sys.x0.clone();
    let mut p = sys.p0.clone();
    for k in 0..n {
        means.push(m.clone());
        covs.push(p.clone());
        m = &sys.ad * &m + &sys.bd * DVector::from_row_slice(&u[k]);
        p = &sys.ad * &p * sys.ad.transpose() + &sys.qd;
    }
    let mut powers = vec![DMatrix::<f64>::identity(dim, dim)];
    for k in 1..n {
        powers.push(&sys.ad * &powers[k - 1]);
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let c = &sys.c;
    for j in 0..n {
        for k in j..n {
            // Cov(x_k, x_j) = A^{k-j} P_j
            let cxx = &powers[k - j] * &covs[j];
            let v = (c.transpose() * cxx * c)[(0, 0)];
            cov[(k, j)] = v;
            cov[(j, k)] = v;
        }
        cov[(j, j)] += sys.r;
    }
    let resid = DVector::from_iterator(n, (0..n).map(|k| y[k] - c.dot(&means[k])));
    let chol = cov.cholesky().expect("joint covariance is positive definite");
    let z = chol.l().solve_lower_triangular(&resid).unwrap();
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + z.dot(&z))
}

/// Discretisation by composing `substeps` short steps, each a fourth-order
/// Taylor expansion. Independent of the matrix exponential.
pub fn substep_discretize(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    dt: f64,
    substeps: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let h = dt / substeps as f64;
    let id = DMatrix::<f64>::identity(n, n);
    let ah = a * h;
    let ah2 = &ah * &ah;
    let ah3 = &ah2 * &ah;
    let ah4 = &ah3 * &ah;
    let e = &id + &ah + &ah2 / 2.0 + &ah3 / 6.0 + &ah4 / 24.0;
    // ∫₀ʰ e^{As} ds
    let int_e = (&id + &ah / 2.0 + &ah2 / 6.0 + &ah3 / 24.0 + &ah4 / 120.0) * h;
    let g = &int_e * b;
    // ∫₀ʰ e^{As} Q e^{Aᵀs} ds to third order in h
    let aq = a * q;
    let qa = q * a.transpose();
    let q1 = q * h;
    let q2 = (&aq + &qa) * (h * h / 2.0);
    let q3 = (a * &aq + &aq * a.transpose() * 2.0 + &qa * a.transpose()) * (h * h * h / 6.0);
    let qh = q1 + q2 + q3;

    let mut ad = id.clone();
    let mut bd = DMatrix::<f64>::zeros(n, b.ncols());
    let mut qd = DMatrix::<f64>::zeros(n, n);
    for _ in 0..substeps {
        ad = &e * &ad;
        bd = &e * &bd + &g;
        qd = &e * &qd * e.transpose() + &qh;
    }
    (ad, bd, qd)
}

/// Composite Simpson rule.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn gaussian_band_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let pdf = |x: f64| (-0.5 * ((x - mu) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    simpson(pdf, lo, hi, 20_000)
}

pub fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.abs().max().max(1e-300);
    (a - b).abs().max() / scale
}
