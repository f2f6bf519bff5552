use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discretize::{discretize, DiscreteSystem};
use super::kalman::{dataset_inputs, kalman_filter, loglik_only};
use super::models::{ModelKind, ParamSpec, RcParameters, StateSpaceModel, Transform, TwoStateModel};
use super::optimize::{bfgs, central_hessian, BfgsOptions};
use super::GreyboxError;
use crate::refsim::SimDataset;
use crate::seeds::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub n_restarts: usize,
    pub seed: u64,
    pub gtol: f64,
    pub max_iter: usize,
    /// Stop early once this many restarts reach the best optimum
    /// (0 disables early stopping).
    pub agreement: usize,
    /// Negative log-likelihood difference counted as the same optimum.
    pub agreement_tol: f64,
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_restarts: 8,
            seed: 0,
            gtol: 1e-2,
            max_iter: 300,
            agreement: 0,
            agreement_tol: 0.05,
            hessian_step: 1e-3,
        }
    }
}

/// Outcome of one optimiser start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    /// Optimiser-space starting point.
    pub start: Vec<f64>,
    pub neg_log_likelihood: Option<f64>,
    pub r_eq: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub message: Option<String>,
}

/// Inverse observed information in optimiser space (log for positive
/// parameters). Non-finite entries are serialised as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    #[serde(with = "nonfinite")]
    pub matrix: Vec<Vec<f64>>,
    /// Smallest covariance eigenvalue before clipping, over the parameters
    /// not held at a bound.
    pub min_eigenvalue: f64,
    /// Negative eigenvalues were clipped to zero.
    pub clipped: bool,
    /// The Hessian had null directions; affected marginals are infinite.
    pub singular: bool,
    /// Parameters sitting on a search bound, excluded from the inversion and
    /// given zero variance.
    pub at_bound: Vec<usize>,
}

impl CovarianceEstimate {
    pub fn variance(&self, i: usize) -> f64 {
        self.matrix[i][i]
    }
}

mod nonfinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<f64>>> = m
            .iter()
            .map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let rows: Vec<Vec<Option<f64>>> = Vec::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect())
            .collect())
    }
}

/// Maximum-likelihood calibration result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub model: ModelKind,
    pub params: Vec<ParamSpec>,
    /// Natural-space values.
    pub values: Vec<f64>,
    /// Optimiser-space values.
    pub phi: Vec<f64>,
    pub theta_ml: Option<RcParameters>,
    pub covariance: CovarianceEstimate,
    pub log_likelihood: f64,
    pub converged: bool,
    pub non_convergence_reason: Option<String>,
    pub n_restarts_used: usize,
    pub restarts: Vec<RestartRecord>,
    pub resistance_indices: Vec<usize>,
    pub residuals: Vec<f64>,
    pub residual_variances: Vec<f64>,
}

impl Estimate {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().position(|p| p.name == name).map(|i| self.values[i])
    }

    /// Sum of the model's series resistances.
    pub fn r_eq(&self) -> f64 {
        self.resistance_indices.iter().map(|&i| self.values[i]).sum()
    }
}

struct Problem<'a> {
    model: &'a dyn StateSpaceModel,
    params: Vec<ParamSpec>,
    y: &'a [f64],
    u: Vec<[f64; 3]>,
    dt: f64,
}

impl Problem<'_> {
    fn natural(&self, phi: &[f64]) -> Vec<f64> {
        self.params.iter().zip(phi).map(|(p, v)| p.to_natural(*v)).collect()
    }

    fn system(&self, phi: &[f64]) -> Result<DiscreteSystem, GreyboxError> {
        let cs = self.model.system(&self.natural(phi), self.y, &self.u);
        let (ad, bd, qd) = discretize(&cs.a, &cs.b, &cs.sigma, self.dt)?;
        let n = cs.a.nrows();
        let mut c = nalgebra::DVector::zeros(n);
        c[n - 1] = 1.0;
        Ok(DiscreteSystem {
            ad,
            bd,
            qd,
            c,
            r: cs.r,
            x0: cs.x0,
            p0: cs.p0,
        })
    }

    fn nll(&self, phi: &[f64]) -> f64 {
        match self.system(phi).and_then(|s| loglik_only(&s, self.y, &self.u)) {
            Ok(l) if l.is_finite() => -l,
            _ => f64::INFINITY,
        }
    }

    fn r_eq(&self, phi: &[f64]) -> f64 {
        let nat = self.natural(phi);
        self.model.resistance_indices().iter().map(|&i| nat[i]).sum()
    }
}

fn has_excitation(ds: &SimDataset) -> bool {
    let varies = |v: &[f64]| v.iter().any(|x| (x - v[0]).abs() > 1e-12 * (1.0 + v[0].abs()));
    varies(&ds.t_in) || varies(&ds.t_out) || varies(&ds.i_sol) || varies(&ds.p_h)
}

/// Calibrates the two-state model.
pub fn fit_ml(ds: &SimDataset, options: &FitOptions) -> Result<Estimate, GreyboxError> {
    fit_model(&TwoStateModel::new(), ds, options)
}

pub fn fit_model(model: &dyn StateSpaceModel, ds: &SimDataset, options: &FitOptions) -> Result<Estimate, GreyboxError> {
    if ds.len() < 48 {
        return Err(GreyboxError::InsufficientData(format!("{} rows, need at least 48", ds.len())));
    }
    if !has_excitation(ds) {
        return Err(GreyboxError::InsufficientData(
            "inputs and output are constant; the data carry no information".into(),
        ));
    }
    let u = dataset_inputs(ds);
    let params = model.params(&ds.t_in, &u);
    let problem = Problem {
        model,
        params,
        y: &ds.t_in,
        u,
        dt: ds.step_s as f64,
    };
    let (lower, upper): (Vec<f64>, Vec<f64>) = problem.params.iter().map(|p| p.phi_bounds()).unzip();
    let bfgs_opts = BfgsOptions {
        gtol: options.gtol,
        max_iter: options.max_iter,
        ..Default::default()
    };
    let objective = |phi: &[f64]| problem.nll(phi);

    let mut rng = rng_for("fit-restarts", &[options.seed]);
    let mut records = Vec::new();
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for index in 0..options.n_restarts.max(1) {
        let start: Vec<f64> = (0..lower.len()).map(|i| rng.random_range(lower[i]..=upper[i])).collect();
        let res = bfgs(&objective, &start, &lower, &upper, &bfgs_opts);
        let ok = res.f.is_finite();
        records.push(RestartRecord {
            index,
            start,
            neg_log_likelihood: ok.then_some(res.f),
            r_eq: ok.then(|| problem.r_eq(&res.x)),
            converged: res.converged && ok,
            iterations: res.iterations,
            evaluations: res.evaluations,
            grad_norm: res.grad_norm,
            message: (!ok).then(|| "objective not finite at start".to_string()),
        });
        if ok && best.as_ref().is_none_or(|b| res.f < b.2) {
            best = Some((index, res.x.clone(), res.f));
        }
        if options.agreement > 0 {
            if let Some((_, _, fb)) = &best {
                let agreeing = records
                    .iter()
                    .filter(|r| r.neg_log_likelihood.is_some_and(|f| f - fb <= options.agreement_tol))
                    .count();
                if agreeing >= options.agreement {
                    break;
                }
            }
        }
    }
    let Some((best_index, phi, _)) = best else {
        return Err(GreyboxError::FitFailure(records));
    };

    let mut reasons = Vec::new();
    if !records[best_index].converged {
        reasons.push(format!(
            "gradient norm {:.3e} above tolerance {:.1e}",
            records[best_index].grad_norm, options.gtol
        ));
    }
    let fb = records[best_index].neg_log_likelihood.unwrap();
    let near: Vec<f64> = records
        .iter()
        .filter(|r| r.neg_log_likelihood.is_some_and(|f| f - fb <= options.agreement_tol.max(1.0)))
        .filter_map(|r| r.r_eq)
        .collect();
    let (lo, hi) = near.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi > 10.0 * lo {
        reasons.push(format!("near-optimal restarts disagree on R_eq ({lo:.3e} to {hi:.3e})"));
    }

    let sys = problem.system(&phi)?;
    let filtered = kalman_filter(&sys, problem.y, &problem.u)?;
    let covariance = estimate_covariance(&objective, &phi, &lower, &upper, options.hessian_step);
    let values = problem.natural(&phi);
    let theta_ml = match model.kind() {
        ModelKind::TwoState => Some(TwoStateModel::new().rc_parameters(&values, problem.y)),
        ModelKind::FirstOrder => None,
    };
    Ok(Estimate {
        model: model.kind(),
        resistance_indices: model.resistance_indices(),
        params: problem.params.clone(),
        values,
        phi,
        theta_ml,
        covariance,
        log_likelihood: filtered.log_likelihood,
        converged: reasons.is_empty(),
        non_convergence_reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
        n_restarts_used: records.len(),
        restarts: records,
        residuals: filtered.residuals,
        residual_variances: filtered.variances,
    })
}

/// Inverse of the central-difference Hessian of `objective` at `phi`.
///
/// Parameters within `1e-6` of a bound are held fixed. Eigenvalues of the
/// remaining Hessian below `1e-8` of the largest (in absolute value) are null
/// directions and give infinite marginal variance to every parameter loading
/// on them; larger negative curvature is clipped to zero covariance.
pub fn estimate_covariance(
    objective: &dyn Fn(&[f64]) -> f64,
    phi: &[f64],
    lower: &[f64],
    upper: &[f64],
    step: f64,
) -> CovarianceEstimate {
    let n = phi.len();
    let at_bound: Vec<usize> = (0..n)
        .filter(|&i| phi[i] - lower[i] <= 1e-6 || upper[i] - phi[i] <= 1e-6)
        .collect();
    let free: Vec<usize> = (0..n).filter(|i| !at_bound.contains(i)).collect();
    let mut matrix = vec![vec![0.0; n]; n];
    if free.is_empty() {
        return CovarianceEstimate {
            matrix,
            min_eigenvalue: 0.0,
            clipped: false,
            singular: false,
            at_bound,
        };
    }
    let reduced = |sub: &[f64]| {
        let mut full = phi.to_vec();
        for (k, &i) in free.iter().enumerate() {
            full[i] = sub[k];
        }
        objective(&full)
    };
    let x: Vec<f64> = free.iter().map(|&i| phi[i]).collect();
    let hess = central_hessian(&reduced, &x, step);
    let m = free.len();
    let eig = SymmetricEigen::new(hess);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let null_tol = 1e-8 * scale.max(1e-300);

    let mut cov = DMatrix::zeros(m, m);
    let mut min_eigenvalue = f64::INFINITY;
    let mut clipped = false;
    let mut infinite = vec![false; m];
    let mut singular = false;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if lambda.abs() <= null_tol || !lambda.is_finite() {
            singular = true;
            for j in 0..m {
                if v[j].abs() > 1e-3 {
                    infinite[j] = true;
                }
            }
            continue;
        }
        let c = 1.0 / lambda;
        min_eigenvalue = min_eigenvalue.min(c);
        if c < 0.0 {
            clipped = true;
            continue;
        }
        cov += v * v.transpose() * c;
    }
    if !min_eigenvalue.is_finite() {
        min_eigenvalue = 0.0;
    }
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            matrix[i][j] = if infinite[a] || infinite[b] {
                if a == b {
                    f64::INFINITY
                } else {
                    f64::NAN
                }
            } else {
                0.5 * (cov[(a, b)] + cov[(b, a)])
            };
        }
    }
    CovarianceEstimate {
        matrix,
        min_eigenvalue,
        clipped,
        singular,
        at_bound,
    }
}

impl ParamSpec {
    pub fn is_log(&self) -> bool {
        self.transform == Transform::Log
    }
}
