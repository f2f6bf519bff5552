//! Stochastic RC grey-box models.
//!
//! Continuous-time linear SDE models are discretised exactly (zero-order hold
//! for the inputs, Van Loan for the process noise), evaluated with a Kalman
//! filter and calibrated by multi-start BFGS on the negative log-likelihood
//! in log-parameter space.

mod discretize;
mod fit;
mod kalman;
mod models;
mod optimize;

pub use discretize::{discretize, DiscreteSystem};
pub use fit::{
    estimate_covariance, fit_ml, fit_model, CovarianceEstimate, Estimate, FitOptions, RestartRecord,
};
pub use kalman::{kalman_filter, kalman_loglik, simulate_two_state, FilterOutput};
pub use models::{
    continuous_matrices, continuous_matrices_with, AMatrixForm, FirstOrderModel, ModelKind, ParamSpec, RcParameters,
    StateSpaceModel, Transform, TwoStateModel,
};
pub use optimize::{bfgs, central_gradient, central_hessian, BfgsOptions, BfgsResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GreyboxError {
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("numerical error at step {step}: {message}")]
    Numerical { step: usize, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("all {} restarts failed: {}", .0.len(), summarize(.0))]
    FitFailure(Vec<RestartRecord>),
}

fn summarize(records: &[RestartRecord]) -> String {
    records
        .iter()
        .map(|r| format!("#{}: {}", r.index, r.message.as_deref().unwrap_or("no optimum")))
        .collect::<Vec<_>>()
        .join("; ")
}
