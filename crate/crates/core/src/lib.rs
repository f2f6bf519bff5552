//! Weather-variability study of building envelope thermal resistance estimates.
//!
//! The crate is organised along the pipeline it implements:
//!
//! * [`weather`] ingests a typical-year file, fits per-variable stochastic
//!   models and generates perturbed weather laid out on a pick-freeze plan.
//! * [`refsim`] is the high-order thermal-network reference simulator that
//!   turns weather into synthetic indoor measurements and the target `R*_eq`.
//! * [`greybox`] holds the stochastic RC models, their exact discretisation,
//!   the Kalman likelihood and the maximum-likelihood calibration.
//! * [`inference`] derives `R_eq` with its uncertainty, scores it against the
//!   target and checks residual whiteness and convergence rules.
//! * [`sensan`] computes grouped first-order Sobol indices and variability
//!   summaries over the duration sweep.
//! * [`pipeline`] orchestrates the stages behind the `reqvar` binary.

pub mod greybox;
pub mod inference;
pub mod pipeline;
pub mod refsim;
pub mod seeds;
pub mod sensan;
pub mod weather;
