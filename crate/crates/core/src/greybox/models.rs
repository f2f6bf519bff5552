use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GreyboxError;

/// Physical parameters of the two-state wall/indoor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParameters {
    /// K/W
    pub r_o: f64,
    /// K/W
    pub r_i: f64,
    /// J/K
    pub c_w: f64,
    /// J/K
    pub c_i: f64,
    /// m²
    pub a_w: f64,
    /// K/√s
    pub sigma_w: f64,
    /// K/√s
    pub sigma_i: f64,
    /// K
    pub sigma_eps: f64,
    /// `[T_w, T_in]` at the first sample, °C.
    pub x0: [f64; 2],
    /// K²
    pub p0: f64,
}

impl RcParameters {
    pub fn validate(&self) -> Result<(), GreyboxError> {
        let positive = [self.r_o, self.r_i, self.c_w, self.c_i, self.sigma_eps, self.p0];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(GreyboxError::Parameters(
                "r_o, r_i, c_w, c_i, sigma_eps and p0 must be positive and finite".into(),
            ));
        }
        if [self.a_w, self.sigma_w, self.sigma_i].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(GreyboxError::Parameters("a_w, sigma_w and sigma_i must be >= 0".into()));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(GreyboxError::Parameters("x0 must be finite".into()));
        }
        Ok(())
    }

    pub fn r_eq(&self) -> f64 {
        self.r_o + self.r_i
    }
}

/// Which form of the wall-node self-coupling to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AMatrixForm {
    /// `A11 = -(1/R_o + 1/R_i)/C_w`, heat-balance consistent.
    #[default]
    Consistent,
    /// `A11 = -1/(C_w R_o)`.
    Printed,
}

/// `(A, B, Σ)` with inputs ordered `[T_out, I_sol, P_h]`.
pub fn continuous_matrices(theta: &RcParameters) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    continuous_matrices_with(theta, AMatrixForm::Consistent)
}

pub fn continuous_matrices_with(
    theta: &RcParameters,
    form: AMatrixForm,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let RcParameters { r_o, r_i, c_w, c_i, a_w, .. } = *theta;
    let a11 = match form {
        AMatrixForm::Consistent => -(1.0 / r_o + 1.0 / r_i) / c_w,
        AMatrixForm::Printed => -1.0 / (c_w * r_o),
    };
    let a = DMatrix::from_row_slice(2, 2, &[a11, 1.0 / (c_w * r_i), 1.0 / (c_i * r_i), -1.0 / (c_i * r_i)]);
    let b = DMatrix::from_row_slice(2, 3, &[1.0 / (c_w * r_o), a_w / c_w, 0.0, 0.0, 0.0, 1.0 / c_i]);
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![theta.sigma_w.powi(2), theta.sigma_i.powi(2)]));
    (a, b, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Optimised as `ln(value)`.
    Log,
    /// Optimised as is.
    Linear,
}

/// One free parameter: name, optimiser-space transform and natural bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub transform: Transform,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSpec {
    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.into(),
            transform: Transform::Log,
            lower,
            upper,
        }
    }

    pub fn to_natural(&self, phi: f64) -> f64 {
        match self.transform {
            Transform::Log => phi.exp(),
            Transform::Linear => phi,
        }
    }

    pub fn to_phi(&self, value: f64) -> f64 {
        match self.transform {
            Transform::Log => value.ln(),
            Transform::Linear => value,
        }
    }

    /// Bounds in optimiser space.
    pub fn phi_bounds(&self) -> (f64, f64) {
        (self.to_phi(self.lower), self.to_phi(self.upper))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoState,
    FirstOrder,
}

/// Continuous-time linear model with a scalar indoor-temperature output.
pub trait StateSpaceModel: Sync {
    fn kind(&self) -> ModelKind;
    /// Free parameters; bounds may depend on the data (initial states).
    fn params(&self, y: &[f64], u: &[[f64; 3]]) -> Vec<ParamSpec>;
    /// `(A, B, Σ, measurement variance, x0, P0)` from natural parameter values.
    fn system(&self, natural: &[f64], y: &[f64], u: &[[f64; 3]]) -> ContinuousSystem;
    /// Indices of the resistances summing to the overall envelope resistance.
    fn resistance_indices(&self) -> Vec<usize>;
}

pub struct ContinuousSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub r: f64,
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

/// Default search box for resistances, capacitances, aperture and noise.
pub const R_BOUNDS: (f64, f64) = (1e-4, 1.0);
pub const C_BOUNDS: (f64, f64) = (1e5, 1e9);
pub const AW_BOUNDS: (f64, f64) = (1e-2, 50.0);
pub const SIGMA_BOUNDS: (f64, f64) = (1e-6, 1.0);

/// Two-state wall/indoor model. Free parameters, in order:
/// `r_o, r_i, c_w, c_i, a_w, sigma_w, sigma_i, sigma_eps, t_w0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoStateModel {
    pub form: AMatrixForm,
    /// K²
    pub p0: f64,
}

impl TwoStateModel {
    pub fn new() -> Self {
        TwoStateModel {
            form: AMatrixForm::Consistent,
            p0: 1.0,
        }
    }

    pub fn rc_parameters(&self, natural: &[f64], y: &[f64]) -> RcParameters {
        RcParameters {
            r_o: natural[0],
            r_i: natural[1],
            c_w: natural[2],
            c_i: natural[3],
            a_w: natural[4],
            sigma_w: natural[5],
            sigma_i: natural[6],
            sigma_eps: natural[7],
            x0: [natural[8], y[0]],
            p0: self.p0,
        }
    }

    /// Steady-state wall temperature from the first indoor/outdoor pair,
    /// assuming equal inner and outer resistances.
    pub fn initial_wall_temperature(y: &[f64], u: &[[f64; 3]]) -> f64 {
        0.5 * (y[0] + u[0][0])
    }
}

impl StateSpaceModel for TwoStateModel {
    fn kind(&self) -> ModelKind {
        ModelKind::TwoState
    }

    fn params(&self, y: &[f64], u: &[[f64; 3]]) -> Vec<ParamSpec> {
        let lo = y[0].min(u[0][0]) - 10.0;
        let hi = y[0].max(u[0][0]) + 10.0;
        vec![
            ParamSpec::log("r_o", R_BOUNDS.0, R_BOUNDS.1),
            ParamSpec::log("r_i", R_BOUNDS.0, R_BOUNDS.1),
            ParamSpec::log("c_w", C_BOUNDS.0, C_BOUNDS.1),
            ParamSpec::log("c_i", C_BOUNDS.0, C_BOUNDS.1),
            ParamSpec::log("a_w", AW_BOUNDS.0, AW_BOUNDS.1),
            ParamSpec::log("sigma_w", SIGMA_BOUNDS.0, SIGMA_BOUNDS.1),
            ParamSpec::log("sigma_i", SIGMA_BOUNDS.0, SIGMA_BOUNDS.1),
            ParamSpec::log("sigma_eps", SIGMA_BOUNDS.0, SIGMA_BOUNDS.1),
            ParamSpec {
                name: "t_w0".into(),
                transform: Transform::Linear,
                lower: lo,
                upper: hi,
            },
        ]
    }

    fn system(&self, natural: &[f64], y: &[f64], _u: &[[f64; 3]]) -> ContinuousSystem {
        let theta = self.rc_parameters(natural, y);
        let (a, b, sigma) = continuous_matrices_with(&theta, self.form);
        ContinuousSystem {
            a,
            b,
            sigma,
            r: theta.sigma_eps.powi(2),
            x0: DVector::from_vec(theta.x0.to_vec()),
            p0: DMatrix::identity(2, 2) * theta.p0,
        }
    }

    fn resistance_indices(&self) -> Vec<usize> {
        vec![0, 1]
    }
}

/// Single-capacitance indoor model `C dT = (T_out - T)/R dt + A_w I dt + P dt + σ dω`.
/// Free parameters: `r, c, a_w, sigma, sigma_eps`.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderModel {
    pub p0: f64,
}

impl Default for FirstOrderModel {
    fn default() -> Self {
        FirstOrderModel { p0: 1.0 }
    }
}

impl StateSpaceModel for FirstOrderModel {
    fn kind(&self) -> ModelKind {
        ModelKind::FirstOrder
    }

    fn params(&self, _y: &[f64], _u: &[[f64; 3]]) -> Vec<ParamSpec> {
        vec![
            ParamSpec::log("r", R_BOUNDS.0, R_BOUNDS.1),
            ParamSpec::log("c", C_BOUNDS.0, C_BOUNDS.1),
            ParamSpec::log("a_w", AW_BOUNDS.0, AW_BOUNDS.1),
            ParamSpec::log("sigma", SIGMA_BOUNDS.0, SIGMA_BOUNDS.1),
            ParamSpec::log("sigma_eps", SIGMA_BOUNDS.0, SIGMA_BOUNDS.1),
        ]
    }

    fn system(&self, p: &[f64], y: &[f64], _u: &[[f64; 3]]) -> ContinuousSystem {
        let (r, c, a_w) = (p[0], p[1], p[2]);
        ContinuousSystem {
            a: DMatrix::from_element(1, 1, -1.0 / (r * c)),
            b: DMatrix::from_row_slice(1, 3, &[1.0 / (r * c), a_w / c, 1.0 / c]),
            sigma: DMatrix::from_element(1, 1, p[3].powi(2)),
            r: p[4].powi(2),
            x0: DVector::from_element(1, y[0]),
            p0: DMatrix::from_element(1, 1, self.p0),
        }
    }

    fn resistance_indices(&self) -> Vec<usize> {
        vec![0]
    }
}
