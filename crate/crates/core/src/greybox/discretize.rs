use nalgebra::{DMatrix, DVector};

use super::GreyboxError;

/// Discrete-time system `x_{k+1} = A_d x_k + B_d u_k + w_k`,
/// `y_k = c·x_k + e_k` with `w ~ N(0, Q_d)`, `e ~ N(0, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub qd: DMatrix<f64>,
    pub c: DVector<f64>,
    pub r: f64,
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

/// Exact zero-order-hold discretisation. `Q_d` comes from the Van Loan
/// block exponential `exp([[-A, Σ], [0, Aᵀ]]·dt)`.
pub fn discretize(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>), GreyboxError> {
    if !(dt > 0.0) {
        return Err(GreyboxError::Parameters(format!("time step must be positive, got {dt}")));
    }
    let n = a.nrows();
    let m = b.ncols();

    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();

    let mut vl = DMatrix::zeros(2 * n, 2 * n);
    vl.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    vl.view_mut((0, n), (n, n)).copy_from(&(sigma * dt));
    vl.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let f = vl.exp();
    let ad_vl = f.view((n, n), (n, n)).transpose();
    let q = &ad_vl * f.view((0, n), (n, n));
    let qd = 0.5 * (&q + q.transpose());

    if ad.iter().chain(bd.iter()).chain(qd.iter()).any(|v| !v.is_finite()) {
        return Err(GreyboxError::Numerical {
            step: 0,
            message: "non-finite discretised matrices".into(),
        });
    }
    Ok((ad, bd, qd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn integrator_gives_linear_growth() {
        let (ad, bd, qd) = discretize(&scalar(0.0), &scalar(2.0), &scalar(0.25), 3.0).unwrap();
        assert!((ad[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((bd[(0, 0)] - 6.0).abs() < 1e-12);
        assert!((qd[(0, 0)] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn scalar_decay_closed_form() {
        let (a, s2, dt) = (0.3, 0.5, 2.0);
        let (ad, bd, qd) = discretize(&scalar(-a), &scalar(1.0), &scalar(s2), dt).unwrap();
        assert!((ad[(0, 0)] - (-a * dt).exp()).abs() < 1e-14);
        assert!((bd[(0, 0)] - (1.0 - (-a * dt).exp()) / a).abs() < 1e-12);
        assert!((qd[(0, 0)] - s2 * (1.0 - (-2.0 * a * dt).exp()) / (2.0 * a)).abs() < 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.8, 0.3, 0.2, -0.5]);
        let b = DMatrix::zeros(2, 1);
        let s = DMatrix::identity(2, 2);
        let (a1, _, _) = discretize(&a, &b, &s, 0.7).unwrap();
        let (a2, _, _) = discretize(&a, &b, &s, 1.1).unwrap();
        let (a12, _, _) = discretize(&a, &b, &s, 1.8).unwrap();
        assert!((a1 * a2 - a12).abs().max() < 1e-10);
    }

    #[test]
    fn non_positive_step_is_rejected() {
        assert!(discretize(&scalar(-1.0), &scalar(1.0), &scalar(1.0), 0.0).is_err());
    }
}
