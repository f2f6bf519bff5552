use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub gtol: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Largest move of any coordinate in one line search.
    pub max_step: f64,
    /// Relative objective change counted as a stall.
    pub ftol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 300,
            gtol: 1e-2,
            fd_step: 1e-5,
            max_step: 2.0,
            ftol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central second differences; symmetric by construction.
pub fn central_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut at = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h;
                xp[j] = x[j] + sj * h;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Box-constrained BFGS with a projected Armijo backtracking line search and
/// finite-difference gradients. Non-finite objective values are treated as
/// infeasible points.
pub fn bfgs(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BfgsOptions,
) -> BfgsResult {
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut evaluations = 0usize;
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut fx = f(&x);
    evaluations += 1;
    if !fx.is_finite() {
        return BfgsResult {
            grad: vec![f64::NAN; n],
            x,
            f: fx,
            grad_norm: f64::INFINITY,
            iterations: 0,
            evaluations,
            converged: false,
        };
    }
    let mut g = central_gradient(f, &x, opts.fd_step);
    evaluations += 2 * n;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut stalls = 0;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let pg = projected_gradient(&x, &g, lower, upper);
        if inf_norm(&pg) <= opts.gtol || g.iter().any(|v| !v.is_finite()) {
            break;
        }
        iterations += 1;

        let mut accepted = None;
        for attempt in 0..2 {
            let gv = DVector::from_vec(pg.clone());
            let mut d: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
            for i in 0..n {
                if (x[i] <= lower[i] && d[i] < 0.0) || (x[i] >= upper[i] && d[i] > 0.0) {
                    d[i] = 0.0;
                }
            }
            let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                hinv = DMatrix::identity(n, n);
                scaled = false;
                if attempt == 0 {
                    continue;
                }
                break;
            }
            let biggest = inf_norm(&d);
            let mut alpha = if biggest > opts.max_step { opts.max_step / biggest } else { 1.0 };
            for _ in 0..40 {
                let mut xt: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
                clamp(&mut xt);
                let ft = f(&xt);
                evaluations += 1;
                let decrease: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
                if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                    accepted = Some((xt, ft));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            hinv = DMatrix::identity(n, n);
            scaled = false;
        }
        let Some((xn, fnew)) = accepted else {
            break;
        };

        let gn = central_gradient(f, &xn, opts.fd_step);
        evaluations += 2 * n;
        let s = DVector::from_iterator(n, (0..n).map(|i| xn[i] - x[i]));
        let yv = DVector::from_iterator(n, (0..n).map(|i| gn[i] - g[i]));
        let sy = s.dot(&yv);
        if sy > 1e-10 * s.norm() * yv.norm() && sy.is_finite() {
            if !scaled {
                hinv = DMatrix::identity(n, n) * (sy / yv.dot(&yv));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }

        let rel = (fx - fnew).abs() / (1.0 + fx.abs());
        stalls = if rel <= opts.ftol { stalls + 1 } else { 0 };
        x = xn;
        fx = fnew;
        g = gn;
        if stalls >= 3 {
            break;
        }
    }
    let pg = projected_gradient(&x, &g, lower, upper);
    let grad_norm = inf_norm(&pg);
    BfgsResult {
        converged: grad_norm <= opts.gtol,
        x,
        f: fx,
        grad: g,
        grad_norm,
        iterations,
        evaluations,
    }
}
