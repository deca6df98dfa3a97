//! Box-constrained Levenberg-Marquardt with forward-difference Jacobians.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Budget of residual evaluations, Jacobian columns included.
    pub max_evaluations: usize,
    /// Relative objective decrease below which an accepted step ends the run.
    pub ftol: f64,
    /// Step length, relative to the box width, below which the run ends.
    pub xtol: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 100, max_evaluations: 500, ftol: 1e-10, xtol: 1e-10, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimises `Σ r_i(x)²` over the box `[lower, upper]`.
///
/// Coordinates pinned at a bound by the gradient are held fixed for the step,
/// and every trial point is projected back into the box, so accepted
/// objectives decrease monotonically.
pub fn minimize_least_squares<F>(residual: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LmOptions) -> LmOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let mut r = residual(&x);
    let mut f = sum_sq(&r);
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations && evaluations + n < opts.max_evaluations {
        iterations += 1;
        if f == 0.0 {
            converged = true;
            break;
        }
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for i in 0..n {
            let mut h = opts.fd_step * x[i].abs().max(1.0);
            if x[i] + h > upper[i] {
                h = -h;
            }
            let mut xp = x.clone();
            xp[i] += h;
            let rp = residual(&xp);
            evaluations += 1;
            for k in 0..m {
                jac[(k, i)] = (rp[k] - r[k]) / h;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let width = (upper[i] - lower[i]).max(1e-300);
                let at_lo = x[i] - lower[i] <= 1e-12 * width;
                let at_hi = upper[i] - x[i] <= 1e-12 * width;
                !(at_lo && grad[i] > 0.0) && !(at_hi && grad[i] < 0.0)
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let jf = jac.select_columns(&free);
        let a = jf.transpose() * &jf;
        let g = jf.transpose() * &rv;
        let scale: Vec<f64> = (0..free.len()).map(|i| a[(i, i)].max(1e-12 * a.diagonal().max().max(1e-300))).collect();

        let mut accepted = false;
        let mut tiny_step = false;
        for _ in 0..12 {
            let mut damped = a.clone();
            for (i, s) in scale.iter().enumerate() {
                damped[(i, i)] += lambda * s;
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut xt = x.clone();
            for (k, &i) in free.iter().enumerate() {
                xt[i] += step[k];
            }
            project(&mut xt);
            let moved = (0..n).map(|i| (xt[i] - x[i]).abs() / (upper[i] - lower[i]).max(1e-300)).fold(0.0, f64::max);
            if moved < opts.xtol {
                tiny_step = true;
                break;
            }
            if evaluations >= opts.max_evaluations {
                break;
            }
            let rt = residual(&xt);
            evaluations += 1;
            let ft = sum_sq(&rt);
            if ft < f {
                let decrease = (f - ft) / f;
                x = xt;
                r = rt;
                f = ft;
                trace.push(f);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if decrease < opts.ftol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if tiny_step || (!accepted && lambda > 1e10) {
            converged = true;
        }
        if converged || !accepted && evaluations >= opts.max_evaluations {
            break;
        }
    }
    LmOutcome { x, objective: f, trace, iterations, evaluations, converged }
}
