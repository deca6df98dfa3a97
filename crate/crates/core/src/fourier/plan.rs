//! Grid sizes, frequency spacing and contour choice for the 2D pricer.

use num_complex::Complex64;

use super::payoff::{is_admissible, ln_payoff_transform};
use super::JointCharacteristic;
use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_CONTOUR: [f64; 2] = [-3.0, 1.0];

/// Integrand magnitude at the frequency cutoff, relative to its value at the origin.
const CUTOFF_TOLERANCE: f64 = 1e-10;
/// Target `exp(-s L)` for the periodic images of the damped price.
const ALIAS_DECAY: f64 = 20.0;
/// State window in standard deviations of the log-state at maturity.
const WINDOW_SD: f64 = 20.0;
/// Largest `ln |Φ(iε)|` accepted on the contour; the price is a cancellation
/// of terms this large, so the budget bounds the loss of relative precision.
const MAGNITUDE_BUDGET: f64 = 12.0;

/// Required `1 + a z` at the contour, `z` the Laplace argument at zero
/// frequency. Few expected jumps leave little mass near the moment explosion,
/// so the contour may approach it more closely.
pub fn domain_headroom(expected_jumps: f64) -> f64 {
    const CLOSE: f64 = 0.2;
    const FAR: f64 = 0.5;
    if expected_jumps <= 0.1 {
        CLOSE
    } else if expected_jumps >= 1.0 {
        FAR
    } else {
        CLOSE + (FAR - CLOSE) * (expected_jumps.log10() + 1.0)
    }
}

/// Discretisation of `∬_{ℝ²+iε} e^{iuy} Φ(u) P̂(u) d²u`.
///
/// Frequencies are `ξ_j = (j - n/2) du`; the conjugate state lattice is
/// `y_k = center + (k - n/2) dy` with `dy = 2π / (n du)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierPlan {
    pub n1: usize,
    pub n2: usize,
    pub du1: f64,
    pub du2: f64,
    pub eps: [f64; 2],
    pub center: [f64; 2],
}

impl FourierPlan {
    pub fn new(n: usize, du: f64, eps: [f64; 2], center: [f64; 2]) -> Result<Self> {
        let plan = Self { n1: n, n2: n, du1: du, du2: du, eps, center };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        for n in [self.n1, self.n2] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidParameter(format!("grid size {n} must be a power of two >= 4")));
            }
        }
        if !(self.du1 > 0.0 && self.du2 > 0.0) {
            return Err(Error::InvalidParameter("frequency spacing must be positive".into()));
        }
        if !is_admissible(self.eps) {
            return Err(Error::InvalidParameter(format!(
                "contour shift {:?} needs eps2 > 0 and eps1 + eps2 < -1",
                self.eps
            )));
        }
        Ok(())
    }

    /// Chooses the contour, cutoff and spacing for `cf` at maturity `t`.
    ///
    /// `center` is the middle of the log-states to be priced and `span` their
    /// largest distance from it.
    pub fn auto(
        cf: &dyn JointCharacteristic,
        t: f64,
        n: usize,
        center: [f64; 2],
        span: f64,
    ) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("maturity {t} must be positive")));
        }
        let eps = select_contour(cf, t);
        let s = eps[1].min(-1.0 - eps[0] - eps[1]);
        let cutoff = frequency_cutoff(cf, t, eps)?;
        let cov = cf.covariance();
        let sd = (cov[0][0].max(cov[1][1]) * t).sqrt();
        let window = (ALIAS_DECAY / s).max(8.0 * span + 16.0).max(WINDOW_SD * sd);
        let du = (2.0 * std::f64::consts::PI / window).max(2.0 * cutoff / n as f64);
        // The cutoff may shrink the window, but not below three quarters of it.
        let floor = 0.75 * window;
        if 2.0 * std::f64::consts::PI / du < floor {
            let needed = ((cutoff * floor / std::f64::consts::PI).ceil() as usize).next_power_of_two();
            return Err(Error::GridResolution { given: n, needed });
        }
        Self::new(n, du, eps, center)
    }

    pub fn state_step(&self, axis: usize) -> f64 {
        let (n, du) = self.axis_params(axis);
        2.0 * std::f64::consts::PI / (n as f64 * du)
    }

    pub fn window(&self, axis: usize) -> f64 {
        let (n, _) = self.axis_params(axis);
        n as f64 * self.state_step(axis)
    }

    pub fn x_min(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.window(axis)
    }

    pub fn x_max(&self, axis: usize) -> f64 {
        self.x_min(axis) + (self.axis_params(axis).0 - 1) as f64 * self.state_step(axis)
    }

    /// State coordinates along one lattice axis.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let (n, _) = self.axis_params(axis);
        let dy = self.state_step(axis);
        let lo = self.x_min(axis);
        (0..n).map(|k| lo + k as f64 * dy).collect()
    }

    pub fn frequency(&self, axis: usize, j: usize) -> f64 {
        let (n, du) = self.axis_params(axis);
        (j as f64 - (n / 2) as f64) * du
    }

    /// Whether `y` lies in the central half of the state window, where
    /// periodic images are negligible.
    pub fn covers(&self, y: [f64; 2]) -> bool {
        (0..2).all(|a| (y[a] - self.center[a]).abs() <= 0.25 * self.window(a))
    }

    fn axis_params(&self, axis: usize) -> (usize, f64) {
        if axis == 0 {
            (self.n1, self.du1)
        } else {
            (self.n2, self.du2)
        }
    }
}

/// Real Laplace argument `z(iε) = -εΣε'/2 - ε·diag(Σ)/2` at zero frequency;
/// the minimum of `Re z` over the contour.
pub fn contour_exponent(cov: &[[f64; 2]; 2], eps: [f64; 2]) -> f64 {
    let quad = cov[0][0] * eps[0] * eps[0] + 2.0 * cov[0][1] * eps[0] * eps[1] + cov[1][1] * eps[1] * eps[1];
    -0.5 * quad - 0.5 * (cov[0][0] * eps[0] + cov[1][1] * eps[1])
}

/// Contour on the segment `ε(s) = (-1 - 2s, s)`, `s ∈ (0, 1]`, taking the
/// largest `s` that keeps the Laplace argument inside its domain with headroom
/// at maturity `t` and keeps `ln |Φ(iε)|` within the magnitude budget.
/// Short maturities on the calendar clock get `(-3, 1)`.
pub fn select_contour(cf: &dyn JointCharacteristic, t: f64) -> [f64; 2] {
    let at = |s: f64| [-1.0 - 2.0 * s, s];
    let margin = cf.domain_margin();
    let cov = cf.covariance();
    let limit = -(1.0 - domain_headroom(cf.expected_jumps(t))) * margin;
    let in_domain = |s: f64| !margin.is_finite() || contour_exponent(&cov, at(s)) >= limit;
    // ln Φ(iε(s)) vanishes at s = 0 by the martingale property and grows with s.
    let bounded = |s: f64| {
        let e = at(s);
        cf.log_cf([Complex64::new(0.0, e[0]), Complex64::new(0.0, e[1])], t)
            .map_or(false, |l| l.re <= MAGNITUDE_BUDGET)
    };
    let admissible = |s: f64| in_domain(s) && bounded(s);
    if admissible(1.0) {
        return DEFAULT_CONTOUR;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo.max(1e-3))
}

fn ln_integrand(cf: &dyn JointCharacteristic, t: f64, eps: [f64; 2], xi: [f64; 2]) -> Result<f64> {
    let u = [Complex64::new(xi[0], eps[0]), Complex64::new(xi[1], eps[1])];
    Ok((cf.log_cf(u, t)? + ln_payoff_transform(u[0], u[1])?).re)
}

/// Smallest square half-width `U` whose boundary carries integrand magnitude
/// below the cutoff tolerance. Continuous in the model parameters.
fn frequency_cutoff(cf: &dyn JointCharacteristic, t: f64, eps: [f64; 2]) -> Result<f64> {
    let peak = ln_integrand(cf, t, eps, [0.0, 0.0])?;
    let target = peak + CUTOFF_TOLERANCE.ln();
    const SAMPLES: usize = 9;
    let boundary_max = |u: f64| -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..SAMPLES {
            let s = -1.0 + 2.0 * k as f64 / (SAMPLES - 1) as f64;
            for xi in [[u, s * u], [-u, s * u], [s * u, u], [s * u, -u]] {
                worst = worst.max(ln_integrand(cf, t, eps, xi)?);
            }
        }
        Ok(worst)
    };
    let mut hi = 4.0;
    while boundary_max(hi)? > target {
        hi *= 2.0;
        if hi > 1e5 {
            return Err(Error::Truncation { ratio: (boundary_max(hi)? - peak).exp(), limit: CUTOFF_TOLERANCE });
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if boundary_max(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::Gbm;
    use crate::model::{ModelParams, TimeChange};

    fn vg_table1() -> ModelParams {
        ModelParams::new(0.2433, 0.1344, -0.0699, TimeChange::vg(0.4966, 0.0474).unwrap(), 0.0, 3.1796, 2.5036)
            .unwrap()
    }

    #[test]
    fn gbm_uses_default_contour() {
        let p = vg_table1().with_time_change(TimeChange::Deterministic);
        assert_eq!(select_contour(&p, 1.0), DEFAULT_CONTOUR);
    }

    #[test]
    fn lsbm_contour_stays_in_domain() {
        let p = vg_table1();
        let eps = select_contour(&p, 1.0);
        assert!(is_admissible(eps));
        let a = p.time_change().jump_scale();
        let z = contour_exponent(&p.covariance(), eps);
        let h = domain_headroom(p.time_change().intensity().unwrap());
        assert!((1.0 + a * z - h).abs() < 1e-9, "1 + a z = {}", 1.0 + a * z);
        // The default shift would leave the domain for these parameters.
        assert!(1.0 + a * contour_exponent(&p.covariance(), DEFAULT_CONTOUR) < 0.0);
    }

    #[test]
    fn auto_plan_is_valid() {
        let p = vg_table1();
        let plan = FourierPlan::auto(&p, 1.0, 512, [0.5, 0.0], 1.0).unwrap();
        plan.validate().unwrap();
        assert!(plan.covers([0.5, 0.0]) && plan.covers([1.4, -0.9]));
        assert!(plan.x_max(0) > plan.x_min(0));
    }

    #[test]
    fn short_maturity_asks_for_a_finer_grid() {
        let p = vg_table1().with_time_change(TimeChange::Deterministic);
        let needed = match FourierPlan::auto(&Gbm(&p), 0.01, 512, [0.7, 0.0], 0.5) {
            Err(Error::GridResolution { given: 512, needed }) => needed,
            other => panic!("expected a resolution error, got {other:?}"),
        };
        assert!(FourierPlan::auto(&Gbm(&p), 0.01, needed, [0.7, 0.0], 0.5).is_ok());
    }

    #[test]
    fn long_maturity_contour_respects_magnitude_budget() {
        let p = vg_table1().with_time_change(TimeChange::Deterministic);
        let eps = select_contour(&Gbm(&p), 500.0);
        assert!(is_admissible(eps) && eps[1] < 1.0);
        let u = [Complex64::new(0.0, eps[0]), Complex64::new(0.0, eps[1])];
        assert!(Gbm(&p).log_cf(u, 500.0).unwrap().re <= MAGNITUDE_BUDGET + 1e-9);
        assert_eq!(select_contour(&Gbm(&p), 1.0), DEFAULT_CONTOUR);
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(FourierPlan::new(500, 0.1, DEFAULT_CONTOUR, [0.0, 0.0]).is_err());
        assert!(FourierPlan::new(512, 0.1, [-1.0, 0.5], [0.0, 0.0]).is_err());
        assert!(FourierPlan::new(512, -0.1, DEFAULT_CONTOUR, [0.0, 0.0]).is_err());
    }
}
