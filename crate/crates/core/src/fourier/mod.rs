//! Fourier machinery: complex gamma, the spread payoff transform, the 2D
//! spread-option pricer and the business-clock density.

pub mod density;
pub mod gamma;
pub mod payoff;
pub mod plan;
pub mod spread;

use num_complex::Complex64;

use crate::error::Result;
use crate::model::ModelParams;

pub use density::{time_change_density, TimeChangeDensity};
pub use gamma::{gamma, ln_gamma};
pub use payoff::{payoff_transform, PayoffTables};
pub use plan::FourierPlan;
pub use spread::{price_vanilla_spread_grid, PriceGrid, SpreadIntegrand};

/// Source of the joint increment characteristic function `E[e^{iu(Y_T - Y_0)'}]`,
/// supplied in log form.
pub trait JointCharacteristic: Sync {
    fn log_cf(&self, u: [Complex64; 2], t: f64) -> Result<Complex64>;

    /// Drift fraction of the business clock: the share of calendar time that
    /// drives the Gaussian decay of the integrand.
    fn gaussian_time_fraction(&self) -> f64;

    /// Per unit business time covariance of `(v, d)`.
    fn covariance(&self) -> [[f64; 2]; 2];

    /// Least upper bound on `-Re z` for which `ψ(z)` is defined.
    fn domain_margin(&self) -> f64;

    /// Mean number of clock jumps by time `t`; zero for continuous clocks.
    fn expected_jumps(&self, t: f64) -> f64;
}

/// A model priced under its own clock (GBM or Lévy subordinated).
impl JointCharacteristic for ModelParams {
    fn log_cf(&self, u: [Complex64; 2], t: f64) -> Result<Complex64> {
        self.log_increment_cf(u, t)
    }
    fn gaussian_time_fraction(&self) -> f64 {
        self.time_change().drift()
    }
    fn covariance(&self) -> [[f64; 2]; 2] {
        ModelParams::covariance(self)
    }
    fn domain_margin(&self) -> f64 {
        -self.time_change().domain_lower_bound()
    }
    fn expected_jumps(&self, t: f64) -> f64 {
        self.time_change().intensity().map_or(0.0, |c| c * t)
    }
}

/// Forces the calendar clock regardless of the model's time change.
#[derive(Debug, Clone, Copy)]
pub struct Gbm<'a>(pub &'a ModelParams);

impl JointCharacteristic for Gbm<'_> {
    fn log_cf(&self, u: [Complex64; 2], t: f64) -> Result<Complex64> {
        Ok(self.0.log_increment_cf_gbm(u, t))
    }
    fn gaussian_time_fraction(&self) -> f64 {
        1.0
    }
    fn covariance(&self) -> [[f64; 2]; 2] {
        self.0.covariance()
    }
    fn domain_margin(&self) -> f64 {
        f64::INFINITY
    }
    fn expected_jumps(&self, _t: f64) -> f64 {
        0.0
    }
}
