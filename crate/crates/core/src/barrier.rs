//! First-passage survival and down-and-out equity calls.
//!
//! Default happens when `X = v - d` first reaches zero in business time. Given
//! the clock, `X / σ_X` is a Brownian motion with drift `α`, so the reflection
//! principle turns a knock-out spread payoff into the vanilla price minus a
//! weighted vanilla price at the reflected state.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fourier::plan::{FourierPlan, DEFAULT_GRID};
use crate::fourier::spread::SpreadIntegrand;
use crate::fourier::{time_change_density, JointCharacteristic};
use crate::model::{ModelParams, TimeChange};

fn norm_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Probability that a Brownian motion with drift `alpha`, started at `y0 > 0`,
/// stays positive up to time `g`.
pub fn brownian_survival(y0: f64, alpha: f64, g: f64) -> f64 {
    if g <= 0.0 {
        return if y0 > 0.0 { 1.0 } else { 0.0 };
    }
    let s = g.sqrt();
    let reflected = (-2.0 * alpha * y0).exp() * norm_cdf((-y0 + alpha * g) / s);
    (norm_cdf((y0 + alpha * g) / s) - reflected).clamp(0.0, 1.0)
}

/// Survival probability to calendar time `t` under the model's clock.
pub fn survival_probability(params: &ModelParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("maturity {t} must be non-negative")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let d = params.derived();
    let y0 = params.x0() / d.sigma_x;
    let h = |g: f64| brownian_survival(y0, d.alpha, g);
    match params.time_change() {
        TimeChange::Deterministic => Ok(h(t)),
        tc => Ok(time_change_density(tc, t)?.expectation(h).clamp(0.0, 1.0)),
    }
}

/// Survival probabilities at several maturities, enforced non-increasing.
pub fn survival_curve(params: &ModelParams, times: &[f64]) -> Result<Vec<f64>> {
    let mut out = times
        .par_iter()
        .map(|&t| survival_probability(params, t))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    for w in order.windows(2) {
        if out[w[1]] > out[w[0]] {
            out[w[1]] = out[w[0]];
        }
    }
    Ok(out)
}

/// Damping of the digital transform, `P(Y > 0) = (2π)⁻¹ ∫_{ℝ-iδ} φ_Y(u) / (iu) du`.
const DIGITAL_DAMPING: f64 = 0.5;

/// `P(X0 + ΔX_T > 0)` by Fourier inversion of the leverage increment.
fn digital_probability(cf: &dyn JointCharacteristic, x0: f64, t: f64, sigma_x: f64) -> Result<f64> {
    let delta = DIGITAL_DAMPING;
    let g = |w: f64| -> Result<Complex64> {
        let u = Complex64::new(w, -delta);
        let ln_phi = cf.log_cf([u, -u], t)?;
        Ok((ln_phi + Complex64::i() * u * x0).exp() / (Complex64::i() * u))
    };
    let sd = sigma_x * t.sqrt();
    let window = 40.0 / delta + 20.0 * sd + 2.0 * x0.abs();
    let h = 2.0 * std::f64::consts::PI / window;
    let g0 = g(0.0)?.norm();
    let mut cutoff = 1.0 / sd;
    while g(cutoff)?.norm() > 1e-13 * g0 && cutoff < 1e7 / sd {
        cutoff *= 1.5;
    }
    let steps = ((cutoff / h).ceil() as usize).min(1 << 22);
    let body: f64 = (1..=steps)
        .into_par_iter()
        .map(|k| g(k as f64 * h).map(|v| v.re))
        .sum::<Result<f64>>()?;
    let total = h * (0.5 * g(0.0)?.re + body);
    Ok((total / std::f64::consts::PI).clamp(0.0, 1.0))
}

/// Survival probability as a difference of two digital probabilities on the
/// leverage, evaluated by Fourier inversion. Independent of
/// [`survival_probability`].
pub fn survival_probability_fourier(params: &ModelParams, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let d = params.derived();
    let x0 = params.x0();
    let up = digital_probability(params, x0, t, d.sigma_x)?;
    let down = digital_probability(params, -x0, t, d.sigma_x)?;
    Ok((up - d.reflection_weight(x0) * down).clamp(0.0, 1.0))
}

/// Vanilla and reflected states of the knock-out decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierDecomposition {
    pub vanilla_state: [f64; 2],
    pub reflected_state: [f64; 2],
    pub weight: f64,
}

impl BarrierDecomposition {
    pub fn new(params: &ModelParams) -> Self {
        let d = params.derived();
        let state = params.state();
        Self { vanilla_state: state, reflected_state: d.reflect(state), weight: d.reflection_weight(params.x0()) }
    }
}

/// Relative slack, in unit-strike price units, before a reflected term larger
/// than the vanilla term is reported.
const REFLECTION_SLACK: f64 = 1e-9;

/// Vanilla and reflected unit-strike components at each strike.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierComponents {
    pub vanilla: Vec<f64>,
    pub reflected: Vec<f64>,
    pub decomposition: BarrierDecomposition,
}

/// Unit-strike vanilla and reflected prices `F(y - k)` and `F(ỹ - k)` with
/// `k = log(K δ)`, on an `n × n` Fourier plan.
pub fn barrier_components(
    params: &ModelParams,
    strikes: &[f64],
    t: f64,
    discount: f64,
    n: usize,
) -> Result<BarrierComponents> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("maturity {t} must be positive")));
    }
    if !(discount > 0.0) {
        return Err(Error::InvalidParameter(format!("discount factor {discount} must be positive")));
    }
    if let Some(k) = strikes.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidParameter(format!("strike {k} must be positive")));
    }
    let dec = BarrierDecomposition::new(params);
    let shifts: Vec<f64> = strikes.iter().map(|k| -(k * discount).ln()).collect();
    let (y, yr) = (dec.vanilla_state, dec.reflected_state);
    let points: Vec<[f64; 2]> = shifts
        .iter()
        .flat_map(|&s| [[y[0] + s, y[1] + s], [yr[0] + s, yr[1] + s]])
        .collect();
    let lo = |a: usize| points.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
    let hi = |a: usize| points.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
    let center = [0.5 * (lo(0) + hi(0)), 0.5 * (lo(1) + hi(1))];
    let span = (0..2).map(|a| 0.5 * (hi(a) - lo(a))).fold(0.0, f64::max);
    let plan = FourierPlan::auto(params, t, n, center, span)?;
    let integrand = SpreadIntegrand::new(params, &plan, t)?;
    Ok(BarrierComponents {
        vanilla: integrand.price_diagonal(y, &shifts),
        reflected: integrand.price_diagonal(yr, &shifts),
        decomposition: dec,
    })
}

/// Down-and-out equity calls `E[δ (V_T - D_T - K)^+ ; no default before T]`.
pub fn barrier_calls(params: &ModelParams, strikes: &[f64], t: f64, discount: f64, n: usize) -> Result<Vec<f64>> {
    let comp = barrier_components(params, strikes, t, discount, n)?;
    let stock = params.firm_state().stock;
    let w = comp.decomposition.weight;
    strikes
        .iter()
        .zip(comp.vanilla.iter().zip(&comp.reflected))
        .map(|(&k, (&van, &refl))| {
            let k_disc = k * discount;
            let unit_cap = params.v0().exp() / k_disc;
            if w * refl > van + REFLECTION_SLACK * unit_cap {
                return Err(Error::ReflectionDominates { vanilla: van, reflected: w * refl });
            }
            let lower = (stock - k_disc).max(0.0);
            Ok((k_disc * (van - w * refl)).clamp(lower, stock))
        })
        .collect()
}

/// Single-strike [`barrier_calls`] on the default grid.
pub fn barrier_call(params: &ModelParams, strike: f64, t: f64, discount: f64) -> Result<f64> {
    Ok(barrier_calls(params, &[strike], t, discount, DEFAULT_GRID)?[0])
}
