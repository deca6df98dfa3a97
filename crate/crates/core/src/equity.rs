//! Equity calls and puts under the structural model, and Black-Scholes
//! implied volatility.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::barrier::barrier_calls;
use crate::credit::YieldCurve;
use crate::error::{Error, Result};
use crate::fourier::plan::DEFAULT_GRID;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuoteSource {
    Market,
    Model,
}

/// Implied volatility at moneyness `K / S0` and maturity in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolQuote {
    pub moneyness: f64,
    pub maturity: f64,
    pub implied_vol: f64,
    pub source: QuoteSource,
}

/// Equity calls at several strikes for one maturity.
pub fn call_prices(params: &ModelParams, curve: &YieldCurve, strikes: &[f64], t: f64, n: usize) -> Result<Vec<f64>> {
    let stock = params.firm_state().stock;
    let positive: Vec<f64> = strikes.iter().copied().filter(|&k| k != 0.0).collect();
    let mut priced = barrier_calls(params, &positive, t, curve.discount(t), n)?.into_iter();
    Ok(strikes.iter().map(|&k| if k == 0.0 { stock } else { priced.next().unwrap_or(f64::NAN) }).collect())
}

pub fn call_price(params: &ModelParams, curve: &YieldCurve, strike: f64, t: f64) -> Result<f64> {
    Ok(call_prices(params, curve, &[strike], t, DEFAULT_GRID)?[0])
}

/// Put from call-put parity `C - P = S0 - K δ`.
pub fn put_price(params: &ModelParams, curve: &YieldCurve, strike: f64, t: f64) -> Result<f64> {
    let call = call_price(params, curve, strike, t)?;
    Ok(call - params.firm_state().stock + strike * curve.discount(t))
}

fn normal() -> Normal {
    Normal::standard()
}

/// Black-Scholes call with zero dividends, spot `s0`, discount factor `discount`.
pub fn bs_call(s0: f64, strike: f64, t: f64, discount: f64, vol: f64) -> f64 {
    let kd = strike * discount;
    let sd = vol * t.sqrt();
    if sd <= 0.0 {
        return (s0 - kd).max(0.0);
    }
    let d1 = (s0 / kd).ln() / sd + 0.5 * sd;
    s0 * normal().cdf(d1) - kd * normal().cdf(d1 - sd)
}

pub fn bs_vega(s0: f64, strike: f64, t: f64, discount: f64, vol: f64) -> f64 {
    let sd = vol * t.sqrt();
    if sd <= 0.0 {
        return 0.0;
    }
    let d1 = (s0 / (strike * discount)).ln() / sd + 0.5 * sd;
    s0 * normal().pdf(d1) * t.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedVol {
    pub vol: f64,
    /// Price within a hair of an arbitrage bound, where the vol is ill-conditioned.
    pub degraded: bool,
}

/// Distance to an arbitrage bound, relative to `S0`, treated as degraded.
const NEAR_BOUND: f64 = 1e-10;
/// Largest volatility searched.
const MAX_VOL: f64 = 50.0;

/// Black-Scholes volatility reproducing `price`, by Newton steps safeguarded
/// with a bisection bracket.
pub fn implied_vol(price: f64, s0: f64, strike: f64, t: f64, discount: f64) -> Result<ImpliedVol> {
    if !(s0 > 0.0 && strike > 0.0 && t > 0.0 && discount > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "implied vol needs positive spot, strike, maturity and discount: {s0}, {strike}, {t}, {discount}"
        )));
    }
    let lower = (s0 - strike * discount).max(0.0);
    let upper = s0;
    let slack = 1e-14 * s0;
    if !(price >= lower - slack && price <= upper + slack) {
        return Err(Error::ArbitrageBounds { price, lower, upper });
    }
    let degraded = price - lower < NEAR_BOUND * s0 || upper - price < NEAR_BOUND * s0;
    let f = |v: f64| bs_call(s0, strike, t, discount, v) - price;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_VOL {
            return Ok(ImpliedVol { vol: MAX_VOL, degraded: true });
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fv = f(v);
        if fv.abs() <= 1e-15 * s0 {
            break;
        }
        if fv > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let vega = bs_vega(s0, strike, t, discount, v);
        let newton = v - fv / vega;
        v = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(ImpliedVol { vol: v, degraded })
}
