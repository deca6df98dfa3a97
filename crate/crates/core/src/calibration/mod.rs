//! Joint calibration to CDS spreads and implied volatilities.
//!
//! The parameter vector is `Θ = (ρ, σ_v, σ_d, b, c, R, X0)`; the stock price
//! is matched exactly by solving for `(v0, d0)` given `X0`. The objective is
//! `Σ_T (ĈDS_T - CDS_T)² / ĈDS_T² + C⁻² Σ_{T,D} (ÎV - IV)² / ÎV²` over the
//! filtered quotes.

pub mod optimizer;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credit::{cds_spreads, YieldCurve, QUARTERLY};
use crate::equity::{call_prices, implied_vol};
use crate::error::{Error, Result};
use crate::fourier::plan::DEFAULT_GRID;
use crate::market::{act365, QuoteSet};
use crate::model::{ModelKind, ModelParams, TimeChange};

/// `CalibrationProblem::grid` is a floor; slices whose clock needs more get it up to this size.
const MAX_ESCALATED_GRID: usize = 4096;

pub use optimizer::{minimize_least_squares, LmOptions, LmOutcome};

/// Credit-to-equity weight `C²`.
pub const DEFAULT_WEIGHT: f64 = 7.0;
pub const DEFAULT_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub rho: f64,
    pub sigma_v: f64,
    pub sigma_d: f64,
    pub b: f64,
    pub c: f64,
    pub recovery: f64,
    pub x0: f64,
}

pub const PARAMETER_NAMES: [&str; 7] = ["rho", "sigma_v", "sigma_d", "b", "c", "recovery", "x0"];

impl Theta {
    pub fn to_array(&self) -> [f64; 7] {
        [self.rho, self.sigma_v, self.sigma_d, self.b, self.c, self.recovery, self.x0]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self { rho: a[0], sigma_v: a[1], sigma_d: a[2], b: a[3], c: a[4], recovery: a[5], x0: a[6] }
    }

    pub fn from_params(p: &ModelParams) -> Self {
        let (b, c) = match *p.time_change() {
            TimeChange::Deterministic => (0.5, 1.0),
            TimeChange::Vg { b, c } | TimeChange::Exp { b, c } => (b, c),
        };
        Self { rho: p.rho(), sigma_v: p.sigma_v(), sigma_d: p.sigma_d(), b, c, recovery: p.recovery(), x0: p.x0() }
    }

    /// Model parameters with the initial state implied by stock price `s0`.
    pub fn to_params(&self, kind: ModelKind, s0: f64) -> Result<ModelParams> {
        let (v0, d0) = implied_state(s0, self.x0)?;
        let tc = TimeChange::from_kind(kind, self.b, self.c)?;
        ModelParams::new(self.sigma_v, self.sigma_d, self.rho, tc, self.recovery, v0, d0)
    }
}

/// Box constraints on `Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Theta,
    pub upper: Theta,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: Theta { rho: -0.99, sigma_v: 0.01, sigma_d: 0.0, b: 0.01, c: 1e-4, recovery: 0.0, x0: 1e-4 },
            upper: Theta { rho: 0.99, sigma_v: 2.0, sigma_d: 2.0, b: 0.99, c: 1e3, recovery: 0.99, x0: 5.0 },
        }
    }
}

impl Bounds {
    pub fn contains(&self, t: &Theta) -> bool {
        let (lo, hi, x) = (self.lower.to_array(), self.upper.to_array(), t.to_array());
        (0..7).all(|i| x[i] >= lo[i] && x[i] <= hi[i])
    }

    pub fn clamp(&self, t: &Theta) -> Theta {
        let (lo, hi, mut x) = (self.lower.to_array(), self.upper.to_array(), t.to_array());
        for i in 0..7 {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        Theta::from_array(x)
    }
}

/// `(v0, d0)` with `e^{v0} - e^{d0} = S0` and `v0 - d0 = X0`.
pub fn implied_state(s0: f64, x0: f64) -> Result<(f64, f64)> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidParameter(format!("stock price {s0} must be positive")));
    }
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::InvalidParameter(format!("log-leverage {x0} must be positive")));
    }
    let d0 = s0.ln() - x0.exp_m1().ln();
    Ok((d0 + x0, d0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProblem {
    pub quotes: QuoteSet,
    pub curve: YieldCurve,
    /// `C²`.
    pub weight: f64,
    pub bounds: Bounds,
    pub model: ModelKind,
    /// Minimum Fourier grid size for option prices.
    pub grid: usize,
    /// CDS premium accrual period in years.
    pub accrual: f64,
}

impl CalibrationProblem {
    pub fn new(quotes: QuoteSet, model: ModelKind) -> Result<Self> {
        let curve = quotes.curve()?;
        Ok(Self { quotes, curve, weight: DEFAULT_WEIGHT, bounds: Bounds::default(), model, grid: DEFAULT_GRID, accrual: QUARTERLY })
    }

    /// Indices into `Θ` that the model uses; GBM ignores `b` and `c`.
    pub fn active(&self) -> Vec<usize> {
        match self.model {
            ModelKind::Gbm => vec![0, 1, 2, 5, 6],
            _ => (0..7).collect(),
        }
    }

    fn quote_count(&self) -> usize {
        self.quotes.cds.len() + self.quotes.used_vols().count()
    }
}

/// Model CDS spreads and implied vols at the problem's quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelQuotes {
    /// Decimal spreads aligned with `quotes.cds`, `None` where pricing failed.
    pub cds: Vec<Option<f64>>,
    /// Implied vols aligned with `quotes.vols`; unused quotes and failures are `Err`
    /// with the relative arbitrage-bound violation (zero when unknown).
    pub vols: Vec<std::result::Result<f64, f64>>,
}

/// Prices every CDS and every `used` vol quote under `theta`.
pub fn model_quotes(theta: &Theta, problem: &CalibrationProblem, include_unused: bool) -> ModelQuotes {
    let q = &problem.quotes;
    let params = match theta.to_params(problem.model, q.stock_price) {
        Ok(p) => p,
        Err(_) => return ModelQuotes { cds: vec![None; q.cds.len()], vols: vec![Err(0.0); q.vols.len()] },
    };
    let tenors: Vec<f64> = q.cds.iter().map(|c| c.tenor_years).collect();
    let cds = match cds_spreads(&params, &problem.curve, &tenors, problem.accrual) {
        Ok(s) => s.into_iter().map(Some).collect(),
        Err(_) => vec![None; tenors.len()],
    };

    let mut by_maturity: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, v) in q.vols.iter().enumerate() {
        if include_unused || v.used() {
            by_maturity.entry(v.maturity_days).or_default().push(i);
        }
    }
    let groups: Vec<(u32, Vec<usize>)> = by_maturity.into_iter().collect();
    let priced: Vec<Vec<(usize, std::result::Result<f64, f64>)>> = groups
        .par_iter()
        .map(|(days, idx)| {
            let t = act365(*days);
            let disc = problem.curve.discount(t);
            let s0 = q.stock_price;
            let strikes: Vec<f64> = idx.iter().map(|&i| q.vols[i].moneyness * s0).collect();
            let prices = match call_prices(&params, &problem.curve, &strikes, t, problem.grid) {
                Err(Error::GridResolution { needed, .. }) if needed <= MAX_ESCALATED_GRID => {
                    call_prices(&params, &problem.curve, &strikes, t, needed)
                }
                other => other,
            };
            match prices {
                Err(_) => idx.iter().map(|&i| (i, Err(0.0))).collect(),
                Ok(prices) => idx
                    .iter()
                    .zip(strikes.iter().zip(prices))
                    .map(|(&i, (&k, p))| {
                        let iv = match implied_vol(p, s0, k, t, disc) {
                            Ok(iv) => Ok(iv.vol),
                            Err(Error::ArbitrageBounds { price, lower, upper }) => {
                                let viol = if price < lower { (lower - price) / lower.max(1e-300) } else { (price - upper) / upper };
                                Err(viol)
                            }
                            Err(_) => Err(0.0),
                        };
                        (i, iv)
                    })
                    .collect(),
            }
        })
        .collect();
    let mut vols = vec![Err(0.0); q.vols.len()];
    for (i, iv) in priced.into_iter().flatten() {
        vols[i] = iv;
    }
    ModelQuotes { cds, vols }
}

/// Breakdown of `𝕁` at one `Θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTerms {
    pub value: f64,
    /// Sum of squared relative CDS errors.
    pub credit: f64,
    /// Sum of squared relative IV errors, before the `1/C²` weight.
    pub equity: f64,
    /// Quotes whose model value could not be computed and were penalised.
    pub failures: usize,
    /// Weighted residuals whose squares sum to `value`.
    pub residuals: Vec<f64>,
}

pub fn objective_terms(theta: &Theta, problem: &CalibrationProblem) -> ObjectiveTerms {
    let mq = model_quotes(theta, problem, false);
    let q = &problem.quotes;
    let mut residuals = Vec::with_capacity(problem.quote_count());
    let (mut credit, mut equity, mut failures) = (0.0, 0.0, 0usize);
    for (quote, model) in q.cds.iter().zip(&mq.cds) {
        let r = match model {
            Some(s) => (quote.spread() - s) / quote.spread(),
            None => {
                failures += 1;
                1.0
            }
        };
        credit += r * r;
        residuals.push(r);
    }
    let w = problem.weight.sqrt();
    for (quote, model) in q.vols.iter().zip(&mq.vols) {
        if !quote.used() {
            continue;
        }
        let r = match model {
            Ok(iv) => (quote.implied_vol - iv) / quote.implied_vol,
            Err(viol) => {
                failures += 1;
                (viol * viol + 1.0).sqrt()
            }
        };
        equity += r * r;
        residuals.push(r / w);
    }
    ObjectiveTerms { value: credit + equity / problem.weight, credit, equity, failures, residuals }
}

pub fn objective(theta: &Theta, problem: &CalibrationProblem) -> f64 {
    objective_terms(theta, problem).value
}

/// `√𝕁` with `C² = 1`.
pub fn rmse(terms: &ObjectiveTerms) -> f64 {
    (terms.credit + terms.equity).sqrt()
}

/// Root mean square relative error per quote, `√(𝕁_{C²=1} / N)`.
pub fn rms_per_quote(terms: &ObjectiveTerms) -> f64 {
    let n = terms.residuals.len().max(1) as f64;
    ((terms.credit + terms.equity) / n).sqrt()
}

/// Copy of the problem's quotes with every CDS and used vol replaced by
/// the model value under `theta`.
pub fn synthesize_quotes(theta: &Theta, problem: &CalibrationProblem) -> Result<QuoteSet> {
    let mq = model_quotes(theta, problem, false);
    let mut out = problem.quotes.clone();
    for (q, m) in out.cds.iter_mut().zip(&mq.cds) {
        q.mid_bps = m.ok_or_else(|| Error::Degenerate(format!("no model CDS spread at {}y", q.tenor_years)))? * 1e4;
    }
    for (v, m) in out.vols.iter_mut().zip(&mq.vols) {
        if v.used() {
            v.implied_vol = *m.as_ref().map_err(|_| {
                Error::Degenerate(format!("no model implied vol at {}d, moneyness {}", v.maturity_days, v.moneyness))
            })?;
        }
    }
    Ok(out)
}

/// One local run of the multi-start search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: Theta,
    pub theta: Theta,
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: ModelKind,
    pub theta: Theta,
    pub objective: f64,
    /// `√𝕁` with `C² = 1`.
    pub rmse: f64,
    pub rms_per_quote: f64,
    pub v0: f64,
    pub d0: f64,
    /// Objective after each accepted step of the best start.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Names of parameters that finished on a bound.
    pub active_bounds: Vec<String>,
    pub failures: usize,
    pub starts: Vec<StartSummary>,
}

impl CalibrationResult {
    pub fn params(&self) -> Result<ModelParams> {
        let tc = TimeChange::from_kind(self.model, self.theta.b, self.theta.c)?;
        ModelParams::new(self.theta.sigma_v, self.theta.sigma_d, self.theta.rho, tc, self.theta.recovery, self.v0, self.d0)
    }
}

/// Internal coordinates: `c` is searched in log space.
fn to_internal(theta: &Theta, active: &[usize]) -> Vec<f64> {
    let a = theta.to_array();
    active.iter().map(|&i| if i == 4 { a[i].ln() } else { a[i] }).collect()
}

fn from_internal(x: &[f64], base: &Theta, active: &[usize]) -> Theta {
    let mut a = base.to_array();
    for (&i, &xi) in active.iter().zip(x) {
        a[i] = if i == 4 { xi.exp() } else { xi };
    }
    Theta::from_array(a)
}

/// `count` starting points: `theta_init` and deterministic perturbations
/// spread across the box.
pub fn dispersed_starts(theta_init: &Theta, bounds: &Bounds, count: usize) -> Vec<Theta> {
    const MOVES: [[f64; 7]; 4] = [
        [0.3, 1.3, 0.7, 0.8, 3.0, 1.0, 0.7],
        [-0.3, 0.75, 1.4, 1.25, 0.3, 1.0, 1.4],
        [0.0, 1.6, 1.0, 0.6, 10.0, 1.0, 1.0],
        [-0.15, 0.6, 0.5, 1.5, 0.1, 1.0, 0.5],
    ];
    let base = theta_init.to_array();
    let mut out = vec![*theta_init];
    for k in 0..count.saturating_sub(1) {
        let m = MOVES[k % MOVES.len()];
        let mut a = base;
        a[0] += m[0];
        for i in 1..7 {
            a[i] *= m[i];
        }
        a[5] = (base[5] + 0.1 * k as f64).min(0.6);
        out.push(bounds.clamp(&Theta::from_array(a)));
    }
    out
}

/// Multi-start calibration from `theta_init` and dispersed perturbations of it.
pub fn calibrate(problem: &CalibrationProblem, theta_init: &Theta) -> Result<CalibrationResult> {
    calibrate_with(problem, &dispersed_starts(theta_init, &problem.bounds, DEFAULT_STARTS), &LmOptions::default())
}

pub fn calibrate_with(problem: &CalibrationProblem, starts: &[Theta], opts: &LmOptions) -> Result<CalibrationResult> {
    if !(problem.weight > 0.0) {
        return Err(Error::InvalidParameter(format!("weight C² = {} must be positive", problem.weight)));
    }
    if starts.is_empty() {
        return Err(Error::InvalidParameter("calibration needs at least one start".into()));
    }
    if let Some(s) = starts.iter().find(|s| !problem.bounds.contains(s)) {
        return Err(Error::InvalidParameter(format!("start {s:?} is outside the bounds")));
    }
    let active = problem.active();
    let runs: Vec<(StartSummary, Vec<f64>)> = starts
        .par_iter()
        .map(|s| {
            let lower = to_internal(&problem.bounds.lower, &active);
            let upper = to_internal(&problem.bounds.upper, &active);
            let residual = |x: &[f64]| objective_terms(&from_internal(x, s, &active), problem).residuals;
            let out = minimize_least_squares(residual, &to_internal(s, &active), &lower, &upper, opts);
            let summary = StartSummary {
                start: *s,
                theta: from_internal(&out.x, s, &active),
                objective: out.objective,
                iterations: out.iterations,
                evaluations: out.evaluations,
                converged: out.converged,
            };
            (summary, out.trace)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.objective.total_cmp(&b.1 .0.objective))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (summary, trace) = runs[best].clone();
    let theta = summary.theta;
    let terms = objective_terms(&theta, problem);
    let (v0, d0) = implied_state(problem.quotes.stock_price, theta.x0)?;

    let (lo, hi, x) = (problem.bounds.lower.to_array(), problem.bounds.upper.to_array(), theta.to_array());
    let active_bounds: Vec<String> = active
        .iter()
        .filter(|&&i| {
            let tol = 1e-8 * (hi[i] - lo[i]);
            x[i] - lo[i] <= tol || hi[i] - x[i] <= tol
        })
        .map(|&i| PARAMETER_NAMES[i].to_string())
        .collect();
    for name in &active_bounds {
        log::warn!("calibrated {name} finished on its bound");
    }
    Ok(CalibrationResult {
        model: problem.model,
        theta,
        objective: terms.value,
        rmse: rmse(&terms),
        rms_per_quote: rms_per_quote(&terms),
        v0,
        d0,
        trace,
        iterations: summary.iterations,
        evaluations: runs.iter().map(|r| r.0.evaluations).sum(),
        converged: summary.converged,
        active_bounds,
        failures: terms.failures,
        starts: runs.into_iter().map(|r| r.0).collect(),
    })
}
