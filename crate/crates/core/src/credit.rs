//! Defaultable bonds and CDS par spreads.

use crate::barrier::{survival_curve, survival_probability};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Zero curve, linear in continuously compounded zero yield and flat beyond
/// the first and last pillars.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldCurve {
    tenors: Vec<f64>,
    yields: Vec<f64>,
}

impl YieldCurve {
    pub fn new(pillars: &[(f64, f64)]) -> Result<Self> {
        if pillars.is_empty() {
            return Err(Error::InvalidParameter("yield curve needs at least one pillar".into()));
        }
        for w in pillars.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(format!(
                    "yield curve tenors must increase strictly: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(p) = pillars.iter().find(|p| !(p.0 > 0.0 && p.0.is_finite() && p.1.is_finite())) {
            return Err(Error::InvalidParameter(format!("invalid yield pillar {p:?}")));
        }
        Ok(Self { tenors: pillars.iter().map(|p| p.0).collect(), yields: pillars.iter().map(|p| p.1).collect() })
    }

    pub fn flat(rate: f64) -> Self {
        Self { tenors: vec![1.0], yields: vec![rate] }
    }

    /// Zero yields from par Treasury quotes. Tenors up to one year are taken
    /// as zero yields; longer tenors are par bonds with semiannual coupons.
    pub fn bootstrap_par(quotes: &[(f64, f64)]) -> Result<Self> {
        Self::new(quotes)?;
        let mut curve = Self { tenors: vec![], yields: vec![] };
        for &(tenor, par) in quotes {
            if tenor <= 1.0 {
                curve.tenors.push(tenor);
                curve.yields.push(par);
                continue;
            }
            let coupon_dates: Vec<f64> = {
                let count = (tenor * 2.0 - 1e-9).ceil() as usize;
                let mut d: Vec<f64> = (0..count).map(|i| tenor - 0.5 * i as f64).filter(|&x| x > 1e-9).collect();
                d.reverse();
                d
            };
            let bond_value = |y: f64| {
                let mut trial = curve.clone();
                trial.tenors.push(tenor);
                trial.yields.push(y);
                let coupons: f64 = coupon_dates.iter().map(|&s| trial.discount(s)).sum();
                0.5 * par * coupons + trial.discount(tenor) - 1.0
            };
            // Bond value falls with yield; bracket then bisect.
            let (mut lo, mut hi) = (par - 1.0, par + 1.0);
            if bond_value(lo) < 0.0 || bond_value(hi) > 0.0 {
                return Err(Error::NonConvergence { iterations: 0, objective: bond_value(par) });
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if bond_value(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            curve.tenors.push(tenor);
            curve.yields.push(0.5 * (lo + hi));
        }
        Ok(curve)
    }

    pub fn pillars(&self) -> Vec<(f64, f64)> {
        self.tenors.iter().copied().zip(self.yields.iter().copied()).collect()
    }

    pub fn zero_yield(&self, t: f64) -> f64 {
        let n = self.tenors.len();
        if t <= self.tenors[0] {
            return self.yields[0];
        }
        if t >= self.tenors[n - 1] {
            return self.yields[n - 1];
        }
        let i = self.tenors.partition_point(|&x| x <= t);
        let (t0, t1) = (self.tenors[i - 1], self.tenors[i]);
        let (y0, y1) = (self.yields[i - 1], self.yields[i]);
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }

    pub fn discount(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            (-self.zero_yield(t) * t).exp()
        }
    }
}

/// Premium dates `t_k = k Δt`, `k = 1..=N`, of a CDS with tenor `N Δt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdsSchedule {
    pub tenor: f64,
    pub accrual: f64,
    pub periods: usize,
}

pub const QUARTERLY: f64 = 0.25;

impl CdsSchedule {
    pub fn new(tenor: f64, accrual: f64) -> Result<Self> {
        if !(accrual > 0.0 && tenor > 0.0) {
            return Err(Error::InvalidParameter(format!("CDS tenor {tenor} and accrual {accrual} must be positive")));
        }
        let periods = (tenor / accrual).round();
        if periods < 1.0 || (periods * accrual - tenor).abs() > 1e-8 * tenor.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "CDS tenor {tenor} is not a whole number of {accrual}-year periods"
            )));
        }
        Ok(Self { tenor, accrual, periods: periods as usize })
    }

    pub fn quarterly(tenor: f64) -> Result<Self> {
        Self::new(tenor, QUARTERLY)
    }

    pub fn dates(&self) -> Vec<f64> {
        (1..=self.periods).map(|k| k as f64 * self.accrual).collect()
    }
}

/// Defaultable zero-coupon bond per unit face, recovery of par paid at maturity.
pub fn bond_price(params: &ModelParams, curve: &YieldCurve, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("bond maturity {t} must be positive")));
    }
    let p = survival_probability(params, t)?;
    let r = params.recovery();
    Ok(curve.discount(t) * (p + r * (1.0 - p)))
}

/// Premium-leg annuity below which the spread is reported as degenerate.
const MIN_ANNUITY: f64 = 1e-12;

/// Par spread from survival probabilities `survival[k-1] = P(t_k)`.
pub fn cds_spread_from_survival(
    survival: &[f64],
    curve: &YieldCurve,
    schedule: &CdsSchedule,
    recovery: f64,
) -> Result<f64> {
    let n = schedule.periods;
    if survival.len() < n {
        return Err(Error::InvalidParameter(format!("need {n} survival probabilities, got {}", survival.len())));
    }
    let dates = schedule.dates();
    let disc: Vec<f64> = dates.iter().map(|&t| curve.discount(t)).collect();
    let mut protection = disc[n - 1] * (1.0 - survival[n - 1]);
    for k in 0..n - 1 {
        protection += (1.0 - survival[k]) * (disc[k] - disc[k + 1]);
    }
    let annuity = schedule.accrual * (0..n).map(|k| survival[k] * disc[k]).sum::<f64>();
    if annuity < MIN_ANNUITY {
        return Err(Error::Degenerate(format!("premium leg annuity {annuity:.3e} vanishes")));
    }
    Ok((1.0 - recovery) * protection / annuity)
}

pub fn cds_spread(params: &ModelParams, curve: &YieldCurve, schedule: &CdsSchedule) -> Result<f64> {
    let survival = survival_curve(params, &schedule.dates())?;
    cds_spread_from_survival(&survival, curve, schedule, params.recovery())
}

/// Par spreads for several tenors sharing one premium frequency, reusing the
/// survival probabilities on the common date grid.
pub fn cds_spreads(params: &ModelParams, curve: &YieldCurve, tenors: &[f64], accrual: f64) -> Result<Vec<f64>> {
    let schedules = tenors.iter().map(|&t| CdsSchedule::new(t, accrual)).collect::<Result<Vec<_>>>()?;
    let longest = match schedules.iter().max_by_key(|s| s.periods) {
        Some(s) => *s,
        None => return Ok(vec![]),
    };
    let survival = survival_curve(params, &longest.dates())?;
    schedules
        .iter()
        .map(|s| cds_spread_from_survival(&survival, curve, s, params.recovery()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeChange;

    #[test]
    fn curve_interpolates_linearly_in_yield() {
        let c = YieldCurve::new(&[(1.0, 0.01), (3.0, 0.03)]).unwrap();
        assert_eq!(c.discount(0.0), 1.0);
        assert!((c.zero_yield(2.0) - 0.02).abs() < 1e-15);
        assert_eq!(c.zero_yield(0.1), 0.01);
        assert_eq!(c.zero_yield(10.0), 0.03);
        assert!(YieldCurve::new(&[(1.0, 0.01), (1.0, 0.02)]).is_err());
    }

    #[test]
    fn bootstrap_reprices_par_bonds() {
        let quotes = [(0.5, 0.01), (1.0, 0.012), (2.0, 0.015), (5.0, 0.025), (10.0, 0.035)];
        let c = YieldCurve::bootstrap_par(&quotes).unwrap();
        for &(t, par) in &quotes[2..] {
            let mut coupons = 0.0;
            let mut s = t;
            while s > 1e-9 {
                coupons += c.discount(s);
                s -= 0.5;
            }
            assert!((0.5 * par * coupons + c.discount(t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_hazard_matches_direct_sum() {
        let (lambda, r) = (0.02, 0.4);
        let curve = YieldCurve::flat(0.0);
        let sched = CdsSchedule::quarterly(5.0).unwrap();
        let surv: Vec<f64> = sched.dates().iter().map(|t| (-lambda * t).exp()).collect();
        let got = cds_spread_from_survival(&surv, &curve, &sched, r).unwrap();
        let p = |k: usize| (-lambda * 0.25 * k as f64).exp();
        let num = (1.0 - p(20)) * (1.0 - r);
        let den = 0.25 * (1..=20).map(p).sum::<f64>();
        assert!((got - num / den).abs() < 1e-12);
    }

    #[test]
    fn single_period_identity() {
        let p = ModelParams::new(0.3, 0.1, 0.0, TimeChange::Vg { b: 0.4, c: 2.0 }, 0.35, 0.4, 0.0).unwrap();
        let curve = YieldCurve::flat(0.03);
        let sched = CdsSchedule::quarterly(0.25).unwrap();
        let s = cds_spread(&p, &curve, &sched).unwrap();
        let surv = survival_probability(&p, 0.25).unwrap();
        let disc = curve.discount(0.25);
        assert!((s * 0.25 * surv * disc - (1.0 - 0.35) * disc * (1.0 - surv)).abs() < 1e-12);
    }

    #[test]
    fn bond_bounds_and_limits() {
        let curve = YieldCurve::flat(0.02);
        let p = ModelParams::new(0.3, 0.1, 0.0, TimeChange::Deterministic, 0.3, 0.3, 0.0).unwrap();
        let b = bond_price(&p, &curve, 5.0).unwrap();
        assert!(b > 0.3 * curve.discount(5.0) && b < curve.discount(5.0));
        let safe = p.with_state(40.0, 0.0).unwrap().with_recovery(0.0).unwrap();
        assert!((bond_price(&safe, &curve, 5.0).unwrap() - curve.discount(5.0)).abs() < 1e-14);
        let full = p.with_recovery(0.999_999_999).unwrap();
        assert!((bond_price(&full, &curve, 5.0).unwrap() - curve.discount(5.0)).abs() < 1e-8);
    }

    #[test]
    fn survival_one_gives_zero_spread() {
        let safe = ModelParams::new(0.3, 0.1, 0.0, TimeChange::Deterministic, 0.4, 50.0, 0.0).unwrap();
        let s = cds_spreads(&safe, &YieldCurve::flat(0.01), &[1.0, 5.0], QUARTERLY).unwrap();
        assert!(s.iter().all(|&x| x.abs() < 1e-14));
    }
}
