//! Vanilla spread-option prices from the joint characteristic function.
//!
//! For unit strike, `F(y) = E[(e^{y1 + Δv} - e^{y2 + Δd} - 1)^+]` equals
//! `(2π)^{-2} e^{-ε·y} ∫ e^{iξ·y} Φ(ξ + iε) P̂(ξ + iε) d²ξ`, where `y` is the
//! initial log-state and `Φ` the increment characteristic function. Prices at
//! strike `K` and discount factor `δ` follow from homogeneity:
//! `K δ F(v0 - log(Kδ), d0 - log(Kδ))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::payoff::PayoffTables;
use super::plan::FourierPlan;
use super::JointCharacteristic;
use crate::error::{Error, Result};

/// Boundary-to-peak integrand ratio above which the tail is reported as undecayed.
pub const TRUNCATION_LIMIT: f64 = 1e-8;

/// Integrand `Φ(ξ + iε) P̂(ξ + iε)` sampled on the plan's frequency lattice.
#[derive(Debug, Clone)]
pub struct SpreadIntegrand {
    plan: FourierPlan,
    /// Row-major, index `j1 * n2 + j2`.
    values: Vec<Complex64>,
    boundary_ratio: f64,
}

impl SpreadIntegrand {
    pub fn new(cf: &dyn JointCharacteristic, plan: &FourierPlan, t: f64) -> Result<Self> {
        plan.validate()?;
        if plan.n1 != plan.n2 || plan.du1 != plan.du2 {
            return Err(Error::InvalidParameter("spread integrand needs a square lattice".into()));
        }
        let n = plan.n1;
        let du = plan.du1;
        let eps = plan.eps;
        let tables = PayoffTables::new(n, du, eps)?;
        let xi: Vec<f64> = (0..n).map(|j| plan.frequency(0, j)).collect();

        let eval = |j1: usize, j2: usize| -> Result<Complex64> {
            let u = [Complex64::new(xi[j1], eps[0]), Complex64::new(xi[j2], eps[1])];
            let ln = cf.log_cf(u, t)? + tables.ln_at(j1, j2);
            Ok(if ln.re < -745.0 { Complex64::new(0.0, 0.0) } else { ln.exp() })
        };
        // H(-ξ) is the conjugate of H(ξ), so rows past the middle mirror earlier ones.
        let half = n / 2;
        let rows: Vec<Result<Vec<Complex64>>> = (0..=half)
            .into_par_iter()
            .map(|j1| (0..n).map(|j2| eval(j1, j2)).collect())
            .collect();
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for (j1, row) in rows.into_iter().enumerate() {
            values[j1 * n..(j1 + 1) * n].copy_from_slice(&row?);
        }
        for j1 in half + 1..n {
            values[j1 * n] = eval(j1, 0)?;
            for j2 in 1..n {
                values[j1 * n + j2] = values[(n - j1) * n + (n - j2)].conj();
            }
        }

        let mut peak = 0.0f64;
        let mut edge = 0.0f64;
        for j1 in 0..n {
            for j2 in 0..n {
                let a = values[j1 * n + j2].norm();
                peak = peak.max(a);
                if j1 == 0 || j2 == 0 || j1 == n - 1 || j2 == n - 1 {
                    edge = edge.max(a);
                }
            }
        }
        if !peak.is_finite() {
            return Err(Error::Overflow("spread integrand is not finite".into()));
        }
        let boundary_ratio = edge / peak;
        if boundary_ratio > TRUNCATION_LIMIT {
            return Err(Error::Truncation { ratio: boundary_ratio, limit: TRUNCATION_LIMIT });
        }
        Ok(Self { plan: *plan, values, boundary_ratio })
    }

    pub fn plan(&self) -> &FourierPlan {
        &self.plan
    }

    pub fn boundary_ratio(&self) -> f64 {
        self.boundary_ratio
    }

    fn normalisation(&self, y: [f64; 2]) -> f64 {
        let eps = self.plan.eps;
        (-(eps[0] * y[0] + eps[1] * y[1])).exp() * self.plan.du1 * self.plan.du2 / (4.0 * PI * PI)
    }

    fn phases(&self, axis: usize, y: f64) -> Vec<Complex64> {
        let n = self.plan.n1;
        (0..n).map(|j| Complex64::from_polar(1.0, self.plan.frequency(axis, j) * y)).collect()
    }

    /// Unit-strike prices at arbitrary log-states by direct summation, `O(n²)` each.
    pub fn price_points(&self, points: &[[f64; 2]]) -> Vec<f64> {
        let n = self.plan.n1;
        points
            .par_iter()
            .map(|&y| {
                let p1 = self.phases(0, y[0]);
                let p2 = self.phases(1, y[1]);
                let mut acc = Complex64::new(0.0, 0.0);
                for j1 in 0..n {
                    let row = &self.values[j1 * n..(j1 + 1) * n];
                    let mut r = Complex64::new(0.0, 0.0);
                    for (h, p) in row.iter().zip(&p2) {
                        r += h * p;
                    }
                    acc += p1[j1] * r;
                }
                self.normalisation(y) * acc.re
            })
            .collect()
    }

    /// Unit-strike prices at `base + t (1, 1)` for each `t` in `shifts`.
    ///
    /// Along a diagonal the phase depends on `ξ1 + ξ2` only, so the lattice
    /// collapses to `2n - 1` terms once per base point.
    pub fn price_diagonal(&self, base: [f64; 2], shifts: &[f64]) -> Vec<f64> {
        let n = self.plan.n1;
        let du = self.plan.du1;
        let p1 = self.phases(0, base[0]);
        let p2 = self.phases(1, base[1]);
        let mut collapsed = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
        for j1 in 0..n {
            let row = &self.values[j1 * n..(j1 + 1) * n];
            let out = &mut collapsed[j1..j1 + n];
            for ((c, h), p) in out.iter_mut().zip(row).zip(&p2) {
                *c += p1[j1] * h * p;
            }
        }
        shifts
            .iter()
            .map(|&t| {
                let step = Complex64::from_polar(1.0, t * du);
                let mut rot = Complex64::from_polar(1.0, -(n as f64) * t * du);
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, c) in collapsed.iter().enumerate() {
                    if m % 256 == 0 {
                        rot = Complex64::from_polar(1.0, (m as f64 - n as f64) * t * du);
                    }
                    acc += c * rot;
                    rot *= step;
                }
                self.normalisation([base[0] + t, base[1] + t]) * acc.re
            })
            .collect()
    }
}

/// Unit-strike vanilla spread prices on the plan's state lattice, from one 2D FFT.
#[derive(Debug, Clone)]
pub struct PriceGrid {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major, index `k1 * axis2.len() + k2`.
    pub values: Vec<f64>,
    pub discount: f64,
}

/// No-arbitrage bounds of the unit-strike spread price at log-state `y`.
fn unit_bounds(y: [f64; 2]) -> (f64, f64) {
    let hi = y[0].exp();
    ((hi - y[1].exp() - 1.0).max(0.0), hi)
}

fn clamp_unit(y: [f64; 2], value: f64) -> f64 {
    let (lo, hi) = unit_bounds(y);
    if value.is_nan() {
        lo
    } else {
        value.clamp(lo, hi)
    }
}

/// Prices `F` on the full state lattice of `plan`.
pub fn price_vanilla_spread_grid(
    cf: &dyn JointCharacteristic,
    plan: &FourierPlan,
    t: f64,
    discount: f64,
) -> Result<PriceGrid> {
    let integrand = SpreadIntegrand::new(cf, plan, t)?;
    let n = plan.n1;
    let c = plan.center;
    let p1 = integrand.phases(0, c[0]);
    let p2 = integrand.phases(1, c[1]);
    let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };

    let mut buf: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (j1, j2) = (idx / n, idx % n);
            integrand.values[idx] * p1[j1] * p2[j2] * sign(j1 + j2)
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    buf.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(&mut buf, n);
    buf.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(&mut buf, n);

    let axis1 = plan.axis(0);
    let axis2 = plan.axis(1);
    let scale = plan.du1 * plan.du2 / (4.0 * PI * PI);
    let eps = plan.eps;
    let values = (0..n * n)
        .map(|idx| {
            let (k1, k2) = (idx / n, idx % n);
            let y = [axis1[k1], axis2[k2]];
            let raw = sign(k1 + k2) * buf[idx].re * scale * (-(eps[0] * y[0] + eps[1] * y[1])).exp();
            clamp_unit(y, raw)
        })
        .collect();
    Ok(PriceGrid { axis1, axis2, values, discount })
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Keys cubic convolution kernel weights for fractional offset `s ∈ [0, 1)`.
fn cubic_weights(s: f64) -> [f64; 4] {
    const A: f64 = -0.5;
    let w = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            (A + 2.0) * x.powi(3) - (A + 3.0) * x * x + 1.0
        } else if x < 2.0 {
            A * x.powi(3) - 5.0 * A * x * x + 8.0 * A * x - 4.0 * A
        } else {
            0.0
        }
    };
    [w(1.0 + s), w(s), w(1.0 - s), w(2.0 - s)]
}

impl PriceGrid {
    pub fn n1(&self) -> usize {
        self.axis1.len()
    }

    pub fn n2(&self) -> usize {
        self.axis2.len()
    }

    pub fn at(&self, k1: usize, k2: usize) -> f64 {
        self.values[k1 * self.n2() + k2]
    }

    /// Bicubic interpolation of the unit-strike price, clamped to its bounds.
    pub fn interpolate(&self, y: [f64; 2]) -> Result<f64> {
        let locate = |axis: &[f64], x: f64| -> Result<(usize, f64)> {
            let h = axis[1] - axis[0];
            let pos = (x - axis[0]) / h;
            let k = pos.floor();
            if k < 1.0 || k as usize + 2 >= axis.len() {
                return Err(Error::InvalidParameter(format!("log-state {x} is outside the price grid")));
            }
            Ok((k as usize, pos - k))
        };
        let (k1, s1) = locate(&self.axis1, y[0])?;
        let (k2, s2) = locate(&self.axis2, y[1])?;
        let w1 = cubic_weights(s1);
        let w2 = cubic_weights(s2);
        let mut acc = 0.0;
        for (a, wa) in w1.iter().enumerate() {
            for (b, wb) in w2.iter().enumerate() {
                acc += wa * wb * self.at(k1 + a - 1, k2 + b - 1);
            }
        }
        Ok(clamp_unit(y, acc))
    }

    /// Vanilla spread call `E[δ (V_T - D_T - K)^+]` read off the grid, clamped
    /// below by the parity bound.
    pub fn call(&self, v0: f64, d0: f64, strike: f64) -> Result<f64> {
        let k = (strike * self.discount).ln();
        let unit = self.interpolate([v0 - k, d0 - k])?;
        let intrinsic = (v0.exp() - d0.exp() - strike * self.discount).max(0.0);
        Ok((strike * self.discount * unit).max(intrinsic))
    }
}
