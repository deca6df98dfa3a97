//! Distribution of the business clock `G_T = bT + W_T`, where `W_T` is the
//! pure-jump part of the subordinator.
//!
//! The law is returned as a discrete measure (nodes and masses) suitable for
//! computing `E[f(G_T)]` for smooth `f`. VG jumps are gamma distributed, so
//! cell masses come from the regularised incomplete gamma function. The EXP
//! law is recovered by 1D FFT inversion of its characteristic function after
//! removing the atom and the first few Poisson terms, which carry the
//! non-smooth part of the density.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::model::TimeChange;

/// Uniform cells across the bulk of the jump distribution.
const BULK_CELLS: usize = 400;
/// Geometric cells refining the first bulk cell when the window starts at zero.
const NEAR_ZERO_CELLS: usize = 60;
/// FFT length for the EXP inversion.
const EXP_FFT_LEN: usize = 2048;
/// Poisson terms of the EXP law handled in closed form.
const EXP_ANALYTIC_TERMS: usize = 3;
/// Most negative recovered cell mass tolerated.
pub const NEGATIVE_LOBE_LIMIT: f64 = -1e-8;

/// Discrete representation of the law of `G_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangeDensity {
    /// Locations `g` of the continuous part's cell representatives.
    pub nodes: Vec<f64>,
    /// Probability mass attached to each node.
    pub weights: Vec<f64>,
    /// Point mass `(g, p)`; for EXP this is `(bT, e^{-cT})`.
    pub atom: Option<(f64, f64)>,
}

impl TimeChangeDensity {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.atom.map_or(0.0, |a| a.1)
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|g| g)
    }

    /// `E[f(G_T)]`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let cont: f64 = self.nodes.iter().zip(&self.weights).map(|(&g, &w)| w * f(g)).sum();
        cont + self.atom.map_or(0.0, |(g, p)| p * f(g))
    }
}

/// Law of `G_T` for `tc` at maturity `t`.
pub fn time_change_density(tc: &TimeChange, t: f64) -> Result<TimeChangeDensity> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("maturity {t} must be positive")));
    }
    match *tc {
        TimeChange::Deterministic => Ok(TimeChangeDensity { nodes: vec![], weights: vec![], atom: Some((t, 1.0)) }),
        TimeChange::Vg { b, c } => Ok(vg_density(b, c, (1.0 - b) / c, t)),
        TimeChange::Exp { b, c } => exp_density(b, c, (1.0 - b) / c, t),
    }
}

/// `[lo, hi]` holding all but a negligible fraction of a jump sum with the given
/// mean, standard deviation and exponential tail scale.
fn window(mean: f64, sd: f64, scale: f64) -> (f64, f64) {
    let lo = mean - 14.0 * sd;
    (if lo > 0.0 { lo } else { 0.0 }, mean + 14.0 * sd + 30.0 * scale)
}

/// Appends a cell with zeroth to second moments `m` as two equal-weight nodes
/// reproducing its mean and variance.
fn push_cell(nodes: &mut Vec<f64>, weights: &mut Vec<f64>, shift: f64, l: f64, u: f64, m: [f64; 3]) {
    if m[0] <= 0.0 {
        return;
    }
    let mean = (m[1] / m[0]).clamp(l, u);
    let sd = (m[2] / m[0] - mean * mean).max(0.0).sqrt();
    for x in [mean - sd, mean + sd] {
        nodes.push(shift + x.clamp(l, u));
        weights.push(0.5 * m[0]);
    }
}

fn vg_density(b: f64, c: f64, a: f64, t: f64) -> TimeChangeDensity {
    let k = c * t;
    let (lo, hi) = window(k * a, k.sqrt() * a, a);
    let width = (hi - lo) / BULK_CELLS as f64;
    let mut edges = vec![0.0];
    if lo == 0.0 {
        let first = width;
        let start = first * 1e-14;
        let ratio = (first / start).powf(1.0 / NEAR_ZERO_CELLS as f64);
        edges.extend((0..NEAR_ZERO_CELLS).map(|i| start * ratio.powi(i as i32)));
    }
    edges.extend((0..=BULK_CELLS).map(|i| lo + i as f64 * width).filter(|&e| e > 0.0));

    let cdf = |s: f64, x: f64| if x <= 0.0 { 0.0 } else if x.is_infinite() { 1.0 } else { gamma_lr(s, x / a) };
    let moments = |x: f64| [cdf(k, x), k * a * cdf(k + 1.0, x), k * (k + 1.0) * a * a * cdf(k + 2.0, x)];
    edges.push(f64::INFINITY);
    let mut nodes = Vec::with_capacity(2 * edges.len());
    let mut weights = Vec::with_capacity(2 * edges.len());
    let mut prev = [0.0; 3];
    for w in edges.windows(2) {
        let cur = moments(w[1]);
        let cell = [cur[0] - prev[0], cur[1] - prev[1], cur[2] - prev[2]];
        // The tail beyond the window is kept so the first two moments stay exact.
        let upper = if w[1].is_finite() { w[1] } else { f64::MAX };
        push_cell(&mut nodes, &mut weights, b * t, w[0], upper, cell);
        prev = cur;
    }
    TimeChangeDensity { nodes, weights, atom: None }
}

/// Regularised lower incomplete gamma `P(n, x)` for integer `n ≥ 1`.
fn erlang_cdf(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..n {
        term *= x / m as f64;
        sum += term;
    }
    1.0 - (-x).exp() * sum
}

fn exp_density(b: f64, c: f64, a: f64, t: f64) -> Result<TimeChangeDensity> {
    let k = c * t;
    let atom = (-k).exp();
    let (lo, hi) = window(k * a, (2.0 * k).sqrt() * a, a);
    let n = EXP_FFT_LEN;
    let dw = (hi - lo) / n as f64;
    let du = 2.0 * PI / (n as f64 * dw);

    // Poisson weights of the closed-form terms.
    let ln_k = k.ln();
    let poisson: Vec<f64> = (1..=EXP_ANALYTIC_TERMS)
        .map(|m| (m as f64 * ln_k - k - ln_gamma(m as f64 + 1.0)).exp())
        .collect();

    // Characteristic function of the remaining jump sum on frequencies j du,
    // with j folded to the symmetric range.
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let u = jj * du;
            let q = Complex64::new(1.0, -a * u).inv();
            let mut chi = (q * k - k).exp() - atom;
            let mut qp = q;
            for p in &poisson {
                chi -= qp * *p;
                qp *= q;
            }
            // Shift so the lattice starts at `lo`; the inversion kernel is e^{-iuw}.
            chi * Complex64::from_polar(1.0, -u * lo)
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);

    let remainder_mass: f64 = 1.0 - atom - poisson.iter().sum::<f64>();
    let mut nodes = Vec::with_capacity(2 * n + 1);
    let mut weights = Vec::with_capacity(2 * n + 1);
    let mut min_mass = 0.0f64;
    if remainder_mass > 1e-300 {
        for (i, v) in buf.iter().enumerate() {
            let mass = v.re / n as f64;
            min_mass = min_mass.min(mass);
            if mass > 0.0 {
                nodes.push(b * t + lo + i as f64 * dw);
                weights.push(mass);
            }
        }
    }
    if min_mass < NEGATIVE_LOBE_LIMIT {
        return Err(Error::InversionQuality(format!(
            "recovered business-clock density has a negative cell mass {min_mass:.3e}"
        )));
    }

    // Closed-form Erlang terms on cells centred at the lattice points.
    let mut edges = vec![0.0];
    edges.extend((0..n).map(|i| lo + (i as f64 + 0.5) * dw).filter(|&e| e > 0.0));
    edges.push(f64::INFINITY);
    let mut prev = vec![[0.0; 3]; EXP_ANALYTIC_TERMS];
    for w in edges.windows(2) {
        let mut cell = [0.0; 3];
        for (m, p) in poisson.iter().enumerate() {
            let order = m + 1;
            let of = order as f64;
            let cur = if w[1].is_finite() {
                let x = w[1] / a;
                [erlang_cdf(order, x), of * a * erlang_cdf(order + 1, x), of * (of + 1.0) * a * a * erlang_cdf(order + 2, x)]
            } else {
                [1.0, of * a, of * (of + 1.0) * a * a]
            };
            for i in 0..3 {
                cell[i] += p * (cur[i] - prev[m][i]);
            }
            prev[m] = cur;
        }
        let upper = if w[1].is_finite() { w[1] } else { f64::MAX };
        push_cell(&mut nodes, &mut weights, b * t, w[0], upper, cell);
    }
    Ok(TimeChangeDensity { nodes, weights, atom: Some((b * t, atom)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Poisson-gamma series for `E[f(G_T)]` under EXP, by Gauss-Laguerre-free
    /// midpoint quadrature of each Erlang density on a fine grid.
    fn exp_series_expectation(b: f64, c: f64, t: f64, f: impl Fn(f64) -> f64) -> f64 {
        let a = (1.0 - b) / c;
        let k = c * t;
        let mut total = (-k).exp() * f(b * t);
        let mut n = 1usize;
        loop {
            let ln_p = n as f64 * k.ln() - k - ln_gamma(n as f64 + 1.0);
            if n as f64 > k && ln_p < -40.0 {
                break;
            }
            let p = ln_p.exp();
            let shape = n as f64;
            let hi = a * (shape + 12.0 * shape.sqrt() + 40.0);
            let steps = 20_000;
            let h = hi / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                let w = (i as f64 + 0.5) * h;
                let ln_pdf = (shape - 1.0) * (w / a).ln() - w / a - ln_gamma(shape) - a.ln();
                acc += ln_pdf.exp() * f(b * t + w) * h;
            }
            total += p * acc;
            n += 1;
        }
        total
    }

    #[test]
    fn exp_atom_is_poisson_zero() {
        let (b, c, t) = (0.3, 2.0, 1.5);
        let d = time_change_density(&TimeChange::Exp { b, c }, t).unwrap();
        let (g, p) = d.atom.unwrap();
        assert!((g - b * t).abs() < 1e-15);
        assert!((p - (-c * t).exp()).abs() < 1e-15);
    }

    #[test]
    fn mass_and_mean() {
        for tc in [
            TimeChange::Vg { b: 0.2, c: 0.5 },
            TimeChange::Vg { b: 0.5, c: 30.0 },
            TimeChange::Vg { b: 0.01, c: 900.0 },
            TimeChange::Exp { b: 0.2, c: 0.5 },
            TimeChange::Exp { b: 0.5, c: 30.0 },
            TimeChange::Exp { b: 0.9, c: 900.0 },
        ] {
            for t in [0.25, 1.0, 10.0] {
                let d = time_change_density(&tc, t).unwrap();
                assert!((d.total_mass() - 1.0).abs() < 1e-6, "{tc:?} {t}: mass {}", d.total_mass());
                assert!((d.mean() - t).abs() < 1e-4 * t, "{tc:?} {t}: mean {}", d.mean());
            }
        }
    }

    #[test]
    fn exp_matches_poisson_gamma_series() {
        let (b, c, t) = (0.3, 1.7, 2.0);
        let d = time_change_density(&TimeChange::Exp { b, c }, t).unwrap();
        for f in [|g: f64| (-g).exp(), |g: f64| g * g, |g: f64| (1.0 + g).sqrt()] {
            let got = d.expectation(f);
            let want = exp_series_expectation(b, c, t, f);
            assert!((got - want).abs() < 1e-6 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn vg_second_moment_and_laplace_transform() {
        let (b, c, t) = (0.25, 0.4, 1.0);
        let a = (1.0 - b) / c;
        let k = c * t;
        let d = time_change_density(&TimeChange::Vg { b, c }, t).unwrap();
        let var = d.expectation(|g| (g - t) * (g - t));
        assert!((var - k * a * a).abs() < 1e-4 * k * a * a, "{var}");
        // E[e^{-G}] = e^{-bT} (1 + a)^{-cT}.
        let lt = d.expectation(|g| (-g).exp());
        let want = (-b * t).exp() * (1.0 + a).powf(-k);
        assert!((lt - want).abs() < 1e-5, "{lt} vs {want}");
    }

    #[test]
    fn deterministic_is_a_point_mass() {
        let d = time_change_density(&TimeChange::Deterministic, 3.0).unwrap();
        assert_eq!(d.atom, Some((3.0, 1.0)));
        assert_eq!(d.expectation(|g| g * g), 9.0);
    }
}
