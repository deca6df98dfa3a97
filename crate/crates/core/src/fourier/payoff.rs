//! Two-dimensional Fourier transform of the unit-strike spread payoff
//! `(e^{x1} - e^{x2} - 1)^+`.

use num_complex::Complex64;

use super::gamma::ln_gamma;
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Whether a contour shift `ε` gives a convergent transform.
pub fn is_admissible(eps: [f64; 2]) -> bool {
    eps[1] > 0.0 && eps[0] + eps[1] < -1.0
}

/// `ln P̂(u1, u2)` where `P̂ = Γ(i(u1+u2) - 1) Γ(-i u2) / Γ(i u1 + 1)`.
pub fn ln_payoff_transform(u1: Complex64, u2: Complex64) -> Result<Complex64> {
    let a = ln_gamma(I * (u1 + u2) - 1.0)?;
    let b = ln_gamma(-I * u2)?;
    let c = ln_gamma(I * u1 + 1.0)?;
    Ok(a + b - c)
}

/// `P̂(u1, u2)`, valid on `ℝ² + iε` for admissible `ε`.
pub fn payoff_transform(u1: Complex64, u2: Complex64) -> Result<Complex64> {
    let lp = ln_payoff_transform(u1, u2).map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("payoff transform at ({u1}, {u2}): {msg}")),
        other => other,
    })?;
    Ok(lp.exp())
}

/// `ln P̂` on the lattice `ξ_j = (j - n/2) du + iε`, stored as three 1D tables.
///
/// Each gamma factor depends on `u1`, `u2` or `u1 + u2` only, so the whole
/// `n × n` lattice needs `4n` gamma evaluations:
/// `ln P̂(j1, j2) = sum[j1 + j2] + second[j2] - first[j1]`.
#[derive(Debug, Clone)]
pub struct PayoffTables {
    pub first: Vec<Complex64>,
    pub second: Vec<Complex64>,
    pub sum: Vec<Complex64>,
}

impl PayoffTables {
    pub fn new(n: usize, du: f64, eps: [f64; 2]) -> Result<Self> {
        let half = (n / 2) as f64;
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for j in 0..n {
            let xi = (j as f64 - half) * du;
            first.push(ln_gamma(I * Complex64::new(xi, eps[0]) + 1.0)?);
            second.push(ln_gamma(-I * Complex64::new(xi, eps[1]))?);
        }
        let mut sum = Vec::with_capacity(2 * n - 1);
        for m in 0..(2 * n - 1) {
            let xi = (m as f64 - 2.0 * half) * du;
            sum.push(ln_gamma(I * Complex64::new(xi, eps[0] + eps[1]) - 1.0)?);
        }
        Ok(Self { first, second, sum })
    }

    #[inline]
    pub fn ln_at(&self, j1: usize, j2: usize) -> Complex64 {
        self.sum[j1 + j2] + self.second[j2] - self.first[j1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_points() {
        // ε = (-3, 1): arguments become Γ(1) Γ(1) / Γ(4).
        let p = payoff_transform(Complex64::new(0.0, -3.0), Complex64::new(0.0, 1.0)).unwrap();
        assert!((p.re - 1.0 / 6.0).abs() < 1e-14 && p.im.abs() < 1e-14);
        // ε = (-4, 2): Γ(1) Γ(2) / Γ(5) = 1/24.
        let p = payoff_transform(Complex64::new(0.0, -4.0), Complex64::new(0.0, 2.0)).unwrap();
        assert!((p.re - 1.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn conjugate_symmetry_on_contour() {
        let u1 = Complex64::new(1.3, -3.0);
        let u2 = Complex64::new(-0.7, 1.0);
        let a = payoff_transform(u1, u2).unwrap();
        let b = payoff_transform(-u1.conj(), -u2.conj()).unwrap();
        assert!((a - b.conj()).norm() < 1e-14 * a.norm());
    }

    #[test]
    fn tables_match_direct_evaluation() {
        let (n, du, eps) = (16, 0.37, [-2.2, 0.6]);
        let t = PayoffTables::new(n, du, eps).unwrap();
        for &(j1, j2) in &[(0, 0), (3, 11), (15, 15), (8, 8), (10, 2)] {
            let u1 = Complex64::new((j1 as f64 - 8.0) * du, eps[0]);
            let u2 = Complex64::new((j2 as f64 - 8.0) * du, eps[1]);
            let direct = payoff_transform(u1, u2).unwrap();
            let tab = t.ln_at(j1, j2).exp();
            assert!((direct - tab).norm() < 1e-12 * direct.norm());
        }
    }

    #[test]
    fn admissibility() {
        assert!(is_admissible([-3.0, 1.0]));
        assert!(!is_admissible([-1.5, 0.6]));
        assert!(!is_admissible([-3.0, 0.0]));
    }
}
