//! Complex gamma function by the Lanczos approximation (g = 7, n = 9).

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(z)` for complex `z`, up to an additive multiple of `2πi`.
///
/// Uses the reflection formula for `Re z < 0.5`. Fails at the poles
/// `z = 0, -1, -2, ...`.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::Domain(format!("gamma pole at z={}", z.re)));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("gamma argument {z} is not finite")));
    }
    if z.re < 0.5 {
        Ok(Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - lanczos(Complex64::new(1.0, 0.0) - z))
    } else {
        Ok(lanczos(z))
    }
}

/// `Γ(z)` for complex `z`.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    let lg = ln_gamma(z)?;
    if lg.re > 709.0 {
        return Err(Error::Overflow(format!("gamma({z})")));
    }
    Ok(lg.exp())
}

fn lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + x.ln()
}

/// `ln sin(πz)`, evaluated without overflow for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    if z.im > 1.0 {
        // sin(πz) = (i/2) e^{-iπz} (1 - e^{2iπz})
        let e = (2.0 * i * PI * z).exp();
        Complex64::new(-(2.0f64.ln()), PI / 2.0) - i * PI * z + (1.0 - e).ln()
    } else if z.im < -1.0 {
        // sin(πz) = (-i/2) e^{iπz} (1 - e^{-2iπz})
        let e = (-2.0 * i * PI * z).exp();
        Complex64::new(-(2.0f64.ln()), -PI / 2.0) + i * PI * z + (1.0 - e).ln()
    } else {
        (PI * z).sin().ln()
    }
}
