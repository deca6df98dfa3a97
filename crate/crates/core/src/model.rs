//! Model parameters, derived coefficients and characteristic functions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest real part accepted in an exponent before it is reported as overflow.
const MAX_EXPONENT: f64 = 700.0;

/// Which dynamics drive the business clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbm,
    Vg,
    Exp,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gbm => "gbm",
            ModelKind::Vg => "vg",
            ModelKind::Exp => "exp",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbm" => Ok(ModelKind::Gbm),
            "vg" => Ok(ModelKind::Vg),
            "exp" => Ok(ModelKind::Exp),
            other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }
}

/// The business clock `G_t`.
///
/// Both subordinators have drift `b` and jump part normalised so that
/// `E[G_t] = t`, which fixes the jump scale `a = (1 - b) / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeChange {
    /// `G_t = t`.
    Deterministic,
    /// Gamma process with drift: Lévy density `c e^{-z/a} / z`.
    Vg { b: f64, c: f64 },
    /// Compound Poisson with exponential jumps: Lévy density `c e^{-z/a} / a`.
    Exp { b: f64, c: f64 },
}

impl TimeChange {
    pub fn vg(b: f64, c: f64) -> Result<Self> {
        Self::check(b, c)?;
        Ok(TimeChange::Vg { b, c })
    }

    pub fn exp(b: f64, c: f64) -> Result<Self> {
        Self::check(b, c)?;
        Ok(TimeChange::Exp { b, c })
    }

    /// Builds the clock for `kind`; `b` and `c` are ignored for GBM.
    pub fn from_kind(kind: ModelKind, b: f64, c: f64) -> Result<Self> {
        match kind {
            ModelKind::Gbm => Ok(TimeChange::Deterministic),
            ModelKind::Vg => Self::vg(b, c),
            ModelKind::Exp => Self::exp(b, c),
        }
    }

    fn check(b: f64, c: f64) -> Result<()> {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParameter(format!("drift fraction b={b} not in (0,1)")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("jump intensity c={c} must be positive")));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TimeChange::Deterministic => ModelKind::Gbm,
            TimeChange::Vg { .. } => ModelKind::Vg,
            TimeChange::Exp { .. } => ModelKind::Exp,
        }
    }

    /// Drift fraction `b`; 1 for the deterministic clock.
    pub fn drift(&self) -> f64 {
        match *self {
            TimeChange::Deterministic => 1.0,
            TimeChange::Vg { b, .. } | TimeChange::Exp { b, .. } => b,
        }
    }

    /// Jump intensity scale `c`, if the clock has jumps.
    pub fn intensity(&self) -> Option<f64> {
        match *self {
            TimeChange::Deterministic => None,
            TimeChange::Vg { c, .. } | TimeChange::Exp { c, .. } => Some(c),
        }
    }

    /// Mean jump scale `a = (1 - b) / c`; zero for the deterministic clock.
    pub fn jump_scale(&self) -> f64 {
        match *self {
            TimeChange::Deterministic => 0.0,
            TimeChange::Vg { b, c } | TimeChange::Exp { b, c } => (1.0 - b) / c,
        }
    }

    /// Laplace exponent `ψ(u, t) = -log E[exp(-u G_t)]`.
    pub fn laplace_exponent(&self, u: Complex64, t: f64) -> Result<Complex64> {
        match *self {
            TimeChange::Deterministic => Ok(u * t),
            TimeChange::Vg { b, c } => {
                let a = (1.0 - b) / c;
                let w = 1.0 + a * u;
                if w.re <= 0.0 {
                    return Err(domain(u, a));
                }
                Ok(t * (b * u + c * w.ln()))
            }
            TimeChange::Exp { b, c } => {
                let a = (1.0 - b) / c;
                let w = 1.0 + a * u;
                if w.re <= 0.0 {
                    return Err(domain(u, a));
                }
                Ok(t * (b * u + a * c * u / w))
            }
        }
    }

    /// Smallest real `u` (exclusive) at which `ψ` is defined; `-inf` for GBM.
    pub fn domain_lower_bound(&self) -> f64 {
        match self {
            TimeChange::Deterministic => f64::NEG_INFINITY,
            _ => -1.0 / self.jump_scale(),
        }
    }
}

fn domain(u: Complex64, a: f64) -> Error {
    Error::Domain(format!("Laplace exponent argument {u} has Re(1 + a u) <= 0 with a={a}"))
}

/// `ψ(u, t)` for the clock `tc`.
pub fn laplace_exponent(tc: &TimeChange, u: Complex64, t: f64) -> Result<Complex64> {
    tc.laplace_exponent(u, t)
}

/// Coefficients derived once from `(σ_v, σ_d, ρ)`.
///
/// The log-leverage is `X = X_0 + σ_X (B + α g)` in business time `g`; the
/// orthogonal factor `B^⊥` carries drift `α⊥` and enters both `v` and `d`
/// with the same loading `σ_v ρ̄_vX = σ_d ρ̄_dX`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoefficients {
    pub sigma_x: f64,
    pub alpha: f64,
    /// Drift of `B^⊥` making `e^{v}` and `e^{d}` martingales. Zero when `σ_d = 0`,
    /// where `B^⊥` does not enter.
    pub alpha_perp: f64,
    pub rho_vx: f64,
    pub rho_dx: f64,
    pub rho_bar_vx: f64,
    pub rho_bar_dx: f64,
    /// Second-row entry of the decoupling matrix; `None` when `ρσ_vσ_d = σ_d²`.
    pub m: Option<f64>,
    /// `M = [1, -1; 1, m]`, mapping `(v, d)` to `(X, X⊥)`.
    pub change_of_basis: Option<[[f64; 2]; 2]>,
    /// Skew reflection `M⁻¹ diag(-1, 1) M`.
    pub reflection: [[f64; 2]; 2],
}

impl DerivedCoefficients {
    pub fn new(sigma_v: f64, sigma_d: f64, rho: f64) -> Result<Self> {
        let var_x = sigma_v * sigma_v - 2.0 * rho * sigma_v * sigma_d + sigma_d * sigma_d;
        if !(var_x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "leverage variance {var_x} must be positive"
            )));
        }
        let sigma_x = var_x.sqrt();
        let alpha = (sigma_d * sigma_d - sigma_v * sigma_v) / (2.0 * sigma_x);
        let rho_vx = (sigma_v - sigma_d * rho) / sigma_x;
        let rho_dx = (rho * sigma_v - sigma_d) / sigma_x;
        let root = (1.0 - rho * rho).sqrt();
        let rho_bar_vx = root * sigma_d / sigma_x;
        let rho_bar_dx = root * sigma_v / sigma_x;

        let perp_loading = sigma_v * rho_bar_vx;
        let alpha_perp = if perp_loading > 0.0 {
            (-0.5 * sigma_v * sigma_v - sigma_v * rho_vx * alpha) / perp_loading
        } else {
            0.0
        };

        let denom = rho * sigma_v * sigma_d - sigma_d * sigma_d;
        let m = (denom != 0.0).then(|| (rho * sigma_v * sigma_d - sigma_v * sigma_v) / denom);
        let change_of_basis = m.map(|m| [[1.0, -1.0], [1.0, m]]);

        // R = I - 2 w ℓ', with ℓ = (1, -1) and w = Σℓ / σ_X². This equals
        // M⁻¹ diag(-1, 1) M whenever M exists and stays finite at σ_d = 0.
        let w = [
            (sigma_v * sigma_v - rho * sigma_v * sigma_d) / var_x,
            (rho * sigma_v * sigma_d - sigma_d * sigma_d) / var_x,
        ];
        let reflection = [
            [1.0 - 2.0 * w[0], 2.0 * w[0]],
            [-2.0 * w[1], 1.0 + 2.0 * w[1]],
        ];

        Ok(Self {
            sigma_x,
            alpha,
            alpha_perp,
            rho_vx,
            rho_dx,
            rho_bar_vx,
            rho_bar_dx,
            m,
            change_of_basis,
            reflection,
        })
    }

    /// Applies the skew reflection to a log-state.
    pub fn reflect(&self, y: [f64; 2]) -> [f64; 2] {
        let r = &self.reflection;
        [r[0][0] * y[0] + r[0][1] * y[1], r[1][0] * y[0] + r[1][1] * y[1]]
    }

    /// Down-and-in weight `exp(-2 α X_0 / σ_X)`.
    pub fn reflection_weight(&self, x0: f64) -> f64 {
        (-2.0 * self.alpha * x0 / self.sigma_x).exp()
    }
}

/// Risk-neutral parameters for one firm on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    sigma_v: f64,
    sigma_d: f64,
    rho: f64,
    time_change: TimeChange,
    recovery: f64,
    v0: f64,
    d0: f64,
    derived: DerivedCoefficients,
}

impl ModelParams {
    pub fn new(
        sigma_v: f64,
        sigma_d: f64,
        rho: f64,
        time_change: TimeChange,
        recovery: f64,
        v0: f64,
        d0: f64,
    ) -> Result<Self> {
        if !(sigma_v > 0.0 && sigma_v.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_v={sigma_v} must be positive")));
        }
        if !(sigma_d >= 0.0 && sigma_d.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_d={sigma_d} must be non-negative")));
        }
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho={rho} not in (-1,1)")));
        }
        if !(0.0..1.0).contains(&recovery) {
            return Err(Error::InvalidParameter(format!("recovery={recovery} not in [0,1)")));
        }
        if !(v0.is_finite() && d0.is_finite() && v0 > d0) {
            return Err(Error::InvalidParameter(format!(
                "firm must start solvent: v0={v0}, d0={d0}"
            )));
        }
        let derived = DerivedCoefficients::new(sigma_v, sigma_d, rho)?;
        Ok(Self { sigma_v, sigma_d, rho, time_change, recovery, v0, d0, derived })
    }

    pub fn sigma_v(&self) -> f64 {
        self.sigma_v
    }
    pub fn sigma_d(&self) -> f64 {
        self.sigma_d
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn time_change(&self) -> &TimeChange {
        &self.time_change
    }
    pub fn kind(&self) -> ModelKind {
        self.time_change.kind()
    }
    pub fn recovery(&self) -> f64 {
        self.recovery
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn d0(&self) -> f64 {
        self.d0
    }
    pub fn state(&self) -> [f64; 2] {
        [self.v0, self.d0]
    }
    /// Initial log-leverage `X_0 = v_0 - d_0`.
    pub fn x0(&self) -> f64 {
        self.v0 - self.d0
    }
    pub fn derived(&self) -> &DerivedCoefficients {
        &self.derived
    }

    pub fn with_state(&self, v0: f64, d0: f64) -> Result<Self> {
        Self::new(self.sigma_v, self.sigma_d, self.rho, self.time_change, self.recovery, v0, d0)
    }

    pub fn with_time_change(&self, time_change: TimeChange) -> Self {
        Self { time_change, ..self.clone() }
    }

    pub fn with_recovery(&self, recovery: f64) -> Result<Self> {
        Self::new(self.sigma_v, self.sigma_d, self.rho, self.time_change, recovery, self.v0, self.d0)
    }

    pub fn firm_state(&self) -> FirmState {
        FirmState::from_log_state(self.v0, self.d0)
    }

    /// Covariance per unit business time of `(v, d)`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let c = self.rho * self.sigma_v * self.sigma_d;
        [[self.sigma_v * self.sigma_v, c], [c, self.sigma_d * self.sigma_d]]
    }

    /// `z(u) = uΣu'/2 + i u (σ_v², σ_d²)'/2`, so that the GBM increment
    /// characteristic function is `exp(-T z(u))`.
    pub fn gaussian_exponent(&self, u: [Complex64; 2]) -> Complex64 {
        let sv2 = self.sigma_v * self.sigma_v;
        let sd2 = self.sigma_d * self.sigma_d;
        let c = self.rho * self.sigma_v * self.sigma_d;
        let quad = sv2 * u[0] * u[0] + 2.0 * c * u[0] * u[1] + sd2 * u[1] * u[1];
        0.5 * quad + 0.5 * I * (sv2 * u[0] + sd2 * u[1])
    }

    /// Log of the increment characteristic function `E[exp(i u (Y_T - Y_0)')]`
    /// under this model's clock.
    pub fn log_increment_cf(&self, u: [Complex64; 2], t: f64) -> Result<Complex64> {
        let z = self.gaussian_exponent(u);
        Ok(-self.time_change.laplace_exponent(z, t)?)
    }

    /// Same, forcing the deterministic clock.
    pub fn log_increment_cf_gbm(&self, u: [Complex64; 2], t: f64) -> Complex64 {
        -t * self.gaussian_exponent(u)
    }
}

fn finite_exp(exponent: Complex64) -> Result<Complex64> {
    if exponent.re > MAX_EXPONENT || !exponent.re.is_finite() || !exponent.im.is_finite() {
        return Err(Error::Overflow(format!("characteristic exponent {exponent}")));
    }
    Ok(exponent.exp())
}

fn initial_phase(params: &ModelParams, u: [Complex64; 2]) -> Complex64 {
    I * (u[0] * params.v0 + u[1] * params.d0)
}

/// Joint characteristic function of `(v_T, d_T)` in the GBM hybrid model.
pub fn phi_gbm(params: &ModelParams, u: [Complex64; 2], t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("maturity {t} is negative")));
    }
    finite_exp(initial_phase(params, u) + params.log_increment_cf_gbm(u, t))
}

/// Joint characteristic function of `(v_T, d_T)` under the model's clock,
/// obtained by composing the GBM exponent with the Laplace exponent.
pub fn phi_lsbm(params: &ModelParams, u: [Complex64; 2], t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("maturity {t} is negative")));
    }
    finite_exp(initial_phase(params, u) + params.log_increment_cf(u, t)?)
}

/// Balance-sheet quantities at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmState {
    pub asset: f64,
    pub debt: f64,
    pub stock: f64,
    pub log_leverage: f64,
}

impl FirmState {
    pub fn from_log_state(v0: f64, d0: f64) -> Self {
        let asset = v0.exp();
        let debt = d0.exp();
        Self { asset, debt, stock: asset - debt, log_leverage: v0 - d0 }
    }
}
