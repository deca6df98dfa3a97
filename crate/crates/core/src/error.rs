use thiserror::Error;

/// Errors raised by the pricing, calibration and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Argument outside the analytic domain of a Laplace exponent or gamma function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    /// The Fourier integrand has not decayed at the edge of the frequency grid.
    #[error("truncation diagnostic: boundary/peak ratio {ratio:.3e} exceeds {limit:.1e}")]
    Truncation { ratio: f64, limit: f64 },

    /// The frequency cutoff and the state window cannot both be met on `given` points per axis.
    #[error("grid of {given} points per axis too coarse; needs at least {needed}")]
    GridResolution { given: usize, needed: usize },

    #[error("density inversion failed: {0}")]
    InversionQuality(String),

    #[error("degenerate pricing problem: {0}")]
    Degenerate(String),

    #[error("price {price} outside arbitrage bounds [{lower}, {upper}]")]
    ArbitrageBounds { price: f64, lower: f64, upper: f64 },

    #[error("reflected term {reflected} exceeds vanilla term {vanilla}")]
    ReflectionDominates { vanilla: f64, reflected: f64 },

    #[error("schema error in {file} at line {line}: {message}")]
    Schema { file: String, line: usize, message: String },

    #[error("calibration did not converge after {iterations} iterations (best objective {objective:.6e})")]
    NonConvergence { iterations: usize, objective: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
