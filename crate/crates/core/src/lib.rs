//! Pricing and calibration for a two-factor structural model of the firm.
//!
//! The log discounted asset value `v_t` and log discounted debt value `d_t` are
//! correlated Brownian motions run on a common business clock `G_t`, which is
//! either calendar time (the GBM hybrid model) or a Lévy subordinator with
//! gamma (VG) or exponential (EXP) jumps. Default is the first passage of the
//! log-leverage `X_t = v_t - d_t` to zero, measured in business time.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, derived coefficients, Laplace exponents and joint
//!   characteristic functions.
//! - [`fourier`]: complex gamma, the spread-option payoff transform, the 2D
//!   Fourier pricer and the 1D time-change density.
//! - [`barrier`]: survival probabilities and the down-and-out equity call via
//!   the skew reflection identity.
//! - [`credit`]: yield curves, defaultable bonds and CDS par spreads.
//! - [`equity`]: calls, puts and Black-Scholes implied volatility.
//! - [`mc`]: an independent Monte Carlo oracle.
//! - [`calibration`]: joint fit to CDS and implied-volatility quotes.
//! - [`market`]: quote files, parameter files and filtering rules.

pub mod barrier;
pub mod calibration;
pub mod credit;
pub mod equity;
pub mod error;
pub mod fourier;
pub mod market;
pub mod mc;
pub mod model;

pub use error::{Error, Result};
pub use model::{DerivedCoefficients, FirmState, ModelKind, ModelParams, TimeChange};

pub use num_complex::Complex64;
