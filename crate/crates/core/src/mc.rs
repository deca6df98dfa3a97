//! Monte Carlo oracle for survival, bonds and knock-out spread options.
//!
//! Paths are drawn in business time. The conditional scheme samples `G_T`,
//! then the Brownian endpoint, and weights each path by the exact
//! probability that the Brownian bridge of `X` stays positive. The full-path
//! scheme time-steps `X` and applies the same bridge weight per step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::barrier::brownian_survival;
use crate::credit::YieldCurve;
use crate::error::{Error, Result};
use crate::model::{ModelParams, TimeChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Conditional,
    FullPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub n_paths: usize,
    /// Time steps per unit business time, full-path scheme only.
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl PathConfig {
    pub fn conditional(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, n_steps: 100, seed, scheme: Scheme::Conditional }
    }

    pub fn full_path(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self { n_paths, n_steps, seed, scheme: Scheme::FullPath }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 || self.n_steps == 0 {
            return Err(Error::InvalidParameter("need at least two paths and one step".into()));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl Estimate {
    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn agrees_with(&self, target: f64, n_se: f64, abs_slack: f64) -> bool {
        (self.value - target).abs() <= n_se * self.std_error + abs_slack
    }
}

const CHUNK: usize = 4096;

/// Runs `sample` over `n` paths in parallel chunks with independent ChaCha
/// streams, collecting `k` outputs per path.
fn simulate<F>(n: usize, seed: u64, k: usize, sample: F) -> Vec<Estimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut out = vec![0.0; k];
            let mut s = vec![[0.0; 2]; k];
            for _ in 0..len {
                sample(&mut rng, &mut out);
                for (acc, &x) in s.iter_mut().zip(&out) {
                    acc[0] += x;
                    acc[1] += x * x;
                }
            }
            s
        })
        .reduce(
            || vec![[0.0; 2]; k],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x[0] += y[0];
                    x[1] += y[1];
                }
                a
            },
        );
    let nf = n as f64;
    sums.into_iter()
        .map(|[s, s2]| {
            let mean = s / nf;
            let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
            Estimate { value: mean, std_error: (var / nf).sqrt(), n_paths: n }
        })
        .collect()
}

/// Samplers for `G_T`, with the gamma and Poisson laws prebuilt.
#[derive(Debug, Clone, Copy)]
enum ClockSampler {
    Fixed(f64),
    Vg { drift: f64, gamma: Gamma<f64> },
    Exp { drift: f64, count: Poisson<f64>, scale: f64 },
}

impl ClockSampler {
    fn new(tc: &TimeChange, t: f64) -> Result<Self> {
        let bad = |e: String| Error::InvalidParameter(format!("time change sampler: {e}"));
        Ok(match *tc {
            TimeChange::Deterministic => Self::Fixed(t),
            TimeChange::Vg { b, c } => Self::Vg {
                drift: b * t,
                gamma: Gamma::new(c * t, (1.0 - b) / c).map_err(|e| bad(e.to_string()))?,
            },
            TimeChange::Exp { b, c } => Self::Exp {
                drift: b * t,
                count: Poisson::new(c * t).map_err(|e| bad(e.to_string()))?,
                scale: (1.0 - b) / c,
            },
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Fixed(t) => t,
            Self::Vg { drift, gamma } => drift + gamma.sample(rng),
            Self::Exp { drift, count, scale } => {
                let jumps = count.sample(rng);
                if jumps == 0.0 {
                    drift
                } else {
                    // A sum of `jumps` exponentials with mean `scale`.
                    drift + Gamma::new(jumps, scale).map_or(0.0, |g| g.sample(rng))
                }
            }
        }
    }
}

/// Samples of `G_T`.
pub fn simulate_subordinator(tc: &TimeChange, t: f64, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = ClockSampler::new(tc, t)?;
    let chunks = n_paths.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n_paths - c * CHUNK);
            (0..len).map(move |_| sampler.sample(&mut rng))
        })
        .collect())
}

/// Probability that a Brownian bridge of `X` from `x0 > 0` to `x1` over
/// business time `g` stays positive.
fn bridge_survival(x0: f64, x1: f64, var: f64) -> f64 {
    if x0 <= 0.0 || x1 <= 0.0 {
        0.0
    } else {
        -(-2.0 * x0 * x1 / var).exp_m1()
    }
}

/// State after business time `g`: log-values and the survival weight.
struct PathState {
    v: f64,
    d: f64,
    survival: f64,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws `(v_g, d_g)` and the probability that `X` stayed positive on `[0, g]`.
fn evolve<R: Rng>(params: &ModelParams, g: f64, cfg: &PathConfig, rng: &mut R) -> PathState {
    let dc = params.derived();
    let sx = dc.sigma_x;
    let load_b = params.sigma_v() * dc.rho_vx;
    let load_perp = params.sigma_v() * dc.rho_bar_vx;
    let steps = match cfg.scheme {
        Scheme::Conditional => 1,
        Scheme::FullPath => ((g * cfg.n_steps as f64).ceil() as usize).max(1),
    };
    let h = g / steps as f64;
    let sh = h.sqrt();
    let (mut v, mut x) = (params.v0(), params.x0());
    let mut survival = 1.0;
    for _ in 0..steps {
        let db = sh * normal(rng) + dc.alpha * h;
        let dp = sh * normal(rng) + dc.alpha_perp * h;
        let x_next = x + sx * db;
        survival *= bridge_survival(x, x_next, sx * sx * h);
        v += load_b * db + load_perp * dp;
        x = x_next;
    }
    PathState { v, d: v - x, survival }
}

pub fn mc_survival(params: &ModelParams, t: f64, cfg: &PathConfig) -> Result<Estimate> {
    cfg.validate()?;
    if t == 0.0 {
        return Ok(Estimate { value: 1.0, std_error: 0.0, n_paths: cfg.n_paths });
    }
    let clock = ClockSampler::new(params.time_change(), t)?;
    let dc = *params.derived();
    let y0 = params.x0() / dc.sigma_x;
    Ok(simulate(cfg.n_paths, cfg.seed, 1, |rng, out| {
        let g = clock.sample(rng);
        out[0] = match cfg.scheme {
            Scheme::Conditional => brownian_survival(y0, dc.alpha, g),
            Scheme::FullPath => evolve(params, g, cfg, rng).survival,
        };
    })[0])
}

/// Defaultable zero-coupon bond, recovery of par paid at maturity.
pub fn mc_bond(params: &ModelParams, curve: &YieldCurve, t: f64, cfg: &PathConfig) -> Result<Estimate> {
    let p = mc_survival(params, t, cfg)?;
    let disc = curve.discount(t);
    let r = params.recovery();
    let scale = disc * (1.0 - r);
    Ok(Estimate { value: disc * r + scale * p.value, std_error: scale * p.std_error, n_paths: p.n_paths })
}

/// Which part of the spread payoff is kept relative to default before `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knock {
    /// Paid only if the firm survives: the equity call.
    Out,
    /// Paid only if default occurred.
    In,
    /// Paid regardless.
    Vanilla,
}

/// Spread calls `E[(V_T - D_T - K δ)^+ w]` with `w` the survival indicator,
/// its complement or one according to `knock`.
pub fn mc_barrier_spreads(
    params: &ModelParams,
    strikes: &[f64],
    t: f64,
    discount: f64,
    cfg: &PathConfig,
    knock: Knock,
) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    if !(t > 0.0 && discount > 0.0) {
        return Err(Error::InvalidParameter(format!("maturity {t} and discount {discount} must be positive")));
    }
    let clock = ClockSampler::new(params.time_change(), t)?;
    let kd: Vec<f64> = strikes.iter().map(|k| k * discount).collect();
    Ok(simulate(cfg.n_paths, cfg.seed, strikes.len(), |rng, out| {
        let g = clock.sample(rng);
        let s = evolve(params, g, cfg, rng);
        let w = match knock {
            Knock::Out => s.survival,
            Knock::In => 1.0 - s.survival,
            Knock::Vanilla => 1.0,
        };
        let spread = s.v.exp() - s.d.exp();
        for (o, k) in out.iter_mut().zip(&kd) {
            *o = w * (spread - k).max(0.0);
        }
    }))
}

pub fn mc_barrier_spread(
    params: &ModelParams,
    strike: f64,
    t: f64,
    discount: f64,
    cfg: &PathConfig,
) -> Result<Estimate> {
    Ok(mc_barrier_spreads(params, &[strike], t, discount, cfg, Knock::Out)?[0])
}
