//! Command-line surface of `capstruct`.
//!
//! Every subcommand writes CSV (or a short summary) to the given writer and
//! returns a process exit code: 0 on success, 2 for schema or argument
//! errors, 3 for numeric failures and 4 when calibration does not converge.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use capstruct::barrier::survival_curve;
use capstruct::calibration::{calibrate_with, dispersed_starts, CalibrationProblem, LmOptions, Theta};
use capstruct::credit::{bond_price, cds_spreads, YieldCurve, QUARTERLY};
use capstruct::equity::{call_prices, implied_vol};
use capstruct::market::{act365, load_quotes, ParamsFile};
use capstruct::mc::{mc_barrier_spreads, mc_bond, mc_survival, Knock, PathConfig};
use capstruct::{Error, ModelKind, ModelParams, TimeChange};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CAPSTRUCT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "capstruct", version, about = "Structural credit/equity pricing and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Parameter file (params.json schema).
    #[arg(long)]
    params: PathBuf,
    /// Override the clock in the parameter file.
    #[arg(long, value_parser = parse_kind)]
    model: Option<ModelKind>,
    /// Quote directory whose yields.csv supplies the discount curve.
    #[arg(long, conflicts_with = "rate")]
    quotes: Option<PathBuf>,
    /// Flat continuously compounded rate, used when no quote directory is given.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Fourier grid size per axis.
    #[arg(long, default_value_t = capstruct::fourier::plan::DEFAULT_GRID)]
    grid: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equity call, put and implied vol at one strike.
    PriceCall {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        strike: f64,
        /// Maturity in years.
        #[arg(long)]
        maturity: f64,
    },
    /// CDS par spreads in basis points.
    CdsCurve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0])]
        tenors: Vec<f64>,
    },
    /// Survival probabilities.
    Survival {
        #[command(flatten)]
        model: ModelArgs,
        /// Maturities in years.
        #[arg(long, value_delimiter = ',', required = true)]
        maturities: Vec<f64>,
    },
    /// Model implied-vol surface in the vols.csv schema.
    Surface {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.6, 0.8, 0.9, 0.95, 0.975, 1.0, 1.025, 1.05, 1.1, 1.2, 1.3])]
        moneyness_ladder: Vec<f64>,
        /// Maturities in calendar days.
        #[arg(long, value_delimiter = ',', required = true)]
        maturities: Vec<u32>,
    },
    /// Fit a model to a quote directory.
    Calibrate {
        #[arg(long)]
        quotes: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        /// Output parameter file.
        #[arg(long)]
        out: PathBuf,
        /// Credit-to-equity weight C².
        #[arg(long, default_value_t = capstruct::calibration::DEFAULT_WEIGHT)]
        weight: f64,
        #[arg(long, default_value_t = capstruct::calibration::DEFAULT_STARTS)]
        starts: usize,
        #[arg(long, default_value_t = capstruct::fourier::plan::DEFAULT_GRID)]
        grid: usize,
        /// Initial guess as a parameter file; its v0 - d0 gives X0.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Engine against Monte Carlo, with standard errors.
    McValidate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 5.0])]
        maturities: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.8, 1.0, 1.2])]
        moneyness: Vec<f64>,
        /// Agreement threshold in standard errors.
        #[arg(long, default_value_t = 3.0)]
        tolerance: f64,
    },
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Schema { .. } | Error::Io(_) | Error::Json(_) | Error::InvalidParameter(_) => EXIT_SCHEMA,
            Error::NonConvergence { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_SCHEMA, message: e.to_string() }
    }
}

type CliResult = std::result::Result<i32, Failure>;

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_command<W: Write>(argv: &[String], out: &mut W) -> i32 {
    configure_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_model(args: &ModelArgs) -> std::result::Result<(ModelParams, YieldCurve), Failure> {
    let mut file = ParamsFile::load(&args.params)?;
    if let Some(kind) = args.model {
        file.model = kind;
    }
    let params = file.to_params().map_err(|e| match e {
        Error::InvalidParameter(m) => Failure::from(Error::Schema { file: args.params.display().to_string(), line: 0, message: m }),
        e => e.into(),
    })?;
    let curve = match &args.quotes {
        Some(dir) => load_quotes(dir)?.curve()?,
        None => YieldCurve::flat(args.rate),
    };
    Ok((params, curve))
}

fn dispatch<W: Write>(command: Command, out: &mut W) -> CliResult {
    match command {
        Command::PriceCall { model, strike, maturity } => {
            let (p, curve) = load_model(&model)?;
            let call = call_prices(&p, &curve, &[strike], maturity, model.grid)?[0];
            let disc = curve.discount(maturity);
            let s0 = p.firm_state().stock;
            let put = call - s0 + strike * disc;
            let iv = if strike > 0.0 { implied_vol(call, s0, strike, maturity, disc).map(|v| v.vol).unwrap_or(f64::NAN) } else { f64::NAN };
            writeln!(out, "strike,maturity,call,put,implied_vol")?;
            writeln!(out, "{strike},{maturity},{call},{put},{iv}")?;
            Ok(EXIT_OK)
        }
        Command::CdsCurve { model, tenors } => {
            let (p, curve) = load_model(&model)?;
            let spreads = cds_spreads(&p, &curve, &tenors, QUARTERLY)?;
            writeln!(out, "tenor_years,mid_bps")?;
            for (t, s) in tenors.iter().zip(spreads) {
                writeln!(out, "{t},{}", s * 1e4)?;
            }
            Ok(EXIT_OK)
        }
        Command::Survival { model, maturities } => {
            let (p, _) = load_model(&model)?;
            let surv = survival_curve(&p, &maturities)?;
            writeln!(out, "maturity,survival")?;
            for (t, s) in maturities.iter().zip(surv) {
                writeln!(out, "{t},{s:?}")?;
            }
            Ok(EXIT_OK)
        }
        Command::Surface { model, moneyness_ladder, maturities } => {
            let (p, curve) = load_model(&model)?;
            let s0 = p.firm_state().stock;
            writeln!(out, "maturity_days,moneyness,implied_vol")?;
            for days in maturities {
                let t = act365(days);
                let strikes: Vec<f64> = moneyness_ladder.iter().map(|m| m * s0).collect();
                let prices = call_prices(&p, &curve, &strikes, t, model.grid)?;
                for ((m, k), c) in moneyness_ladder.iter().zip(&strikes).zip(prices) {
                    let iv = implied_vol(c, s0, *k, t, curve.discount(t))?;
                    writeln!(out, "{days},{m},{}", iv.vol)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Calibrate { quotes, model, out: path, weight, starts, grid, init } => {
            calibrate_command(&quotes, model, &path, weight, starts, grid, init.as_deref(), out)
        }
        Command::McValidate { model, paths, seed, maturities, moneyness, tolerance } => {
            mc_validate(&model, paths, seed, &maturities, &moneyness, tolerance, out)
        }
    }
}

/// Default starting point: mid-range volatilities and a moderate clock.
fn default_start(model: ModelKind) -> Theta {
    let (b, c) = match model {
        ModelKind::Gbm => (0.5, 1.0),
        _ => (0.5, 0.1),
    };
    Theta { rho: 0.0, sigma_v: 0.25, sigma_d: 0.1, b, c, recovery: 0.2, x0: 0.7 }
}

#[allow(clippy::too_many_arguments)]
fn calibrate_command<W: Write>(
    quotes: &Path,
    model: ModelKind,
    path: &Path,
    weight: f64,
    starts: usize,
    grid: usize,
    init: Option<&Path>,
    out: &mut W,
) -> CliResult {
    let q = load_quotes(quotes)?;
    let mut problem = CalibrationProblem::new(q, model)?;
    problem.weight = weight;
    problem.grid = grid;
    let start = match init {
        Some(p) => {
            let file = ParamsFile::load(p)?;
            let mut t = Theta::from_params(&file.to_params()?);
            if model == ModelKind::Gbm {
                t.b = 0.5;
                t.c = 1.0;
            }
            problem.bounds.clamp(&t)
        }
        None => default_start(model),
    };
    let result = calibrate_with(&problem, &dispersed_starts(&start, &problem.bounds, starts.max(1)), &LmOptions::default())?;
    let params = result.params()?;
    ParamsFile::from_params(&params, Some(result.rmse)).save(path)?;
    writeln!(out, "model,objective,rmse,rms_per_quote,iterations,evaluations,converged,active_bounds")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        result.model,
        result.objective,
        result.rmse,
        result.rms_per_quote,
        result.iterations,
        result.evaluations,
        result.converged,
        result.active_bounds.join(";")
    )?;
    if result.active_bounds.iter().any(|b| b == "recovery") && result.theta.recovery == 0.0 {
        log::warn!("calibration was forced to choose a zero recovery rate");
    }
    Ok(if result.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

fn mc_validate<W: Write>(
    model: &ModelArgs,
    paths: usize,
    seed: u64,
    maturities: &[f64],
    moneyness: &[f64],
    tolerance: f64,
    out: &mut W,
) -> CliResult {
    let (p, curve) = load_model(model)?;
    let cfg = PathConfig::conditional(paths, seed);
    let s0 = p.firm_state().stock;
    let mut all_ok = true;
    writeln!(out, "quantity,maturity,strike,engine,mc,std_error,z")?;
    let mut row = |out: &mut W, q: &str, t: f64, k: f64, engine: f64, mc: capstruct::mc::Estimate| -> std::io::Result<()> {
        let z = mc.z_score(engine);
        all_ok &= z <= tolerance || (engine - mc.value).abs() < 1e-12;
        writeln!(out, "{q},{t},{k},{engine},{},{},{z:.3}", mc.value, mc.std_error)
    };
    for (i, &t) in maturities.iter().enumerate() {
        let stream = seed.wrapping_add(1000 * i as u64);
        let surv = survival_curve(&p, &[t])?[0];
        row(out, "survival", t, f64::NAN, surv, mc_survival(&p, t, &PathConfig { seed: stream, ..cfg })?)?;
        let bond = bond_price(&p, &curve, t)?;
        row(out, "bond", t, f64::NAN, bond, mc_bond(&p, &curve, t, &PathConfig { seed: stream + 1, ..cfg })?)?;
        let strikes: Vec<f64> = moneyness.iter().map(|m| m * s0).collect();
        let engine = call_prices(&p, &curve, &strikes, t, model.grid)?;
        let mc = mc_barrier_spreads(&p, &strikes, t, curve.discount(t), &PathConfig { seed: stream + 2, ..cfg }, Knock::Out)?;
        for ((k, e), m) in strikes.iter().zip(engine).zip(mc) {
            row(out, "call", t, *k, e, m)?;
        }
    }
    if !all_ok {
        eprintln!("engine and Monte Carlo disagree beyond {tolerance} standard errors");
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

/// Clock of the given kind reusing `(b, c)` where present.
pub fn with_kind(p: &ModelParams, kind: ModelKind) -> capstruct::Result<ModelParams> {
    let (b, c) = match *p.time_change() {
        TimeChange::Vg { b, c } | TimeChange::Exp { b, c } => (b, c),
        TimeChange::Deterministic => (0.5, 1.0),
    };
    Ok(p.with_time_change(TimeChange::from_kind(kind, b, c)?))
}
