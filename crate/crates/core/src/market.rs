//! Quote files, parameter files and the quote filtering rules.
//!
//! A quote directory holds `cds.csv` (`tenor_years,mid_bps`), `vols.csv`
//! (`maturity_days,moneyness,implied_vol`), `yields.csv`
//! (`tenor,yield_decimal`) and `market.json` (`date`, `stock_price`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::credit::YieldCurve;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, TimeChange};

/// Moneyness values excluded from calibration.
pub const EXCLUDED_MONEYNESS: [f64; 2] = [0.4, 1.5];
/// Shortest option maturity used in calibration, in calendar days.
pub const MIN_MATURITY_DAYS: u32 = 60;
pub const DAYS_PER_YEAR: f64 = 365.0;

pub fn act365(days: u32) -> f64 {
    days as f64 / DAYS_PER_YEAR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdsQuote {
    pub tenor_years: f64,
    pub mid_bps: f64,
}

impl CdsQuote {
    pub fn spread(&self) -> f64 {
        self.mid_bps * 1e-4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolPoint {
    pub maturity_days: u32,
    pub moneyness: f64,
    pub implied_vol: f64,
}

impl VolPoint {
    pub fn maturity(&self) -> f64 {
        act365(self.maturity_days)
    }

    /// Whether the quote survives the liquidity and short-maturity filters.
    pub fn used(&self) -> bool {
        self.maturity_days >= MIN_MATURITY_DAYS && !EXCLUDED_MONEYNESS.iter().any(|m| (m - self.moneyness).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldQuote {
    pub tenor: String,
    pub years: f64,
    pub yield_decimal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInfo {
    pub date: String,
    pub stock_price: f64,
}

/// One date's quotes: CDS spreads, implied vols and Treasury yields.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteSet {
    pub date: String,
    pub stock_price: f64,
    pub cds: Vec<CdsQuote>,
    pub vols: Vec<VolPoint>,
    pub yields: Vec<YieldQuote>,
}

impl QuoteSet {
    pub fn used_vols(&self) -> impl Iterator<Item = &VolPoint> {
        self.vols.iter().filter(|v| v.used())
    }

    /// Zero curve bootstrapped from the Treasury quotes.
    pub fn curve(&self) -> Result<YieldCurve> {
        let pillars: Vec<(f64, f64)> = self.yields.iter().map(|y| (y.years, y.yield_decimal)).collect();
        YieldCurve::bootstrap_par(&pillars)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        load_quotes(dir)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut cds = String::from("tenor_years,mid_bps\n");
        for q in &self.cds {
            cds += &format!("{},{}\n", q.tenor_years, q.mid_bps);
        }
        fs::write(dir.join("cds.csv"), cds)?;
        let mut vols = String::from("maturity_days,moneyness,implied_vol\n");
        for v in &self.vols {
            vols += &format!("{},{},{}\n", v.maturity_days, v.moneyness, v.implied_vol);
        }
        fs::write(dir.join("vols.csv"), vols)?;
        let mut yields = String::from("tenor,yield_decimal\n");
        for y in &self.yields {
            yields += &format!("{},{}\n", y.tenor, y.yield_decimal);
        }
        fs::write(dir.join("yields.csv"), yields)?;
        let info = MarketInfo { date: self.date.clone(), stock_price: self.stock_price };
        fs::write(dir.join("market.json"), serde_json::to_string_pretty(&info)? + "\n")?;
        Ok(())
    }
}

/// Moneyness ladder `K / S0` of the quoted option surface.
pub const MONEYNESS_LADDER: [f64; 13] = [0.4, 0.6, 0.8, 0.9, 0.95, 0.975, 1.0, 1.025, 1.05, 1.1, 1.2, 1.3, 1.5];
/// Quoted CDS tenors in years.
pub const CDS_TENORS: [f64; 7] = [1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0];
/// Quoted Treasury tenors.
pub const TREASURY_TENORS: [&str; 11] = ["1m", "3m", "6m", "1y", "2y", "3y", "5y", "7y", "10y", "20y", "30y"];

impl QuoteSet {
    /// Quote set on the standard ladders with placeholder spreads and vols,
    /// to be filled by a model. `yields` are aligned with [`TREASURY_TENORS`].
    pub fn ladder(date: &str, stock_price: f64, maturities_days: &[u32], yields: &[f64; 11]) -> Self {
        let mut days = maturities_days.to_vec();
        days.sort_unstable();
        Self {
            date: date.to_string(),
            stock_price,
            cds: CDS_TENORS.iter().map(|&t| CdsQuote { tenor_years: t, mid_bps: 100.0 }).collect(),
            vols: days
                .iter()
                .flat_map(|&d| MONEYNESS_LADDER.iter().map(move |&m| VolPoint { maturity_days: d, moneyness: m, implied_vol: 0.3 }))
                .collect(),
            yields: TREASURY_TENORS
                .iter()
                .zip(yields)
                .map(|(&t, &y)| YieldQuote { tenor: t.to_string(), years: parse_tenor(t).unwrap_or(1.0), yield_decimal: y })
                .collect(),
        }
    }
}

/// Parses Treasury tenor labels such as `1m`, `6m`, `2y`, `30d` or a bare
/// number of years.
pub fn parse_tenor(label: &str) -> Option<f64> {
    let s = label.trim().to_ascii_lowercase();
    let (num, unit) = match s.char_indices().last()? {
        (i, c) if c.is_ascii_alphabetic() => (&s[..i], c),
        _ => (s.as_str(), 'y'),
    };
    let x: f64 = num.trim().parse().ok()?;
    let years = match unit {
        'd' => x / DAYS_PER_YEAR,
        'w' => 7.0 * x / DAYS_PER_YEAR,
        'm' => x / 12.0,
        'y' => x,
        _ => return None,
    };
    (years > 0.0 && years.is_finite()).then_some(years)
}

fn schema(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Schema { file: file.to_string(), line, message: message.into() }
}

/// Reads a CSV file with an exact header, returning records and their line numbers.
fn read_rows(dir: &Path, file: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|e| schema(file, 0, format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| schema(file, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(schema(file, 1, format!("expected header `{}`, found `{}`", header.join(","), found.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            schema(file, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(schema(file, 1, "no data rows"));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(file: &str, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| schema(file, line, format!("{name}: cannot parse `{raw}`")))
}

fn positive(file: &str, line: usize, name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(schema(file, line, format!("{name} must be positive, got {x}")))
    }
}

fn sort_checked<T>(file: &str, items: &mut [(usize, T)], key: impl Fn(&T) -> (f64, f64)) -> Result<()> {
    let sorted = items.windows(2).all(|w| key(&w[0].1) <= key(&w[1].1));
    if !sorted {
        log::warn!("{file}: rows are not sorted; sorting");
        items.sort_by(|a, b| key(&a.1).partial_cmp(&key(&b.1)).unwrap_or(std::cmp::Ordering::Equal));
    }
    for w in items.windows(2) {
        if key(&w[0].1) == key(&w[1].1) {
            return Err(schema(file, w[1].0, "duplicate key"));
        }
    }
    Ok(())
}

pub fn load_cds(dir: &Path) -> Result<Vec<CdsQuote>> {
    const F: &str = "cds.csv";
    let mut out = Vec::new();
    for (line, r) in read_rows(dir, F, &["tenor_years", "mid_bps"])? {
        let tenor_years = positive(F, line, "tenor_years", field(F, line, "tenor_years", &r[0])?)?;
        let mid_bps = positive(F, line, "mid_bps", field(F, line, "mid_bps", &r[1])?)?;
        out.push((line, CdsQuote { tenor_years, mid_bps }));
    }
    sort_checked(F, &mut out, |q| (q.tenor_years, 0.0))?;
    Ok(out.into_iter().map(|x| x.1).collect())
}

pub fn load_vols(dir: &Path) -> Result<Vec<VolPoint>> {
    const F: &str = "vols.csv";
    let mut out = Vec::new();
    for (line, r) in read_rows(dir, F, &["maturity_days", "moneyness", "implied_vol"])? {
        let maturity_days: u32 = field(F, line, "maturity_days", &r[0])?;
        if maturity_days == 0 {
            return Err(schema(F, line, "maturity_days must be positive"));
        }
        let moneyness = positive(F, line, "moneyness", field(F, line, "moneyness", &r[1])?)?;
        let implied_vol = positive(F, line, "implied_vol", field(F, line, "implied_vol", &r[2])?)?;
        out.push((line, VolPoint { maturity_days, moneyness, implied_vol }));
    }
    sort_checked(F, &mut out, |v| (v.maturity_days as f64, v.moneyness))?;
    Ok(out.into_iter().map(|x| x.1).collect())
}

pub fn load_yields(dir: &Path) -> Result<Vec<YieldQuote>> {
    const F: &str = "yields.csv";
    let mut out = Vec::new();
    for (line, r) in read_rows(dir, F, &["tenor", "yield_decimal"])? {
        let years = parse_tenor(&r[0]).ok_or_else(|| schema(F, line, format!("tenor: cannot parse `{}`", r[0])))?;
        let y: f64 = field(F, line, "yield_decimal", &r[1])?;
        if !y.is_finite() || y.abs() > 1.0 {
            return Err(schema(F, line, format!("yield_decimal {y} is not a decimal rate")));
        }
        out.push((line, YieldQuote { tenor: r[0].clone(), years, yield_decimal: y }));
    }
    sort_checked(F, &mut out, |y| (y.years, 0.0))?;
    Ok(out.into_iter().map(|x| x.1).collect())
}

pub fn load_market_info(dir: &Path) -> Result<MarketInfo> {
    const F: &str = "market.json";
    let text = fs::read_to_string(dir.join(F)).map_err(|e| schema(F, 0, e.to_string()))?;
    let info: MarketInfo = serde_json::from_str(&text).map_err(|e| schema(F, e.line(), e.to_string()))?;
    positive(F, 1, "stock_price", info.stock_price)?;
    Ok(info)
}

/// Loads and validates a quote directory.
pub fn load_quotes(dir: &Path) -> Result<QuoteSet> {
    let info = load_market_info(dir)?;
    Ok(QuoteSet {
        date: info.date,
        stock_price: info.stock_price,
        cds: load_cds(dir)?,
        vols: load_vols(dir)?,
        yields: load_yields(dir)?,
    })
}

/// `params.json`: model parameters and, for calibration output, the fit RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub model: ModelKind,
    pub sigma_v: f64,
    pub sigma_d: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub recovery: f64,
    pub v0: f64,
    pub d0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
}

impl ParamsFile {
    pub fn from_params(p: &ModelParams, rmse: Option<f64>) -> Self {
        let (b, c) = match *p.time_change() {
            TimeChange::Deterministic => (None, None),
            TimeChange::Vg { b, c } | TimeChange::Exp { b, c } => (Some(b), Some(c)),
        };
        Self {
            model: p.kind(),
            sigma_v: p.sigma_v(),
            sigma_d: p.sigma_d(),
            rho: p.rho(),
            b,
            c,
            recovery: p.recovery(),
            v0: p.v0(),
            d0: p.d0(),
            rmse,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let tc = match self.model {
            ModelKind::Gbm => TimeChange::Deterministic,
            kind => {
                let missing = || Error::InvalidParameter(format!("{kind} parameters need `b` and `c`"));
                TimeChange::from_kind(kind, self.b.ok_or_else(missing)?, self.c.ok_or_else(missing)?)?
            }
        };
        ModelParams::new(self.sigma_v, self.sigma_d, self.rho, tc, self.recovery, self.v0, self.d0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| schema(&file, 0, e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| schema(&file, e.line(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
