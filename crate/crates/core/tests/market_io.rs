use std::fs;
use std::path::Path;

use capstruct::market::{load_cds, load_quotes, load_vols, load_yields, ParamsFile, QuoteSet, VolPoint};
use capstruct::{Error, ModelParams, TimeChange};

const YIELDS: [f64; 11] = [0.0012, 0.0013, 0.0016, 0.0027, 0.0062, 0.011, 0.021, 0.028, 0.036, 0.043, 0.046];

fn schema_line(e: Error) -> usize {
    match e {
        Error::Schema { line, .. } => line,
        other => panic!("expected schema error, got {other}"),
    }
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

#[test]
fn quote_set_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut q = QuoteSet::ladder("2011-01-03", 11.81, &[93, 30, 184], &YIELDS);
    for (i, v) in q.vols.iter_mut().enumerate() {
        v.implied_vol = 0.2 + 0.001 * i as f64;
    }
    q.save(dir.path()).unwrap();
    let back = load_quotes(dir.path()).unwrap();
    assert_eq!(back, q);
    assert_eq!(back.vols.len(), 3 * 13);
    // 30-day row and the 0.4 and 1.5 wings drop out.
    assert_eq!(back.used_vols().count(), 2 * 11);
    assert!(back.used_vols().all(VolPoint::used));
    let curve = back.curve().unwrap();
    assert!((curve.zero_yield(0.25) - 0.0013).abs() < 1e-12);
}

#[test]
fn header_only_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cds.csv", "tenor_years,mid_bps\n");
    assert!(matches!(load_cds(dir.path()), Err(Error::Schema { .. })));
}

#[test]
fn wrong_headers_and_bad_fields_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cds.csv", "tenor,mid\n1,100\n");
    assert_eq!(schema_line(load_cds(dir.path()).unwrap_err()), 1);

    write(dir.path(), "vols.csv", "maturity_days,moneyness,implied_vol\n93,1.0,0.3\n93,abc,0.3\n");
    assert_eq!(schema_line(load_vols(dir.path()).unwrap_err()), 3);

    write(dir.path(), "yields.csv", "tenor,yield_decimal\n1m,0.001\n2q,0.002\n");
    assert_eq!(schema_line(load_yields(dir.path()).unwrap_err()), 3);
}

#[test]
fn unsorted_rows_are_sorted_and_duplicates_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cds.csv", "tenor_years,mid_bps\n5,300\n1,100\n3,200\n");
    let cds = load_cds(dir.path()).unwrap();
    assert_eq!(cds.iter().map(|c| c.tenor_years).collect::<Vec<_>>(), vec![1.0, 3.0, 5.0]);

    write(dir.path(), "cds.csv", "tenor_years,mid_bps\n1,100\n1,110\n");
    assert!(matches!(load_cds(dir.path()), Err(Error::Schema { .. })));
}

#[test]
fn missing_market_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let q = QuoteSet::ladder("2011-01-03", 11.81, &[93], &YIELDS);
    q.save(dir.path()).unwrap();
    fs::remove_file(dir.path().join("market.json")).unwrap();
    assert!(load_quotes(dir.path()).is_err());
}

#[test]
fn params_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    let p = ModelParams::new(0.3, 0.05, -0.3, TimeChange::exp(0.4, 0.2).unwrap(), 0.25, 1.0, 0.3).unwrap();
    ParamsFile::from_params(&p, Some(0.01)).save(&path).unwrap();
    let file = ParamsFile::load(&path).unwrap();
    assert_eq!(file.rmse, Some(0.01));
    assert_eq!(file.to_params().unwrap(), p);

    let gbm = p.with_time_change(TimeChange::Deterministic);
    ParamsFile::from_params(&gbm, None).save(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains("\"b\"") && !text.contains("rmse"));
    assert_eq!(ParamsFile::load(&path).unwrap().to_params().unwrap(), gbm);
}
