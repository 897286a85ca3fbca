use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use super::config::ConfigEcho;
use super::correlation::CorrelationResult;
use super::prices::DATE_FORMAT;
use super::rolling::{DailyViolationSeries, TestKind, ViolationRecord, SUBADD_SUFFIX};
use crate::error::{Result, RiskError};
use crate::theory::DominanceVerdict;

pub const VIOLATIONS_FILE: &str = "violations.csv";
pub const DAILY_RATES_FILE: &str = "daily_rates.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub series_a: String,
    pub series_b: String,
    pub result: CorrelationResult,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MeasureCounts {
    pub tests: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: ConfigEcho,
    pub source: String,
    pub tickers: Vec<String>,
    pub loss_rows: usize,
    pub tested_dates: usize,
    pub pairs: usize,
    pub counts: BTreeMap<String, MeasureCounts>,
    pub verdicts: Vec<DominanceVerdict>,
}

impl RunSummary {
    pub fn count_records(records: &[ViolationRecord]) -> BTreeMap<String, MeasureCounts> {
        let mut counts: BTreeMap<String, MeasureCounts> = BTreeMap::new();
        for r in records {
            let c = counts.entry(r.measure.clone()).or_default();
            c.tests += 1;
            if r.violated {
                c.violations += 1;
            }
        }
        counts
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RiskError + '_ {
    move |source| RiskError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> RiskError + '_ {
    move |source| RiskError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_violations(path: &Path, records: &[ViolationRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(["date", "pair", "measure", "params", "gap", "violated"]).map_err(&e)?;
    for r in records {
        w.write_record([
            r.date.format(DATE_FORMAT).to_string(),
            r.pair_label(),
            r.measure.clone(),
            r.params.clone(),
            r.gap.to_string(),
            r.violated.to_string(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a `violations.csv` written by [`write_violations`].
pub fn load_violations(path: &Path) -> Result<Vec<ViolationRecord>> {
    let e = csv_err(path);
    let mut rdr = csv::Reader::from_path(path).map_err(&e)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(&e)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |m: String| RiskError::Parse { line, message: m };
        if rec.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT).map_err(|x| bad(x.to_string()))?;
        let (a, b) = rec[1].split_once('/').ok_or_else(|| bad(format!("bad pair `{}`", &rec[1])))?;
        let measure = rec[2].to_string();
        let test = if measure.ends_with(SUBADD_SUFFIX) {
            TestKind::Subadditivity
        } else {
            TestKind::Submodularity
        };
        out.push(ViolationRecord {
            date,
            pair: (a.to_string(), b.to_string()),
            measure,
            params: rec[3].to_string(),
            test,
            gap: rec[4].parse().map_err(|_| bad(format!("bad gap `{}`", &rec[4])))?,
            violated: rec[5].parse().map_err(|_| bad(format!("bad flag `{}`", &rec[5])))?,
        });
    }
    Ok(out)
}

pub fn write_daily_rates(path: &Path, series: &[DailyViolationSeries]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(["date", "measure", "rate", "tests"]).map_err(&e)?;
    let mut rows: Vec<(NaiveDate, &str, f64, usize)> = series
        .iter()
        .flat_map(|s| {
            s.dates
                .iter()
                .zip(&s.rate)
                .zip(&s.tests)
                .map(move |((d, r), n)| (*d, s.measure.as_str(), *r, *n))
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    for (d, m, r, n) in rows {
        w.write_record([d.format(DATE_FORMAT).to_string(), m.to_string(), r.to_string(), n.to_string()])
            .map_err(&e)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_correlations(path: &Path, rows: &[CorrelationRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(["series_a", "series_b", "pearson", "spearman", "dcor"]).map_err(&e)?;
    for r in rows {
        w.write_record([
            r.series_a.clone(),
            r.series_b.clone(),
            r.result.pearson.to_string(),
            r.result.spearman.to_string(),
            r.result.dcor.to_string(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the four report files into `dir`, creating it if needed, and
/// returns their paths.
pub fn export_report(
    dir: &Path,
    records: &[ViolationRecord],
    series: &[DailyViolationSeries],
    correlations: &[CorrelationRow],
    summary: &RunSummary,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths: Vec<PathBuf> = [VIOLATIONS_FILE, DAILY_RATES_FILE, CORRELATIONS_FILE, SUMMARY_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_violations(&paths[0], records)?;
    write_daily_rates(&paths[1], series)?;
    write_correlations(&paths[2], correlations)?;
    let json = serde_json::to_string_pretty(summary).map_err(|source| RiskError::Json {
        path: paths[3].clone(),
        source,
    })?;
    let mut f = BufWriter::new(File::create(&paths[3]).map_err(io_err(&paths[3]))?);
    f.write_all(json.as_bytes()).map_err(io_err(&paths[3]))?;
    f.write_all(b"\n").map_err(io_err(&paths[3]))?;
    f.flush().map_err(io_err(&paths[3]))?;
    Ok(paths)
}
