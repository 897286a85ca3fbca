use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result, RiskError};

pub const DATE_FORMAT: &str = "%Y-%m-%d";
const INITIAL_PRICE: f64 = 100.0;

/// Adjusted closes, one row per date and one column per ticker. `None`
/// marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub closes: Vec<Vec<Option<f64>>>,
    /// rows that repeated an earlier (date, ticker) and overwrote it
    pub duplicate_rows: usize,
}

impl PricePanel {
    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Writes the panel back out in the `date,ticker,adj_close` format,
    /// skipping missing cells.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| RiskError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(w, "date,ticker,adj_close").map_err(io_err)?;
        for (d, row) in self.dates.iter().zip(&self.closes) {
            for (t, v) in self.tickers.iter().zip(row) {
                if let Some(v) = v {
                    writeln!(w, "{},{},{}", d.format(DATE_FORMAT), t, v).map_err(io_err)?;
                }
            }
        }
        w.flush().map_err(io_err)
    }
}

/// Reads a `date,ticker,adj_close` CSV into a panel sorted by date, with
/// tickers in lexicographic order. A repeated (date, ticker) keeps the last
/// row and is counted in `duplicate_rows`.
pub fn load_prices_csv(path: &Path) -> Result<PricePanel> {
    let csv_err = |source| RiskError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|source| RiskError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(RiskError::NoData(format!("{} is empty", path.display())));
    }
    let expected = ["date", "ticker", "adj_close"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(RiskError::Parse {
            line: 1,
            message: format!("header must be `date,ticker,adj_close`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut cells: BTreeMap<(NaiveDate, String), f64> = BTreeMap::new();
    let mut duplicates = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(RiskError::Parse {
                line,
                message: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT).map_err(|e| RiskError::Parse {
            line,
            message: format!("bad date `{}`: {e}", &rec[0]),
        })?;
        let ticker = rec[1].to_string();
        if ticker.is_empty() {
            return Err(RiskError::Parse {
                line,
                message: "empty ticker".into(),
            });
        }
        let price: f64 = rec[2].parse().map_err(|_| RiskError::Parse {
            line,
            message: format!("bad price `{}`", &rec[2]),
        })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(RiskError::Parse {
                line,
                message: format!("price must be positive and finite, got {price}"),
            });
        }
        if cells.insert((date, ticker), price).is_some() {
            duplicates += 1;
        }
    }
    if cells.is_empty() {
        return Err(RiskError::NoData(format!("{} has no price rows", path.display())));
    }
    if duplicates > 0 {
        log::warn!("{}: {duplicates} duplicate (date, ticker) rows, last one kept", path.display());
    }

    let dates: Vec<NaiveDate> = cells.keys().map(|(d, _)| *d).collect::<BTreeSet<_>>().into_iter().collect();
    let tickers: Vec<String> = cells
        .keys()
        .map(|(_, t)| t.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let date_idx: BTreeMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let tick_idx: BTreeMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut closes = vec![vec![None; tickers.len()]; dates.len()];
    for ((d, t), p) in &cells {
        closes[date_idx[d]][tick_idx[t.as_str()]] = Some(*p);
    }
    Ok(PricePanel {
        dates,
        tickers,
        closes,
        duplicate_rows: duplicates,
    })
}

fn next_business_day(d: NaiveDate) -> NaiveDate {
    let mut n = d + Duration::days(1);
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n += Duration::days(1);
    }
    n
}

/// Geometric random walk with occasional common downward jumps.
///
/// Every asset starts at 100 on 2020-01-02 and moves on business days by
/// `vol·Z + J`, where `J = −4·vol·|Z₀|` is shared by all assets on a jump day
/// (probability `jump_prob`) and zero otherwise.
pub fn synth_prices(seed: u64, n_days: usize, n_assets: usize, vol: f64, jump_prob: f64) -> Result<PricePanel> {
    if n_days == 0 || n_assets == 0 {
        return Err(domain("synthetic panel needs at least one day and one asset"));
    }
    if !(vol >= 0.0 && vol.is_finite()) {
        return Err(domain(format!("vol must be finite and nonnegative, got {vol}")));
    }
    if !(0.0..=1.0).contains(&jump_prob) {
        return Err(domain(format!("jump_prob must lie in [0, 1], got {jump_prob}")));
    }
    let width = n_assets.to_string().len().max(2);
    let tickers: Vec<String> = (0..n_assets).map(|i| format!("S{:0width$}", i + 1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut date = NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid start date");
    let mut dates = vec![date];
    let mut last = vec![INITIAL_PRICE; n_assets];
    let mut closes = vec![last.iter().map(|&p| Some(p)).collect::<Vec<_>>()];
    for _ in 1..n_days {
        date = next_business_day(date);
        let jump = if rng.random_bool(jump_prob) {
            let z: f64 = rng.sample(StandardNormal);
            -4.0 * vol * z.abs()
        } else {
            0.0
        };
        for p in last.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *p *= (vol * z + jump).exp();
        }
        dates.push(date);
        closes.push(last.iter().map(|&p| Some(p)).collect());
    }
    Ok(PricePanel {
        dates,
        tickers,
        closes,
        duplicate_rows: 0,
    })
}
