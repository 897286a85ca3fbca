use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RollingConfig;
use super::losses::LossPanel;
use crate::error::{domain, Result};
use crate::lattice::{subadditivity_gap, submodularity_gap, RiskMeasureSpec};
use crate::sample::EmpiricalSample;

/// Suffix appended to a measure label for portfolio (subadditivity) tests.
pub const SUBADD_SUFFIX: &str = "[subadd]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DatedSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

fn window_sample(panel: &LossPanel, col: usize, end: usize, window: usize) -> EmpiricalSample {
    let values = panel.losses[end + 1 - window..=end].iter().map(|r| r[col]).collect();
    EmpiricalSample::new(values).expect("losses are finite")
}

/// Rolling estimate of `spec` for one ticker. The value at date `t` uses the
/// `window` losses ending at and including `t`.
pub fn rolling_eval(
    losses: &LossPanel,
    ticker: &str,
    config: &RollingConfig,
    spec: &RiskMeasureSpec,
) -> Result<DatedSeries> {
    let col = losses
        .ticker_index(ticker)
        .ok_or_else(|| domain(format!("ticker `{ticker}` not in loss panel")))?;
    let w = config.window;
    if losses.n_rows() < w {
        log::warn!(
            "{ticker}: {} loss rows, fewer than window {w}; no rolling values",
            losses.n_rows()
        );
        return Ok(DatedSeries {
            dates: Vec::new(),
            values: Vec::new(),
        });
    }
    let values = (w - 1..losses.n_rows())
        .into_par_iter()
        .map(|t| spec.evaluate(&window_sample(losses, col, t, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatedSeries {
        dates: losses.dates[w - 1..].to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Submodularity,
    Subadditivity,
}

/// One lattice or portfolio test on one date for one pair and measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub date: NaiveDate,
    pub pair: (String, String),
    /// measure label, suffixed with [`SUBADD_SUFFIX`] for portfolio tests
    pub measure: String,
    pub params: String,
    pub test: TestKind,
    pub gap: f64,
    pub violated: bool,
}

impl ViolationRecord {
    pub fn pair_label(&self) -> String {
        format!("{}/{}", self.pair.0, self.pair.1)
    }
}

/// Runs every configured measure on every unordered ticker pair for every
/// date with a full window; VaR measures also get a subadditivity test on
/// the summed losses. Output is sorted by date, pair and measure label.
pub fn pairwise_day_tests(losses: &LossPanel, config: &RollingConfig) -> Result<Vec<ViolationRecord>> {
    let n_tickers = losses.tickers.len();
    if n_tickers < 2 {
        return Err(domain(format!("pairwise tests need at least 2 tickers, got {n_tickers}")));
    }
    let w = config.window;
    if losses.n_rows() < w {
        log::warn!("{} loss rows, fewer than window {w}; no pairwise tests", losses.n_rows());
        return Ok(Vec::new());
    }
    let pairs: Vec<(usize, usize)> = (0..n_tickers)
        .flat_map(|i| (i + 1..n_tickers).map(move |j| (i, j)))
        .collect();

    let per_date: Vec<Vec<ViolationRecord>> = (w - 1..losses.n_rows())
        .into_par_iter()
        .map(|t| {
            let date = losses.dates[t];
            let windows: Vec<EmpiricalSample> =
                (0..n_tickers).map(|j| window_sample(losses, j, t, w)).collect();
            let mut out = Vec::with_capacity(pairs.len() * config.measures.len());
            for &(i, j) in &pairs {
                let (x, y) = (&windows[i], &windows[j]);
                let pair = (losses.tickers[i].clone(), losses.tickers[j].clone());
                for spec in &config.measures {
                    let r = submodularity_gap(spec, x, y, config.epsilon)?;
                    out.push(ViolationRecord {
                        date,
                        pair: pair.clone(),
                        measure: spec.label.clone(),
                        params: spec.params(),
                        test: TestKind::Submodularity,
                        gap: r.gap,
                        violated: r.violated,
                    });
                    if spec.is_var() {
                        let r = subadditivity_gap(spec, x, y, config.epsilon)?;
                        out.push(ViolationRecord {
                            date,
                            pair: pair.clone(),
                            measure: format!("{}{SUBADD_SUFFIX}", spec.label),
                            params: spec.params(),
                            test: TestKind::Subadditivity,
                            gap: r.gap,
                            violated: r.violated,
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<ViolationRecord> = per_date.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then_with(|| a.pair.cmp(&b.pair))
            .then_with(|| a.measure.cmp(&b.measure))
    });
    Ok(records)
}

/// Per-date violation counts and rates for one measure label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyViolationSeries {
    pub measure: String,
    pub dates: Vec<NaiveDate>,
    pub rate: Vec<f64>,
    pub violations: Vec<usize>,
    pub tests: Vec<usize>,
}

impl DailyViolationSeries {
    pub fn as_dated(&self) -> DatedSeries {
        DatedSeries {
            dates: self.dates.clone(),
            values: self.rate.clone(),
        }
    }

    pub fn total_violations(&self) -> usize {
        self.violations.iter().sum()
    }

    pub fn total_tests(&self) -> usize {
        self.tests.iter().sum()
    }
}

pub fn daily_violation_rate(records: &[ViolationRecord], measure: &str) -> Result<DailyViolationSeries> {
    let mut by_date: BTreeMap<NaiveDate, (usize, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.measure == measure) {
        let e = by_date.entry(r.date).or_default();
        e.1 += 1;
        if r.violated {
            e.0 += 1;
        }
    }
    if by_date.is_empty() {
        return Err(domain(format!("no records for measure `{measure}`")));
    }
    let mut s = DailyViolationSeries {
        measure: measure.to_string(),
        dates: Vec::with_capacity(by_date.len()),
        rate: Vec::with_capacity(by_date.len()),
        violations: Vec::with_capacity(by_date.len()),
        tests: Vec::with_capacity(by_date.len()),
    };
    for (d, (v, n)) in by_date {
        s.dates.push(d);
        s.rate.push(v as f64 / n as f64);
        s.violations.push(v);
        s.tests.push(n);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect()
    }

    fn panel(cols: &[Vec<f64>]) -> LossPanel {
        let names = (0..cols.len()).map(|i| format!("T{i}")).collect();
        LossPanel::from_columns(dates(cols[0].len()), names, cols).unwrap()
    }

    fn config(window: usize, levels: Vec<f64>) -> RollingConfig {
        RollingConfig::new(window, 1e-8, levels, None, vec![]).unwrap()
    }

    #[test]
    fn rolling_full_window_single_value() {
        let p = panel(&[vec![0.05, 0.01, -0.02, 0.03, -0.01]]);
        let cfg = config(5, vec![0.6]);
        let es = RiskMeasureSpec::es(0.6).unwrap();
        let s = rolling_eval(&p, "T0", &cfg, &es).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.values[0] - 0.04).abs() < 1e-15);
        assert_eq!(s.dates[0], p.dates[4]);
    }

    #[test]
    fn rolling_constant_series() {
        let p = panel(&[vec![0.02; 12]]);
        let cfg = config(4, vec![0.9]);
        for spec in [RiskMeasureSpec::var(0.9).unwrap(), RiskMeasureSpec::es(0.9).unwrap()] {
            let s = rolling_eval(&p, "T0", &cfg, &spec).unwrap();
            assert_eq!(s.len(), 9);
            assert!(s.values.iter().all(|&v| v == 0.02));
        }
    }

    #[test]
    fn rolling_insufficient_history_is_empty() {
        let p = panel(&[vec![0.01; 3]]);
        let s = rolling_eval(&p, "T0", &config(5, vec![0.9]), &RiskMeasureSpec::es(0.9).unwrap()).unwrap();
        assert!(s.is_empty());
        assert!(rolling_eval(&p, "nope", &config(2, vec![0.9]), &RiskMeasureSpec::es(0.9).unwrap()).is_err());
    }

    #[test]
    fn self_pair_zero_gap() {
        let c = vec![0.01, -0.03, 0.02, 0.05, -0.01, 0.0];
        let p = panel(&[c.clone(), c]);
        let recs = pairwise_day_tests(&p, &config(4, vec![0.5])).unwrap();
        assert!(recs
            .iter()
            .filter(|r| r.test == TestKind::Submodularity)
            .all(|r| r.gap == 0.0 && !r.violated));
    }

    #[test]
    fn var_subadd_fixture_violates() {
        let p = panel(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        let recs = pairwise_day_tests(&p, &config(4, vec![0.5])).unwrap();
        let sub = recs.iter().find(|r| r.measure == "VaR(0.5)[subadd]").unwrap();
        assert!(sub.violated);
        assert_eq!(sub.gap, -1.0);
        assert_eq!(recs.len(), 3);
    }

    #[test]
    fn records_sorted_and_rates() {
        let p = panel(&[
            vec![0.01, -0.02, 0.03, 0.0, 0.02, -0.01],
            vec![0.02, 0.01, -0.03, 0.01, 0.0, 0.02],
            vec![-0.01, 0.03, 0.01, -0.02, 0.01, 0.0],
        ]);
        let recs = pairwise_day_tests(&p, &config(3, vec![0.6])).unwrap();
        // 4 dates × 3 pairs × (VaR, VaR subadd, ES)
        assert_eq!(recs.len(), 4 * 3 * 3);
        assert!(recs.windows(2).all(|w| (w[0].date, &w[0].pair, &w[0].measure) <= (w[1].date, &w[1].pair, &w[1].measure)));
        let es = daily_violation_rate(&recs, "ES(0.6)").unwrap();
        assert_eq!(es.dates.len(), 4);
        assert!(es.rate.iter().all(|&r| r == 0.0));
        assert!(es.tests.iter().all(|&n| n == 3));
        assert!(daily_violation_rate(&recs, "ES(0.7)").is_err());
    }

    #[test]
    fn rate_single_violated_pair() {
        let r = ViolationRecord {
            date: dates(1)[0],
            pair: ("A".into(), "B".into()),
            measure: "VaR(0.5)".into(),
            params: "p=0.5".into(),
            test: TestKind::Submodularity,
            gap: -1.0,
            violated: true,
        };
        let s = daily_violation_rate(&[r], "VaR(0.5)").unwrap();
        assert_eq!(s.rate, vec![1.0]);
    }

    #[test]
    fn rate_sector_scale() {
        let mut recs = Vec::new();
        for k in 0..1485 {
            recs.push(ViolationRecord {
                date: dates(1)[0],
                pair: (format!("A{k:04}"), "Z".into()),
                measure: "VaR(0.95)".into(),
                params: String::new(),
                test: TestKind::Submodularity,
                gap: if k < 66 { -1.0 } else { 0.0 },
                violated: k < 66,
            });
        }
        let s = daily_violation_rate(&recs, "VaR(0.95)").unwrap();
        assert!((s.rate[0] - 0.0444).abs() < 1e-4);
    }

    #[test]
    fn needs_two_tickers() {
        let p = panel(&[vec![0.0; 5]]);
        assert!(pairwise_day_tests(&p, &config(3, vec![0.9])).is_err());
    }
}
