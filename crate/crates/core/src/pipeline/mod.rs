//! Rolling-window empirical analysis: prices → losses → per-day pairwise
//! submodularity / subadditivity tests → daily violation rates → correlation
//! diagnostics → report files.
//!
//! Historical VaR and ES use the `k = ⌈n(1−p)⌉` order-statistic convention
//! on every window, including the meet and join windows built from two
//! tickers' losses.

pub mod config;
pub mod correlation;
pub mod losses;
pub mod prices;
pub mod report;
pub mod rolling;

use std::path::{Path, PathBuf};

pub use config::RollingConfig;
pub use correlation::{correlations, CorrelationResult};
pub use losses::{build_loss_panel, LossPanel};
pub use prices::{load_prices_csv, synth_prices, PricePanel};
pub use report::{export_report, CorrelationRow, RunSummary};
pub use rolling::{
    daily_violation_rate, pairwise_day_tests, rolling_eval, DailyViolationSeries, DatedSeries, TestKind,
    ViolationRecord, SUBADD_SUFFIX,
};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<ViolationRecord>,
    pub series: Vec<DailyViolationSeries>,
    pub correlations: Vec<CorrelationRow>,
    pub summary: RunSummary,
}

/// Runs the full analysis on a loss panel.
///
/// Correlations are computed between each VaR measure's submodularity and
/// subadditivity rate series.
pub fn run_on_losses(losses: &LossPanel, config: &RollingConfig, source: &str) -> Result<PipelineOutput> {
    let records = pairwise_day_tests(losses, config)?;
    let mut labels: Vec<String> = config.measures.iter().map(|m| m.label.clone()).collect();
    for m in config.measures.iter().filter(|m| m.is_var()) {
        labels.push(format!("{}{SUBADD_SUFFIX}", m.label));
    }
    labels.sort();
    let series: Vec<DailyViolationSeries> = if records.is_empty() {
        Vec::new()
    } else {
        labels
            .iter()
            .map(|l| daily_violation_rate(&records, l))
            .collect::<Result<_>>()?
    };

    let mut correlations = Vec::new();
    for m in config.measures.iter().filter(|m| m.is_var()) {
        let sub = series.iter().find(|s| s.measure == m.label);
        let add_label = format!("{}{SUBADD_SUFFIX}", m.label);
        let add = series.iter().find(|s| s.measure == add_label);
        if let (Some(a), Some(b)) = (sub, add) {
            if a.dates.len() < 3 {
                log::warn!("{}: fewer than 3 dated rates, correlations skipped", m.label);
                continue;
            }
            correlations.push(CorrelationRow {
                series_a: a.measure.clone(),
                series_b: b.measure.clone(),
                result: correlation::correlations(&a.as_dated(), &b.as_dated())?,
            });
        }
    }

    let n = losses.tickers.len();
    let summary = RunSummary {
        config: config.echo(),
        source: source.to_string(),
        tickers: losses.tickers.clone(),
        loss_rows: losses.n_rows(),
        tested_dates: losses.n_rows().saturating_sub(config.window - 1),
        pairs: n * n.saturating_sub(1) / 2,
        counts: RunSummary::count_records(&records),
        verdicts: Vec::new(),
    };
    Ok(PipelineOutput {
        records,
        series,
        correlations,
        summary,
    })
}

/// Loads prices, builds losses for the configured tickers and runs the
/// analysis.
pub fn run_on_prices(panel: &PricePanel, config: &RollingConfig, source: &str) -> Result<PipelineOutput> {
    let losses = build_loss_panel(panel, &config.tickers)?;
    run_on_losses(&losses, config, source)
}

pub fn run_pipeline(prices: &Path, config: &RollingConfig, out_dir: &Path) -> Result<(PipelineOutput, Vec<PathBuf>)> {
    let panel = load_prices_csv(prices)?;
    let out = run_on_prices(&panel, config, &prices.display().to_string())?;
    let files = export_report(out_dir, &out.records, &out.series, &out.correlations, &out.summary)?;
    Ok((out, files))
}
