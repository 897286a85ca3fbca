use chrono::NaiveDate;

use super::prices::PricePanel;
use crate::error::{domain, Result};

/// Log-return losses `L_t = −(ln P_t − ln P_{t−1})`, complete case across
/// the selected tickers. Row `t` belongs to the later date of its pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// row-major, `losses[t][j]`
    pub losses: Vec<Vec<f64>>,
}

impl LossPanel {
    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.losses.iter().map(|row| row[j]).collect()
    }

    /// Builds a panel directly from loss columns; used for fixtures.
    pub fn from_columns(dates: Vec<NaiveDate>, tickers: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.len() != tickers.len() || columns.iter().any(|c| c.len() != dates.len()) {
            return Err(domain("loss columns must match tickers and dates"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("loss dates must be strictly increasing"));
        }
        let losses = (0..dates.len()).map(|t| columns.iter().map(|c| c[t]).collect()).collect();
        Ok(Self { dates, tickers, losses })
    }
}

/// Computes losses for `tickers` (all panel tickers when empty).
///
/// A return exists at date `t` only when both `t` and the preceding panel
/// date carry a price; dates where any selected ticker lacks a return are
/// dropped. Nothing is forward-filled or interpolated.
pub fn build_loss_panel(panel: &PricePanel, tickers: &[String]) -> Result<LossPanel> {
    let selected: Vec<String> = if tickers.is_empty() {
        panel.tickers.clone()
    } else {
        let mut t = tickers.to_vec();
        t.sort();
        t.dedup();
        t
    };
    let cols: Vec<usize> = selected
        .iter()
        .map(|t| {
            panel
                .ticker_index(t)
                .ok_or_else(|| domain(format!("ticker `{t}` not in price panel")))
        })
        .collect::<Result<_>>()?;

    let common = panel
        .closes
        .iter()
        .filter(|row| cols.iter().all(|&j| row[j].is_some()))
        .count();
    if common < 2 {
        return Err(domain(format!(
            "need at least 2 common dates across {selected:?}, found {common}"
        )));
    }

    let mut dates = Vec::new();
    let mut losses = Vec::new();
    for t in 1..panel.dates.len() {
        let prev = &panel.closes[t - 1];
        let cur = &panel.closes[t];
        let row: Option<Vec<f64>> = cols
            .iter()
            .map(|&j| match (prev[j], cur[j]) {
                (Some(a), Some(b)) => Some(-(b.ln() - a.ln())),
                _ => None,
            })
            .collect();
        if let Some(row) = row {
            dates.push(panel.dates[t]);
            losses.push(row);
        }
    }
    if dates.is_empty() {
        return Err(domain(format!("no complete return rows across {selected:?}")));
    }
    Ok(LossPanel {
        dates,
        tickers: selected,
        losses,
    })
}
