//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! window = 250
//! epsilon = 1e-8
//! levels = 0.9, 0.95
//! aes_levels = 0.9, 0.98
//! aes_penalties = 0, 0.01
//! tickers = AAPL, MSFT
//! seed = 7
//! ```
//!
//! `levels` yields one VaR and one ES measure per level. `aes_levels` and
//! `aes_penalties` together define one adjusted-ES grid. `measures` takes
//! extra measure specs separated by `;`.

use std::path::Path;

use serde::Serialize;

use crate::error::{domain, Result, RiskError};
use crate::functions::AdjustmentGrid;
use crate::lattice::{MeasureKind, RiskMeasureSpec, DEFAULT_EPSILON};

#[derive(Debug, Clone)]
pub struct RollingConfig {
    pub window: usize,
    pub epsilon: f64,
    pub levels: Vec<f64>,
    pub aes_grid: Option<AdjustmentGrid>,
    pub extra_measures: Vec<String>,
    pub tickers: Vec<String>,
    pub seed: Option<u64>,
    pub measures: Vec<RiskMeasureSpec>,
}

/// Echo of the configuration written to `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub window: usize,
    pub epsilon: f64,
    pub levels: Vec<f64>,
    pub aes_levels: Option<Vec<f64>>,
    pub aes_penalties: Option<Vec<f64>>,
    pub extra_measures: Vec<String>,
    pub tickers: Vec<String>,
    pub seed: Option<u64>,
    pub measures: Vec<String>,
}

fn parse_list(s: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>().map_err(|_| RiskError::Parse {
                line,
                message: format!("`{key}`: cannot parse `{v}` as a number"),
            })
        })
        .collect()
}

impl RollingConfig {
    pub fn new(
        window: usize,
        epsilon: f64,
        levels: Vec<f64>,
        aes_grid: Option<AdjustmentGrid>,
        extra_measures: Vec<String>,
    ) -> Result<Self> {
        if window < 2 {
            return Err(domain(format!("window must be at least 2, got {window}")));
        }
        if !(epsilon >= 0.0) {
            return Err(domain(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let mut measures = Vec::new();
        for &p in &levels {
            measures.push(RiskMeasureSpec::var(p)?);
            measures.push(RiskMeasureSpec::es(p)?);
        }
        if let Some(g) = &aes_grid {
            measures.push(RiskMeasureSpec::new(MeasureKind::AES(g.clone()))?);
        }
        for m in &extra_measures {
            measures.push(m.parse()?);
        }
        if measures.is_empty() {
            return Err(domain("configuration selects no risk measures"));
        }
        Ok(Self {
            window,
            epsilon,
            levels,
            aes_grid,
            extra_measures,
            tickers: Vec::new(),
            seed: None,
            measures,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| RiskError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut window = None;
        let mut epsilon = DEFAULT_EPSILON;
        let mut levels = vec![0.9, 0.95];
        let mut aes_levels = None;
        let mut aes_penalties = None;
        let mut extra = Vec::new();
        let mut tickers = Vec::new();
        let mut seed = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| RiskError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| RiskError::Parse {
                line,
                message: format!("`{key}`: {what} `{value}`"),
            };
            match key {
                "window" => window = Some(value.parse::<usize>().map_err(|_| bad("not a count"))?),
                "epsilon" => epsilon = value.parse::<f64>().map_err(|_| bad("not a number"))?,
                "levels" => levels = parse_list(value, line, key)?,
                "aes_levels" => aes_levels = Some(parse_list(value, line, key)?),
                "aes_penalties" => aes_penalties = Some(parse_list(value, line, key)?),
                "measures" => {
                    extra = value
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                "tickers" => {
                    tickers = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("not an integer"))?),
                other => {
                    return Err(RiskError::Parse {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let window = window.ok_or_else(|| domain("configuration must set `window`"))?;
        let aes_grid = match (aes_levels, aes_penalties) {
            (Some(l), Some(p)) => Some(AdjustmentGrid::new(l, p)?),
            (None, None) => None,
            _ => return Err(domain("`aes_levels` and `aes_penalties` must be given together")),
        };
        let mut cfg = Self::new(window, epsilon, levels, aes_grid, extra)?;
        cfg.tickers = tickers;
        cfg.seed = seed;
        Ok(cfg)
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            window: self.window,
            epsilon: self.epsilon,
            levels: self.levels.clone(),
            aes_levels: self.aes_grid.as_ref().map(|g| g.levels().to_vec()),
            aes_penalties: self.aes_grid.as_ref().map(|g| g.penalties().to_vec()),
            extra_measures: self.extra_measures.clone(),
            tickers: self.tickers.clone(),
            seed: self.seed,
            measures: self.measures.iter().map(|m| m.label.clone()).collect(),
        }
    }
}
