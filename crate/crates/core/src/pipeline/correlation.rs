use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rolling::DatedSeries;
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pearson: f64,
    pub spearman: f64,
    pub dcor: f64,
    pub n: usize,
    /// set when either input is constant; pearson/spearman/dcor are then 0
    pub degenerate: bool,
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties receive the average of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

fn centered_distances(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (v[i] - v[j]).abs();
        }
    }
    let row: Vec<f64> = (0..n).map(|i| d[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // the distance matrix is symmetric, so column means equal row means
            d[i * n + j] += grand - row[i] - row[j];
        }
    }
    d
}

/// Distance correlation from double-centered distance matrices, `O(n²)`.
pub fn distance_correlation(a: &[f64], b: &[f64]) -> f64 {
    let ca = centered_distances(a);
    let cb = centered_distances(b);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let vab = dot(&ca, &cb);
    let vaa = dot(&ca, &ca);
    let vbb = dot(&cb, &cb);
    if vaa <= 0.0 || vbb <= 0.0 {
        return 0.0;
    }
    (vab.max(0.0) / (vaa * vbb).sqrt()).sqrt().clamp(0.0, 1.0)
}

/// Pearson, Spearman and distance correlation on the common dates of two
/// series.
pub fn correlations(a: &DatedSeries, b: &DatedSeries) -> Result<CorrelationResult> {
    let bmap: BTreeMap<_, f64> = b.dates.iter().copied().zip(b.values.iter().copied()).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .dates
        .iter()
        .zip(&a.values)
        .filter_map(|(d, &v)| bmap.get(d).map(|&w| (v, w)))
        .unzip();
    correlations_aligned(&xs, &ys)
}

pub fn correlations_aligned(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    if xs.len() != ys.len() {
        return Err(domain("correlation inputs must have equal length"));
    }
    if xs.len() < 3 {
        return Err(domain(format!("need at least 3 common points, got {}", xs.len())));
    }
    let (p, s) = (pearson(xs, ys), spearman(xs, ys));
    Ok(CorrelationResult {
        pearson: p.unwrap_or(0.0),
        spearman: s.unwrap_or(0.0),
        dcor: distance_correlation(xs, ys),
        n: xs.len(),
        degenerate: p.is_none() || s.is_none(),
    })
}
