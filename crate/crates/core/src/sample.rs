//! Finite equal-weight samples of losses.
//!
//! An [`EmpiricalSample`] stands for a bounded random variable on an `n`-atom
//! space where every atom carries probability `1/n`. Positive values are
//! losses. Lattice operations act atom by atom, so two samples can only be
//! combined when they live on the same atom space (same length).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, RiskError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmpiricalSample {
    losses: Vec<f64>,
}

impl EmpiricalSample {
    /// Builds a sample, rejecting empty input and non-finite entries.
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(domain("empirical sample must have at least one atom"));
        }
        if let Some(i) = losses.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!(
                "sample entry {i} is not finite ({})",
                losses[i]
            )));
        }
        Ok(Self { losses })
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.losses
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.losses
    }

    /// Losses in descending order, `L_(1) >= L_(2) >= ... >= L_(n)`.
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.losses.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn mean(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `x + c·1`
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            losses: self.losses.iter().map(|v| v + c).collect(),
        }
    }

    /// `λ·x`
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            losses: self.losses.iter().map(|v| v * lambda).collect(),
        }
    }

    /// Atom-wise sum, the portfolio loss `x + y`.
    pub fn sum_with(&self, other: &Self) -> Result<Self> {
        check_same_len(self, other)?;
        Ok(Self {
            losses: self
                .losses
                .iter()
                .zip(&other.losses)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// True when `self[i] <= other[i]` on every atom.
    pub fn dominated_by(&self, other: &Self) -> bool {
        self.len() == other.len() && self.losses.iter().zip(&other.losses).all(|(a, b)| a <= b)
    }
}

impl TryFrom<Vec<f64>> for EmpiricalSample {
    type Error = RiskError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EmpiricalSample> for Vec<f64> {
    fn from(s: EmpiricalSample) -> Self {
        s.losses
    }
}

fn check_same_len(x: &EmpiricalSample, y: &EmpiricalSample) -> Result<()> {
    if x.len() != y.len() {
        return Err(RiskError::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Pointwise meet and join `(x ∧ y, x ∨ y)` on a common atom space.
pub fn pointwise_meet_join(
    x: &EmpiricalSample,
    y: &EmpiricalSample,
) -> Result<(EmpiricalSample, EmpiricalSample)> {
    check_same_len(x, y)?;
    let (meet, join) = x
        .losses
        .iter()
        .zip(&y.losses)
        .map(|(&a, &b)| (a.min(b), a.max(b)))
        .unzip();
    Ok((
        EmpiricalSample { losses: meet },
        EmpiricalSample { losses: join },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> EmpiricalSample {
        EmpiricalSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn meet_join_small() {
        let (m, j) = pointwise_meet_join(&s(&[1.0, 3.0]), &s(&[2.0, 2.0])).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0]);
        assert_eq!(j.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn meet_join_idempotent() {
        let x = s(&[0.3, -1.0, 2.5]);
        let (m, j) = pointwise_meet_join(&x, &x).unwrap();
        assert_eq!(m, x);
        assert_eq!(j, x);
    }

    #[test]
    fn meet_join_against_shuffle() {
        let (m, j) = pointwise_meet_join(&s(&[5.0, -1.0, 0.0]), &s(&[-1.0, 0.0, 5.0])).unwrap();
        assert_eq!(m.as_slice(), &[-1.0, -1.0, 0.0]);
        assert_eq!(j.as_slice(), &[5.0, 0.0, 5.0]);
    }

    #[test]
    fn meet_join_length_mismatch() {
        let err = pointwise_meet_join(&s(&[1.0]), &s(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, RiskError::Dimension { expected: 1, actual: 2 }));
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(EmpiricalSample::new(vec![]).is_err());
        assert!(EmpiricalSample::new(vec![1.0, f64::NAN]).is_err());
        assert!(EmpiricalSample::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn sorted_descending() {
        assert_eq!(s(&[0.01, 0.05, -0.02]).sorted_desc(), vec![0.05, 0.01, -0.02]);
    }
}
