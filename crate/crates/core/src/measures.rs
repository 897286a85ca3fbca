//! Exact evaluation of law-invariant risk functionals on empirical samples.
//!
//! Every functional treats the sample as the uniform law on its atoms, so
//! results are invariant under permutation of the entries. Order-statistic
//! measures (VaR, ES, AES, distortion) are exact; the implicit and optimized
//! functionals (CE, shortfall, OCE) are computed by bisection or ternary
//! section to roughly `1e-12`.

use crate::error::{domain, Result, RiskError};
use crate::functions::{AdjustmentGrid, DeviationWeight, DistortionFunction, LossFunction};
use crate::sample::EmpiricalSample;
use crate::solve::{bisect_decreasing, minimize_convex};

/// Tail count `k = ⌈n(1−p)⌉`, clamped to `[1, n]`.
///
/// `n(1−p)` is snapped to the nearest integer when it lies within a relative
/// `1e-9` of one, so that levels such as `p = 0.95` with `n = 20` give `k = 1`
/// rather than the `k = 2` that `1 − 0.95 = 0.050000000000000044` would
/// otherwise produce.
pub fn tail_count(n: usize, p: f64) -> usize {
    let x = n as f64 * (1.0 - p);
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

fn check_confidence(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("confidence level must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// Historical VaR: the `k`-th largest loss.
pub fn var_historical(sample: &EmpiricalSample, p: f64) -> Result<f64> {
    check_confidence(p)?;
    let k = tail_count(sample.len(), p);
    Ok(sample.sorted_desc()[k - 1])
}

/// Historical ES: mean of the `k` largest losses.
pub fn es_historical(sample: &EmpiricalSample, p: f64) -> Result<f64> {
    check_confidence(p)?;
    Ok(es_sorted(&sample.sorted_desc(), p))
}

/// ES on already descending losses; also accepts `p = 0` (the mean).
fn es_sorted(desc: &[f64], p: f64) -> f64 {
    let k = tail_count(desc.len(), p);
    desc[..k].iter().sum::<f64>() / k as f64
}

/// Adjusted ES over a finite grid: `max_j {ES_{p_j}(x) − g(p_j)}`.
pub fn aes(sample: &EmpiricalSample, grid: &AdjustmentGrid) -> Result<f64> {
    let desc = sample.sorted_desc();
    grid.iter()
        .map(|(level, penalty)| es_sorted(&desc, level) - penalty)
        .reduce(f64::max)
        .ok_or_else(|| domain("adjustment grid is empty"))
}

/// Choquet weights `φ(i/n) − φ((i−1)/n)` for descending order statistics.
pub fn choquet_weights(n: usize, phi: &DistortionFunction) -> Vec<f64> {
    let nf = n as f64;
    (1..=n)
        .map(|i| phi.eval(i as f64 / nf) - phi.eval((i - 1) as f64 / nf))
        .collect()
}

/// Distortion risk measure, the Choquet integral of the empirical law.
pub fn distortion_rho(sample: &EmpiricalSample, phi: &DistortionFunction) -> f64 {
    let desc = sample.sorted_desc();
    choquet_weights(desc.len(), phi)
        .iter()
        .zip(&desc)
        .map(|(w, l)| w * l)
        .sum()
}

/// Expected loss `E[ℓ(X)]`.
pub fn expected_loss(sample: &EmpiricalSample, ell: &LossFunction) -> f64 {
    sample.as_slice().iter().map(|&x| ell.eval(x)).sum::<f64>() / sample.len() as f64
}

/// Certainty equivalent `ℓ⁻¹(E[ℓ(X)])`, inverting `ℓ` by bisection.
pub fn certainty_equivalent(sample: &EmpiricalSample, ell: &LossFunction) -> Result<f64> {
    if !ell.strictly_increasing {
        return Err(domain(format!(
            "certainty equivalent needs a strictly increasing loss, `{ell}` is not"
        )));
    }
    if sample.len() == 1 {
        return Ok(sample.as_slice()[0]);
    }
    let target = expected_loss(sample, ell);
    if !target.is_finite() {
        return Err(RiskError::Bracket(format!(
            "mean of ℓ-values is not finite for `{ell}`"
        )));
    }
    bisect_decreasing(|m| target - ell.eval(m), sample.min() - 1.0, sample.max() + 1.0).map_err(
        |e| RiskError::Bracket(format!("cannot invert `{ell}` at {target}: {e}")),
    )
}

/// Shortfall risk: the root `m` of `Σ ℓ(x_k − m) = 0` for normalized `ℓ`.
///
/// A non-normalized `ℓ` is shifted by `ℓ(0)` first, which leaves the measure
/// unchanged.
pub fn shortfall_rho(sample: &EmpiricalSample, ell: &LossFunction) -> Result<f64> {
    if !(ell.strictly_increasing && ell.convex) {
        return Err(domain(format!(
            "shortfall risk needs a strictly increasing convex loss, `{ell}` is flagged otherwise"
        )));
    }
    if sample.len() == 1 {
        return Ok(sample.as_slice()[0]);
    }
    let ell = ell.normalized_copy();
    let xs = sample.as_slice();
    let residual = |m: f64| xs.iter().map(|&x| ell.eval(x - m)).sum::<f64>();
    let m = bisect_decreasing(residual, sample.min() - 1.0, sample.max() + 1.0)?;
    let r = residual(m);
    let tol = xs.len() as f64 * 1e-10;
    if r.abs() > tol {
        // bisection stalls at the floating-point limit; accept when the
        // residual changes sign across one ulp
        let lo = residual(m - m.abs().max(1.0) * f64::EPSILON * 4.0);
        let hi = residual(m + m.abs().max(1.0) * f64::EPSILON * 4.0);
        if !(lo >= 0.0 && hi <= 0.0) {
            return Err(RiskError::Numeric(format!(
                "shortfall residual {r} exceeds {tol} at m = {m}"
            )));
        }
    }
    Ok(m)
}

/// Optimized certainty equivalent `inf_m {m + E[ℓ(X − m)]}`.
pub fn oce(sample: &EmpiricalSample, ell: &LossFunction) -> Result<f64> {
    if !ell.convex {
        return Err(domain(format!("OCE needs a convex loss, `{ell}` is not")));
    }
    let xs = sample.as_slice();
    let n = xs.len() as f64;
    let objective = |m: f64| m + xs.iter().map(|&x| ell.eval(x - m)).sum::<f64>() / n;
    let (_, value) = minimize_convex(objective, sample.min() - 1.0, sample.max() + 1.0)?;
    Ok(value)
}

/// Monotone mean-deviation measure `g(ρ_φ(X) − E[X]) + E[X]`.
pub fn mmd_rho(
    sample: &EmpiricalSample,
    g: &DeviationWeight,
    phi: &DistortionFunction,
) -> Result<f64> {
    if !phi.concave {
        return Err(domain(format!(
            "mean-deviation measure needs a concave distortion, `{phi}` is not"
        )));
    }
    let mean = sample.mean();
    let deviation = distortion_rho(sample, phi) - mean;
    let scale = sample.as_slice().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if deviation < -1e-12 * scale {
        return Err(domain(format!(
            "negative deviation {deviation}: distortion `{phi}` is not concave"
        )));
    }
    Ok(g.eval(deviation.max(0.0)) + mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> EmpiricalSample {
        EmpiricalSample::new(v.to_vec()).unwrap()
    }

    fn five() -> EmpiricalSample {
        s(&[0.05, 0.01, -0.02, 0.03, -0.01])
    }

    #[test]
    fn tail_count_snaps_integers() {
        assert_eq!(tail_count(5, 0.8), 1);
        assert_eq!(tail_count(5, 0.6), 2);
        assert_eq!(tail_count(20, 0.95), 1);
        assert_eq!(tail_count(250, 0.99), 3);
        assert_eq!(tail_count(500, 0.99), 5);
        assert_eq!(tail_count(10, 0.95), 1);
        assert_eq!(tail_count(4, 0.0), 4);
        assert_eq!(tail_count(3, 0.999), 1);
    }

    #[test]
    fn var_examples() {
        assert_eq!(var_historical(&five(), 0.8).unwrap(), 0.05);
        assert_eq!(var_historical(&five(), 0.6).unwrap(), 0.03);
        assert_eq!(var_historical(&s(&[0.7; 6]), 0.37).unwrap(), 0.7);
    }

    #[test]
    fn var_rejects_bad_level() {
        assert!(var_historical(&five(), 1.0).is_err());
        assert!(var_historical(&five(), 0.0).is_err());
        assert!(es_historical(&five(), -0.1).is_err());
    }

    #[test]
    fn es_examples() {
        assert!((es_historical(&five(), 0.6).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(es_historical(&five(), 0.8).unwrap(), 0.05);
        assert_eq!(es_historical(&s(&[-0.3; 4]), 0.9).unwrap(), -0.3);
    }

    #[test]
    fn aes_examples() {
        let grid = AdjustmentGrid::new(vec![0.6, 0.8], vec![0.0, 0.005]).unwrap();
        assert!((aes(&five(), &grid).unwrap() - 0.045).abs() < 1e-15);
        let single = AdjustmentGrid::new(vec![0.6], vec![0.0]).unwrap();
        assert_eq!(aes(&five(), &single).unwrap(), es_historical(&five(), 0.6).unwrap());
        let saturated = AdjustmentGrid::two_level(0.6, 0.8, 1.0).unwrap();
        assert_eq!(aes(&five(), &saturated).unwrap(), es_historical(&five(), 0.6).unwrap());
    }

    #[test]
    fn distortion_examples() {
        let x = five();
        assert!((distortion_rho(&x, &DistortionFunction::identity()) - x.mean()).abs() < 1e-15);
        let phi = DistortionFunction::custom("min(t/0.4,1)", |t: f64| (t / 0.4).min(1.0), true).unwrap();
        let w = choquet_weights(5, &phi);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        assert!(w[2..].iter().all(|&v| v.abs() < 1e-15));
        assert!((distortion_rho(&x, &phi) - 0.04).abs() < 1e-15);
        for p in [0.6, 0.8] {
            let v = DistortionFunction::value_at_risk(p).unwrap();
            assert_eq!(distortion_rho(&x, &v), var_historical(&x, p).unwrap());
        }
    }

    #[test]
    fn expected_loss_examples() {
        let x = five();
        assert!((expected_loss(&x, &LossFunction::linear()) - x.mean()).abs() < 1e-16);
        assert_eq!(expected_loss(&s(&[1.0, -1.0]), &LossFunction::square()), 1.0);
    }

    #[test]
    fn ce_examples() {
        let ell = LossFunction::parse("expraw:1").unwrap();
        assert!((certainty_equivalent(&s(&[0.3; 4]), &ell).unwrap() - 0.3).abs() < 1e-12);
        let v = certainty_equivalent(&s(&[0.0, 2f64.ln()]), &ell).unwrap();
        assert!((v - 1.5f64.ln()).abs() < 1e-12);
        assert!((1.5f64.ln() - 0.405465).abs() < 1e-6);
        assert!(certainty_equivalent(&five(), &LossFunction::square()).is_err());
    }

    #[test]
    fn shortfall_examples() {
        let ell = LossFunction::exponential(1.0).unwrap();
        assert!((shortfall_rho(&s(&[0.2; 3]), &ell).unwrap() - 0.2).abs() < 1e-12);
        let v = shortfall_rho(&s(&[0.0, 2f64.ln()]), &ell).unwrap();
        assert!((v - 1.5f64.ln()).abs() < 1e-12);
        let x = five();
        assert!((shortfall_rho(&x, &LossFunction::linear()).unwrap() - x.mean()).abs() < 1e-12);
        assert_eq!(shortfall_rho(&s(&[4.2]), &ell).unwrap(), 4.2);
    }

    #[test]
    fn shortfall_normalizes_silently() {
        let raw = LossFunction::parse("expraw:1").unwrap();
        let norm = LossFunction::parse("exp:1").unwrap();
        let x = five();
        let a = shortfall_rho(&x, &raw).unwrap();
        let b = shortfall_rho(&x, &norm).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn shortfall_rejects_flags() {
        assert!(matches!(
            shortfall_rho(&five(), &LossFunction::cubic()),
            Err(RiskError::Domain(_))
        ));
        assert!(shortfall_rho(&five(), &LossFunction::piecewise(0.0, 4.0).unwrap()).is_err());
    }

    #[test]
    fn oce_examples() {
        let ell = LossFunction::piecewise(0.0, 4.0).unwrap();
        let x = s(&[1.0, 2.0, 3.0, 4.0]);
        let v = oce(&x, &ell).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
        assert!((v - es_historical(&x, 0.75).unwrap()).abs() < 1e-10);
        assert!((oce(&s(&[2.5; 4]), &ell).unwrap() - 2.5).abs() < 1e-10);
        let e = LossFunction::exponential(1.0).unwrap();
        assert!(oce(&s(&[0.0, 0.0]), &e).unwrap().abs() < 1e-10);
    }

    #[test]
    fn oce_unbounded_slope() {
        let flat = LossFunction::piecewise(0.5, 0.5).unwrap();
        assert!(matches!(oce(&five(), &flat), Err(RiskError::Domain(_))));
    }

    #[test]
    fn mmd_examples() {
        let x = five();
        let es = DistortionFunction::expected_shortfall(0.6).unwrap();
        let lin = DeviationWeight::identity();
        assert!((mmd_rho(&x, &lin, &es).unwrap() - distortion_rho(&x, &es)).abs() < 1e-15);
        let v = mmd_rho(&x, &DeviationWeight::square(), &es).unwrap();
        assert!((v - 0.012784).abs() < 1e-14);
        let id = DistortionFunction::identity();
        assert!((mmd_rho(&x, &DeviationWeight::square(), &id).unwrap() - x.mean()).abs() < 1e-15);
    }

    #[test]
    fn mmd_rejects_nonconcave() {
        let v = DistortionFunction::value_at_risk(0.6).unwrap();
        assert!(mmd_rho(&five(), &DeviationWeight::square(), &v).is_err());
    }

    #[test]
    fn singleton_samples() {
        let x = s(&[0.37]);
        let exp = LossFunction::exponential(1.0).unwrap();
        assert_eq!(var_historical(&x, 0.9).unwrap(), 0.37);
        assert_eq!(es_historical(&x, 0.9).unwrap(), 0.37);
        assert_eq!(distortion_rho(&x, &DistortionFunction::power(0.5).unwrap()), 0.37);
        assert_eq!(certainty_equivalent(&x, &exp).unwrap(), 0.37);
        assert_eq!(shortfall_rho(&x, &exp).unwrap(), 0.37);
        assert!((oce(&x, &exp).unwrap() - 0.37).abs() < 1e-10);
    }
}
