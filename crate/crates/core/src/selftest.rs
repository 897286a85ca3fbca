//! Invariant suite behind `latticerisk selftest`.
//!
//! Each check is deterministic (fixed seeds) and reports a one-line detail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::functions::{DistortionFunction, LossFunction};
use crate::lattice::{random_pair_sweep, submodularity_gap, PairGenerator, RiskMeasureSpec, DEFAULT_EPSILON};
use crate::measures::{certainty_equivalent, distortion_rho, es_historical, expected_loss, shortfall_rho, var_historical};
use crate::pipeline::{self, correlation, RollingConfig};
use crate::sample::{pointwise_meet_join, EmpiricalSample};
use crate::theory;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> EmpiricalSample {
    EmpiricalSample::new((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
}

fn specs(list: &[&str]) -> Vec<RiskMeasureSpec> {
    list.iter().map(|s| s.parse().expect("built-in spec")).collect()
}

const MONETARY: &[&str] = &[
    "var:0.9",
    "es:0.9",
    "aes:0.5@0,0.9@0.1",
    "distortion:pow:0.5",
    "shortfall:exp:1",
    "shortfall:poly2exp",
    "oce:exp:1",
    "oce:piecewise:0,4",
    "mmd:square/es:0.5",
];

/// Runs every check; order is fixed.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(measure_checks());
    out.extend(lattice_checks());
    out.extend(theory_checks());
    out.extend(pipeline_checks());
    out
}

fn measure_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(check("law invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut all = specs(MONETARY);
        all.extend(specs(&["el:square", "ce:exp:1"]));
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let x = gaussian(&mut rng, 12);
            let mut v = x.as_slice().to_vec();
            v.reverse();
            v.rotate_left(5);
            let y = EmpiricalSample::new(v)?;
            for s in &all {
                worst = worst.max((s.evaluate(&x)? - s.evaluate(&y)?).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max |ρ(x) − ρ(πx)| = {worst:e}")))
    }));
    out.push(check("cash invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let all = specs(MONETARY);
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let x = gaussian(&mut rng, 10);
            let c: f64 = rng.random_range(-5.0..5.0);
            for s in &all {
                worst = worst.max((s.evaluate(&x.shifted(c))? - s.evaluate(&x)? - c).abs());
            }
        }
        Ok((worst <= 1e-9, format!("max |ρ(x+c) − ρ(x) − c| = {worst:e}")))
    }));
    out.push(check("positive homogeneity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let all = specs(&["var:0.9", "es:0.8", "distortion:pow:0.5"]);
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let x = gaussian(&mut rng, 10);
            let lam: f64 = rng.random_range(0.1..10.0);
            for s in &all {
                let a = s.evaluate(&x.scaled(lam))?;
                let b = lam * s.evaluate(&x)?;
                worst = worst.max((a - b).abs() / (1.0 + b.abs()));
            }
        }
        Ok((worst <= 1e-12, format!("max relative |ρ(λx) − λρ(x)| = {worst:e}")))
    }));
    out.push(check("monotonicity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let all = specs(MONETARY);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..50 {
            let x = gaussian(&mut rng, 10);
            let bump: Vec<f64> = x.as_slice().iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
            let y = EmpiricalSample::new(bump)?;
            for s in &all {
                // g = t² keeps MMD monotone only while g′ ≤ 1, i.e. deviations ≤ 1/2
                let (x, y) = if s.label.starts_with("MMD") { (x.scaled(0.05), y.scaled(0.05)) } else { (x.clone(), y.clone()) };
                worst = worst.max(s.evaluate(&x)? - s.evaluate(&y)?);
            }
        }
        Ok((worst <= 1e-9, format!("max ρ(x) − ρ(y) over x ≤ y = {worst:e}")))
    }));
    out.push(check("ES dominates VaR", || {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut ok = true;
        for _ in 0..200 {
            let x = gaussian(&mut rng, 25);
            for p in [0.5, 0.9, 0.95, 0.99] {
                ok &= es_historical(&x, p)? >= var_historical(&x, p)?;
            }
        }
        Ok((ok, "es ≥ var on 200 samples × 4 levels".into()))
    }));
    out.push(check("comonotonic additivity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let phis = [
            DistortionFunction::power(0.5)?,
            DistortionFunction::expected_shortfall(0.75)?,
            DistortionFunction::value_at_risk(0.9)?,
        ];
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let mut a = gaussian(&mut rng, 10).into_vec();
            let mut b = gaussian(&mut rng, 10).into_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let (x, y) = (EmpiricalSample::new(a)?, EmpiricalSample::new(b)?);
            let sum = x.sum_with(&y)?;
            for phi in &phis {
                let d = distortion_rho(&sum, phi) - distortion_rho(&x, phi) - distortion_rho(&y, phi);
                worst = worst.max(d.abs());
            }
        }
        Ok((worst <= 1e-12, format!("max |ρ(x+y) − ρ(x) − ρ(y)| = {worst:e}")))
    }));
    out.push(check("expected loss modular", || {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let losses = [LossFunction::linear(), LossFunction::square(), LossFunction::exponential_raw(1.0)?];
        let mut worst = 0.0_f64;
        for _ in 0..500 {
            let (x, y) = (gaussian(&mut rng, 10), gaussian(&mut rng, 10));
            let (m, j) = pointwise_meet_join(&x, &y)?;
            for l in &losses {
                let g = expected_loss(&x, l) + expected_loss(&y, l) - expected_loss(&m, l) - expected_loss(&j, l);
                worst = worst.max(g.abs());
            }
        }
        Ok((worst <= 1e-12, format!("max |gap| = {worst:e}")))
    }));
    out.push(check("shortfall(exp) equals CE(exp)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut worst = 0.0_f64;
        for gamma in [0.5, 1.0, 2.0] {
            let sf = LossFunction::exponential(gamma)?;
            let ce = LossFunction::exponential_raw(gamma)?;
            for _ in 0..100 {
                let x = gaussian(&mut rng, 8);
                worst = worst.max((shortfall_rho(&x, &sf)? - certainty_equivalent(&x, &ce)?).abs());
            }
        }
        Ok((worst <= 1e-8, format!("max difference {worst:e}")))
    }));
    out
}

fn lattice_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(check("gap symmetry", || {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let all = specs(MONETARY);
        let mut ok = true;
        for _ in 0..50 {
            let (x, y) = (gaussian(&mut rng, 9), gaussian(&mut rng, 9));
            for s in &all {
                ok &= submodularity_gap(s, &x, &y, DEFAULT_EPSILON)?.gap
                    == submodularity_gap(s, &y, &x, DEFAULT_EPSILON)?.gap;
            }
        }
        Ok((ok, "gap(x,y) == gap(y,x) bitwise".into()))
    }));
    out.push(check("ordered pairs have zero gap", || {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let all = specs(MONETARY);
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let x = gaussian(&mut rng, 9);
            let y = EmpiricalSample::new(x.as_slice().iter().map(|v| v + rng.random_range(0.0..1.0)).collect())?;
            for s in &all {
                worst = worst.max(submodularity_gap(s, &x, &y, DEFAULT_EPSILON)?.gap.abs());
            }
        }
        Ok((worst == 0.0, format!("max |gap| = {worst:e}")))
    }));
    out.push(check("sweep determinism", || {
        let s: RiskMeasureSpec = "var:0.8".parse()?;
        let a = random_pair_sweep(&s, 10, 500, 99, PairGenerator::HeavyTail, DEFAULT_EPSILON)?;
        let b = random_pair_sweep(&s, 10, 500, 99, PairGenerator::HeavyTail, DEFAULT_EPSILON)?;
        Ok((a == b, format!("{} violations both runs", a.violations)))
    }));
    for n in [10, 50] {
        out.push(check(&format!("ES sweep n={n}"), || {
            let mut total = 0;
            for p in [0.9, 0.95, 0.99] {
                let r = random_pair_sweep(&RiskMeasureSpec::es(p)?, n, 10_000, 7, PairGenerator::Gaussian, DEFAULT_EPSILON)?;
                total += r.violations;
            }
            Ok((total == 0, format!("{total} violations over 3 × 10000 trials")))
        }));
    }
    out
}

fn theory_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for name in ["exp:1", "poly2exp", "linear"] {
        out.push(check(&format!("feasible loss {name} sweeps clean"), || {
            let ell = LossFunction::parse(name)?;
            let profile = theory::curvature_profile(&ell, -20.0, 20.0, 1e-3)?;
            let verdict = theory::linear_dominance_check(&profile, &ell)?;
            let spec: RiskMeasureSpec = format!("shortfall:{name}").parse()?;
            let r = random_pair_sweep(&spec, 10, 5_000, 3, PairGenerator::Gaussian, DEFAULT_EPSILON)?;
            Ok((
                verdict.feasible && r.violations == 0,
                format!("feasible={} violations={} worst_gap={:e}", verdict.feasible, r.violations, r.worst_gap),
            ))
        }));
    }
    out.push(check("expectile necessity witnessed", || {
        let spec: RiskMeasureSpec = "shortfall:expectile:1".parse()?;
        let lattice = random_pair_sweep(&spec, 4, 50_000, 1, PairGenerator::ThreePoint, DEFAULT_EPSILON)?;
        let binary = random_pair_sweep(&spec, 4, 50_000, 1, PairGenerator::TwoPoint, DEFAULT_EPSILON)?;
        Ok((
            lattice.violations > 0,
            format!(
                "three_point: {} violations; two_point: {} (on {{0,1}} vectors the expectile is a concave function of the count of ones)",
                lattice.violations, binary.violations
            ),
        ))
    }));
    out.push(check("AES counterexample", || {
        let ce = theory::aes_counterexample(1.0, 0.0, 0.5, 0.25, 2_000)?;
        let deficit = ce.aes_deficit()?;
        Ok((deficit > 0.0, format!("ES^g deficit {deficit:.6}, predicted ES gap {:.6}", ce.predicted_gap)))
    }));
    out.push(check("MMD counterexample", || {
        let phi = DistortionFunction::expected_shortfall(0.5)?;
        let g = crate::functions::DeviationWeight::square();
        let ce = theory::mmd_counterexample_with_triple(&phi, &g, 10, (0.6, 0.7, 0.8))?;
        let spec = RiskMeasureSpec::new(crate::lattice::MeasureKind::MMD(g, phi))?;
        let gap = submodularity_gap(&spec, &ce.x, &ce.y, DEFAULT_EPSILON)?;
        Ok((gap.violated, format!("deficit {:e}", -gap.gap)))
    }));
    out.push(check("shortfall jump deficit", || {
        let ratios: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&h| theory::shortfall_jump_deficit(1.0, 2.0, h).map(|d| d.measured_ratio))
            .collect::<Result<_>>()?;
        let monotone = ratios.windows(2).all(|w| w[1] <= w[0] + 1e-6);
        let close = (ratios[2] + 0.05).abs() <= 5e-3;
        Ok((monotone && close, format!("Δ_h/h = {ratios:?}")))
    }));
    out.push(check("CE characterization", || {
        let spec: RiskMeasureSpec = "ce:exp:1".parse()?;
        let r = random_pair_sweep(&spec, 10, 5_000, 5, PairGenerator::Gaussian, DEFAULT_EPSILON)?;
        let ce = theory::ce_two_point_counterexample(&LossFunction::cubic(), -2.0, 2.0, 40)?;
        Ok((r.violations == 0 && ce.deficit > 0.0, format!("convex: {} violations; cubic deficit {:e}", r.violations, ce.deficit)))
    }));
    out
}

fn pipeline_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(check("pipeline structure", || {
        let panel = pipeline::synth_prices(42, 60, 4, 0.02, 0.05)?;
        let cfg = RollingConfig::parse("window = 20\nlevels = 0.9, 0.95\naes_levels = 0.9, 0.98\naes_penalties = 0, 0.01\n")?;
        let a = pipeline::run_on_prices(&panel, &cfg, "synthetic")?;
        let b = pipeline::run_on_prices(&panel, &cfg, "synthetic")?;
        let deterministic = a.records == b.records;
        let es_clean = a.records.iter().filter(|r| r.measure.starts_with("ES(")).all(|r| !r.violated);
        let bounds = a.correlations.iter().all(|c| {
            (-1.0..=1.0).contains(&c.result.pearson)
                && (-1.0..=1.0).contains(&c.result.spearman)
                && (0.0..=1.0).contains(&c.result.dcor)
        });
        let self_dcor = {
            let v: Vec<f64> = (0..20).map(|i| ((i * 7) % 11) as f64).collect();
            (correlation::distance_correlation(&v, &v) - 1.0).abs() < 1e-12
        };
        Ok((
            deterministic && es_clean && bounds && self_dcor,
            format!(
                "{} records, deterministic={deterministic}, ES clean={es_clean}, correlation bounds={bounds}, dcor(a,a)=1: {self_dcor}",
                a.records.len()
            ),
        ))
    }));
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn measure_checks_pass() {
        for c in super::measure_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn pipeline_checks_pass() {
        for c in super::pipeline_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
