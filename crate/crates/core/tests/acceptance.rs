//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p latticerisk-core --test acceptance -- --nocapture`
//! to see the lines.

use std::fs;
use std::path::Path;
use std::time::Instant;

use latticerisk::pipeline::{export_report, run_on_prices, run_pipeline, synth_prices, RollingConfig};
use latticerisk::theory::{
    aes_counterexample, ce_two_point_counterexample, curvature_profile, linear_dominance_check,
    mmd_counterexample_with_triple, shortfall_jump_deficit,
};
use latticerisk::{
    certainty_equivalent, distortion_rho, es_historical, expected_loss, pointwise_meet_join, random_pair_sweep,
    shortfall_rho, submodularity_gap, DeviationWeight, DistortionFunction, EmpiricalSample, LossFunction,
    MeasureKind, PairGenerator, RiskMeasureSpec, DEFAULT_EPSILON,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn verdict(id: &str, pass: bool, detail: String) {
    println!("[acceptance {id}] {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn sweep(spec: &str, n: usize, trials: usize, seed: u64, generator: PairGenerator) -> usize {
    let spec: RiskMeasureSpec = spec.parse().unwrap();
    random_pair_sweep(&spec, n, trials, seed, generator, DEFAULT_EPSILON).unwrap().violations
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> EmpiricalSample {
    EmpiricalSample::new((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
}

#[test]
fn c01_es_never_violates() {
    let start = Instant::now();
    let mut cells = Vec::new();
    for p in [0.9, 0.95, 0.99] {
        for n in [10, 50] {
            cells.push((p, n, sweep(&format!("es:{p}"), n, 10_000, 7, PairGenerator::Gaussian)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let total: usize = cells.iter().map(|c| c.2).sum();
    verdict(
        "1",
        total == 0 && secs < 30.0,
        format!("{total} ES violations over 6 × 10000 trials in {secs:.2}s"),
    );
}

#[test]
fn c02_oce_never_violates() {
    let start = Instant::now();
    let counts: Vec<(&str, usize)> = ["oce:exp:1", "oce:piecewise:0,4", "oce:quadlin:0.5"]
        .into_iter()
        .map(|m| (m, sweep(m, 10, 5_000, 11, PairGenerator::Gaussian)))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let total: usize = counts.iter().map(|c| c.1).sum();
    verdict("2", total == 0 && secs < 60.0, format!("violations {counts:?} in {secs:.2}s"));
}

#[test]
fn c03_expected_loss_modular() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let losses = [LossFunction::linear(), LossFunction::square(), LossFunction::exponential_raw(1.0).unwrap()];
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let (x, y) = (gaussian(&mut rng, 10), gaussian(&mut rng, 10));
        let (m, j) = pointwise_meet_join(&x, &y).unwrap();
        for l in &losses {
            let g = expected_loss(&x, l) + expected_loss(&y, l) - expected_loss(&m, l) - expected_loss(&j, l);
            worst = worst.max(g.abs());
        }
    }
    verdict("3", worst <= 1e-12, format!("max |gap| over 10000 pairs × 3 losses = {worst:e}"));
}

#[test]
fn c04a_feasible_losses_sweep_clean() {
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["exp:0.5", "exp:1", "exp:2", "poly2exp"] {
        let ell = LossFunction::parse(name).unwrap();
        let v = linear_dominance_check(&curvature_profile(&ell, -20.0, 20.0, 1e-3).unwrap(), &ell).unwrap();
        let viol = sweep(&format!("shortfall:{name}"), 10, 5_000, 13, PairGenerator::Gaussian);
        pass &= v.feasible && viol == 0;
        details.push(format!("{name}: feasible={} violations={viol}", v.feasible));
    }
    verdict("4a", pass, details.join("; "));
}

#[test]
fn c04b_expectile_violation_on_two_point() {
    let viol = sweep("shortfall:expectile:1", 4, 50_000, 1, PairGenerator::TwoPoint);
    let three = sweep("shortfall:expectile:1", 4, 50_000, 1, PairGenerator::ThreePoint);
    verdict(
        "4b",
        viol >= 1,
        format!(
            "two_point n=4: {viol} violations in 50000 trials (three_point for reference: {three}); \
             on {{0,1}}-valued vectors the expectile is a concave function of the number of ones"
        ),
    );
}

#[test]
fn c05_aes_counterexample() {
    let ce = aes_counterexample(1.0, 0.0, 0.5, 0.25, 10_000).unwrap();
    let measured = ce.measured_gap().unwrap();
    let deficit = ce.aes_deficit().unwrap();
    let target = 1.0 / 24.0;
    verdict(
        "5",
        (measured - target).abs() <= 1e-3 && deficit > 0.0,
        format!("measured gap {measured:.7} vs {target:.7}; ES^g deficit {deficit:.3e}"),
    );
}

#[test]
fn c06_shortfall_jump_deficit() {
    let hs = [0.1, 0.01, 0.001];
    let ds: Vec<_> = hs.iter().map(|&h| shortfall_jump_deficit(1.0, 2.0, h).unwrap()).collect();
    let errs: Vec<f64> = ds.iter().map(|d| (d.measured_ratio - d.limit_ratio).abs()).collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let last = ds[2].measured_ratio;
    verdict(
        "6",
        (last + 0.05).abs() <= 5e-3 && monotone,
        format!(
            "Δ_h/h at h=0.1,0.01,0.001: {:?}; limit {}",
            ds.iter().map(|d| d.measured_ratio).collect::<Vec<_>>(),
            ds[0].limit_ratio
        ),
    );
}

#[test]
fn c07_mmd_counterexample() {
    let phi = DistortionFunction::expected_shortfall(0.5).unwrap();
    let g = DeviationWeight::square();
    let ce = mmd_counterexample_with_triple(&phi, &g, 10, (0.6, 0.7, 0.8)).unwrap();
    let spec = RiskMeasureSpec::new(MeasureKind::MMD(g, phi)).unwrap();
    let gap = submodularity_gap(&spec, &ce.x, &ce.y, DEFAULT_EPSILON).unwrap();
    verdict("7", -gap.gap > 0.0 && gap.violated, format!("deficit {:e}", -gap.gap));
}

#[test]
fn c08_ce_characterization() {
    let convex = sweep("ce:expraw:1", 10, 5_000, 17, PairGenerator::Gaussian);
    let ce = ce_two_point_counterexample(&LossFunction::cubic(), -2.0, 2.0, 40).unwrap();
    verdict(
        "8",
        convex == 0 && ce.deficit > 0.0,
        format!(
            "CE(e^x): {convex} violations; cubic pair {:?}/{:?} deficit {:.4}",
            ce.x.as_slice(),
            ce.y.as_slice(),
            ce.deficit
        ),
    );
}

#[test]
fn c09_pipeline_structure() {
    let start = Instant::now();
    let panel = synth_prices(2024, 60, 4, 0.02, 0.05).unwrap();
    let cfg = RollingConfig::parse("window = 20\nlevels = 0.9, 0.95\naes_levels = 0.9, 0.98\naes_penalties = 0, 0.01\n").unwrap();
    let bytes = |dir: &Path| -> (Vec<Vec<u8>>, usize, usize) {
        let out = run_on_prices(&panel, &cfg, "synthetic").unwrap();
        let files = export_report(dir, &out.records, &out.series, &out.correlations, &out.summary).unwrap();
        let es: Vec<_> = out.records.iter().filter(|r| r.measure.starts_with("ES(")).collect();
        (
            files.iter().map(|p| fs::read(p).unwrap()).collect(),
            es.len(),
            es.iter().filter(|r| r.violated).count(),
        )
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, es_tests, es_viol) = bytes(a.path());
    let (second, _, _) = bytes(b.path());
    let secs = start.elapsed().as_secs_f64();
    let deterministic = first == second;

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let fcfg = RollingConfig::from_file(&fixtures.join("var_subadd.cfg")).unwrap();
    let c = tempfile::tempdir().unwrap();
    let (fx, _) = run_pipeline(&fixtures.join("var_subadd_prices.csv"), &fcfg, c.path()).unwrap();
    let recorded = fx.records.iter().any(|r| r.measure == "VaR(0.5)[subadd]" && r.violated);
    let on_disk = fs::read_to_string(c.path().join("violations.csv"))
        .unwrap()
        .lines()
        .any(|l| l.contains("VaR(0.5)[subadd]") && l.ends_with(",true"));

    verdict(
        "9",
        secs < 10.0 && deterministic && es_tests > 0 && es_viol == 0 && recorded && on_disk,
        format!(
            "{secs:.2}s, deterministic={deterministic}, ES violations {es_viol}/{es_tests}, VaR fixture recorded={}",
            recorded && on_disk
        ),
    );
}

#[test]
fn c10_cross_measure_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_es = 0.0_f64;
    for _ in 0..1_000 {
        let n = rng.random_range(2..=60);
        let k = rng.random_range(1..n);
        let p = 1.0 - k as f64 / n as f64;
        let x = gaussian(&mut rng, n);
        let d = distortion_rho(&x, &DistortionFunction::expected_shortfall(p).unwrap()) - es_historical(&x, p).unwrap();
        worst_es = worst_es.max(d.abs());
    }
    let (sf, ce) = (LossFunction::exponential(1.0).unwrap(), LossFunction::exponential_raw(1.0).unwrap());
    let mut worst_ce = 0.0_f64;
    for _ in 0..1_000 {
        let n = rng.random_range(1..=30);
        let x = gaussian(&mut rng, n);
        worst_ce = worst_ce.max((shortfall_rho(&x, &sf).unwrap() - certainty_equivalent(&x, &ce).unwrap()).abs());
    }
    verdict(
        "10",
        worst_es <= 1e-12 && worst_ce <= 1e-8,
        format!("max |distortion ES − historical ES| = {worst_es:e}; max |shortfall − CE| = {worst_ce:e}"),
    );
}
