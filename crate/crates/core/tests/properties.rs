//! Property tests for the measure, lattice and correlation invariants.

use latticerisk::pipeline::correlation::{correlations_aligned, distance_correlation};
use latticerisk::{
    certainty_equivalent, distortion_rho, es_historical, expected_loss, pointwise_meet_join, random_pair_sweep,
    shortfall_rho, submodularity_gap, var_historical, DistortionFunction, EmpiricalSample, LossFunction,
    PairGenerator, RiskMeasureSpec, DEFAULT_EPSILON,
};
use proptest::prelude::*;

const MONETARY: &[&str] = &[
    "var:0.9",
    "es:0.75",
    "aes:0.5@0,0.9@0.1",
    "distortion:pow:0.5",
    "shortfall:exp:1",
    "shortfall:piecewise:1,2",
    "oce:exp:1",
    "oce:piecewise:0,4",
    "oce:quadlin:0.5",
    "mmd:square/es:0.5",
];

fn specs() -> Vec<RiskMeasureSpec> {
    MONETARY.iter().map(|s| s.parse().unwrap()).collect()
}

fn values(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..16).prop_flat_map(|n| (prop::collection::vec(-5.0..5.0f64, n), prop::collection::vec(-5.0..5.0f64, n)))
}

fn s(v: Vec<f64>) -> EmpiricalSample {
    EmpiricalSample::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn law_invariance(perm in values(1..14).prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))) {
        let (x, y) = (s(perm.0), s(perm.1));
        for spec in specs() {
            let (a, b) = (spec.evaluate(&x).unwrap(), spec.evaluate(&y).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{}: {a} vs {b}", spec.label);
        }
    }

    #[test]
    fn cash_invariance(v in values(1..14), c in -10.0..10.0f64) {
        let x = s(v);
        for spec in specs() {
            let d = spec.evaluate(&x.shifted(c)).unwrap() - spec.evaluate(&x).unwrap() - c;
            prop_assert!(d.abs() <= 1e-9, "{}: {d}", spec.label);
        }
    }

    #[test]
    fn homogeneity(v in values(1..14), lam in 0.01..50.0f64) {
        let x = s(v);
        for p in [0.5, 0.9, 0.95] {
            prop_assert_eq!(var_historical(&x.scaled(lam), p).unwrap(), lam * var_historical(&x, p).unwrap());
            let (a, b) = (es_historical(&x.scaled(lam), p).unwrap(), lam * es_historical(&x, p).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let phi = DistortionFunction::power(0.3).unwrap();
        let (a, b) = (distortion_rho(&x.scaled(lam), &phi), lam * distortion_rho(&x, &phi));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn monotonicity(v in values(1..14), bumps in prop::collection::vec(0.0..2.0f64, 14)) {
        let x = s(v);
        let y = s(x.as_slice().iter().zip(&bumps).map(|(a, b)| a + b).collect());
        for spec in specs() {
            // g = t² stays monotone only for deviations below 1/2
            let (x, y) = if spec.label.starts_with("MMD") { (x.scaled(0.05), y.scaled(0.05)) } else { (x.clone(), y.clone()) };
            let (a, b) = (spec.evaluate(&x).unwrap(), spec.evaluate(&y).unwrap());
            prop_assert!(a <= b + 1e-9, "{}: {a} > {b}", spec.label);
        }
    }

    #[test]
    fn es_dominates_var(v in values(1..40), p in 0.01..0.999f64) {
        let x = s(v);
        prop_assert!(es_historical(&x, p).unwrap() >= var_historical(&x, p).unwrap());
    }

    #[test]
    fn comonotonic_additivity((mut a, mut b) in pair(), theta in 0.05..1.0f64) {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (x, y) = (s(a), s(b));
        let sum = x.sum_with(&y).unwrap();
        for phi in [DistortionFunction::power(theta).unwrap(), DistortionFunction::expected_shortfall(theta * 0.99).unwrap()] {
            let d = distortion_rho(&sum, &phi) - distortion_rho(&x, &phi) - distortion_rho(&y, &phi);
            prop_assert!(d.abs() <= 1e-12 * (1.0 + sum.max().abs()), "{phi}: {d}");
        }
    }

    #[test]
    fn lattice_identity_and_expected_loss_modularity((a, b) in pair()) {
        let (x, y) = (s(a), s(b));
        let (m, j) = pointwise_meet_join(&x, &y).unwrap();
        for i in 0..x.len() {
            prop_assert_eq!(m.as_slice()[i] + j.as_slice()[i], x.as_slice()[i] + y.as_slice()[i]);
        }
        for ell in [LossFunction::linear(), LossFunction::square(), LossFunction::exponential_raw(1.0).unwrap()] {
            let g = expected_loss(&x, &ell) + expected_loss(&y, &ell) - expected_loss(&m, &ell) - expected_loss(&j, &ell);
            prop_assert!(g.abs() <= 1e-12, "{ell}: {g}");
        }
    }

    #[test]
    fn shortfall_exp_matches_ce(v in values(1..14), gamma in 0.2..2.0f64) {
        let x = s(v);
        let a = shortfall_rho(&x, &LossFunction::exponential(gamma).unwrap()).unwrap();
        let b = certainty_equivalent(&x, &LossFunction::exponential_raw(gamma).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }

    #[test]
    fn gap_symmetric((a, b) in pair()) {
        let (x, y) = (s(a), s(b));
        for spec in specs() {
            let g1 = submodularity_gap(&spec, &x, &y, DEFAULT_EPSILON).unwrap();
            let g2 = submodularity_gap(&spec, &y, &x, DEFAULT_EPSILON).unwrap();
            prop_assert_eq!(g1.gap, g2.gap);
        }
    }

    #[test]
    fn ordered_pairs_have_zero_gap(v in values(2..14), bumps in prop::collection::vec(0.0..2.0f64, 14)) {
        let x = s(v);
        let y = s(x.as_slice().iter().zip(&bumps).map(|(a, b)| a + b).collect());
        for spec in specs() {
            prop_assert_eq!(submodularity_gap(&spec, &x, &y, DEFAULT_EPSILON).unwrap().gap, 0.0);
        }
    }

    #[test]
    fn es_distortion_matches_historical(n in 2usize..60, kk in 0.0..1.0f64, v in values(60..61)) {
        let k = 1 + ((n - 1) as f64 * kk) as usize % (n - 1);
        let p = 1.0 - k as f64 / n as f64;
        let x = s(v[..n].to_vec());
        let a = distortion_rho(&x, &DistortionFunction::expected_shortfall(p).unwrap());
        let b = es_historical(&x, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "n={n} k={k}: {a} vs {b}");
    }

    #[test]
    fn correlation_bounds((a, b) in (3usize..30).prop_flat_map(|n| (values(n..n + 1), values(n..n + 1)))) {
        let r = correlations_aligned(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r.pearson));
        prop_assert!((-1.0..=1.0).contains(&r.spearman));
        prop_assert!((0.0..=1.0).contains(&r.dcor));
        prop_assert!((distance_correlation(&a, &a) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweeps_are_deterministic(seed in any::<u64>(), gen in 0usize..4) {
        let generator = [PairGenerator::Gaussian, PairGenerator::HeavyTail, PairGenerator::TwoPoint, PairGenerator::ThreePoint][gen];
        let spec: RiskMeasureSpec = "var:0.75".parse().unwrap();
        let a = random_pair_sweep(&spec, 8, 200, seed, generator, DEFAULT_EPSILON).unwrap();
        let b = random_pair_sweep(&spec, 8, 200, seed, generator, DEFAULT_EPSILON).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn es_sweep_never_violates(seed in any::<u64>(), p in 0.5..0.99f64) {
        let r = random_pair_sweep(&RiskMeasureSpec::es(p).unwrap(), 12, 300, seed, PairGenerator::HeavyTail, DEFAULT_EPSILON).unwrap();
        prop_assert_eq!(r.violations, 0);
    }
}
