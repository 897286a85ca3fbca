//! Submodularity and subadditivity gaps, and seeded random-pair sweeps.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, RiskError};
use crate::functions::{AdjustmentGrid, DeviationWeight, DistortionFunction, LossFunction};
use crate::measures;
use crate::sample::{pointwise_meet_join, EmpiricalSample};

/// Violation threshold used throughout the empirical tests.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Probability that a sweep trial reorders part of `y` to follow `x`.
const COMONOTONE_PROB: f64 = 0.25;

#[derive(Debug, Clone)]
pub enum MeasureKind {
    VaR(f64),
    ES(f64),
    AES(AdjustmentGrid),
    Distortion(DistortionFunction),
    ExpectedLoss(LossFunction),
    CE(LossFunction),
    Shortfall(LossFunction),
    OCE(LossFunction),
    MMD(DeviationWeight, DistortionFunction),
}

/// A configured risk functional plus a display label.
#[derive(Debug, Clone)]
pub struct RiskMeasureSpec {
    pub kind: MeasureKind,
    pub label: String,
}

impl RiskMeasureSpec {
    pub fn new(kind: MeasureKind) -> Result<Self> {
        let label = match &kind {
            MeasureKind::VaR(p) => {
                check_open_level(*p)?;
                format!("VaR({p})")
            }
            MeasureKind::ES(p) => {
                check_open_level(*p)?;
                format!("ES({p})")
            }
            MeasureKind::AES(g) => format!("AES({g})"),
            MeasureKind::Distortion(phi) => {
                phi.validate()?;
                format!("Distortion({phi})")
            }
            MeasureKind::ExpectedLoss(l) => format!("EL({l})"),
            MeasureKind::CE(l) => {
                if !l.strictly_increasing {
                    return Err(domain(format!("CE needs a strictly increasing loss, got `{l}`")));
                }
                format!("CE({l})")
            }
            MeasureKind::Shortfall(l) => {
                if !(l.strictly_increasing && l.convex) {
                    return Err(domain(format!(
                        "shortfall needs a strictly increasing convex loss, got `{l}`"
                    )));
                }
                format!("Shortfall({l})")
            }
            MeasureKind::OCE(l) => {
                if !l.convex {
                    return Err(domain(format!("OCE needs a convex loss, got `{l}`")));
                }
                format!("OCE({l})")
            }
            MeasureKind::MMD(g, phi) => {
                if !phi.concave {
                    return Err(domain(format!("MMD needs a concave distortion, got `{phi}`")));
                }
                format!("MMD({g}/{phi})")
            }
        };
        Ok(Self { kind, label })
    }

    pub fn var(p: f64) -> Result<Self> {
        Self::new(MeasureKind::VaR(p))
    }

    pub fn es(p: f64) -> Result<Self> {
        Self::new(MeasureKind::ES(p))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_var(&self) -> bool {
        matches!(self.kind, MeasureKind::VaR(_))
    }

    /// Compact parameter description for report files.
    pub fn params(&self) -> String {
        match &self.kind {
            MeasureKind::VaR(p) | MeasureKind::ES(p) => format!("p={p}"),
            MeasureKind::AES(g) => format!("grid={g}"),
            MeasureKind::Distortion(phi) => format!("phi={phi}"),
            MeasureKind::ExpectedLoss(l)
            | MeasureKind::CE(l)
            | MeasureKind::Shortfall(l)
            | MeasureKind::OCE(l) => format!("loss={l}"),
            MeasureKind::MMD(g, phi) => format!("g={g};phi={phi}"),
        }
    }

    pub fn evaluate(&self, x: &EmpiricalSample) -> Result<f64> {
        match &self.kind {
            MeasureKind::VaR(p) => measures::var_historical(x, *p),
            MeasureKind::ES(p) => measures::es_historical(x, *p),
            MeasureKind::AES(g) => measures::aes(x, g),
            MeasureKind::Distortion(phi) => Ok(measures::distortion_rho(x, phi)),
            MeasureKind::ExpectedLoss(l) => Ok(measures::expected_loss(x, l)),
            MeasureKind::CE(l) => measures::certainty_equivalent(x, l),
            MeasureKind::Shortfall(l) => measures::shortfall_rho(x, l),
            MeasureKind::OCE(l) => measures::oce(x, l),
            MeasureKind::MMD(g, phi) => measures::mmd_rho(x, g, phi),
        }
    }
}

fn check_open_level(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("confidence level must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// Parses `var:p`, `es:p`, `aes:l@g,l@g`, `distortion:<phi>`, `el:<loss>`,
/// `ce:<loss>`, `shortfall:<loss>`, `oce:<loss>` or `mmd:<g>/<phi>`.
impl FromStr for RiskMeasureSpec {
    type Err = RiskError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| RiskError::Spec(format!("measure `{s}` must look like kind:params")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| RiskError::Spec(format!("bad level `{v}` in `{s}`")))
        };
        let kind = match head {
            "var" => MeasureKind::VaR(num(rest)?),
            "es" => MeasureKind::ES(num(rest)?),
            "aes" => MeasureKind::AES(AdjustmentGrid::parse(rest)?),
            "distortion" => MeasureKind::Distortion(DistortionFunction::parse(rest)?),
            "el" => MeasureKind::ExpectedLoss(LossFunction::parse(rest)?),
            "ce" => MeasureKind::CE(LossFunction::parse(rest)?),
            "shortfall" => MeasureKind::Shortfall(LossFunction::parse(rest)?),
            "oce" => MeasureKind::OCE(LossFunction::parse(rest)?),
            "mmd" => {
                let (g, phi) = rest
                    .split_once('/')
                    .ok_or_else(|| RiskError::Spec(format!("mmd expects `g/phi`, got `{rest}`")))?;
                MeasureKind::MMD(DeviationWeight::parse(g)?, DistortionFunction::parse(phi)?)
            }
            other => return Err(RiskError::Spec(format!("unknown measure kind `{other}`"))),
        };
        Self::new(kind)
    }
}

/// Outcome of one lattice or portfolio test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub gap: f64,
    pub violated: bool,
    pub epsilon: f64,
}

impl GapResult {
    pub fn from_gap(gap: f64, epsilon: f64) -> Self {
        Self {
            gap,
            violated: gap < -epsilon,
            epsilon,
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) {
        return Err(domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    Ok(())
}

/// `ρ(x) + ρ(y) − ρ(x∧y) − ρ(x∨y)`; negative beyond `epsilon` is a violation.
///
/// The two outer and two inner terms are summed separately so that swapping
/// `x` and `y` reproduces the gap bit for bit.
pub fn submodularity_gap(
    spec: &RiskMeasureSpec,
    x: &EmpiricalSample,
    y: &EmpiricalSample,
    epsilon: f64,
) -> Result<GapResult> {
    check_epsilon(epsilon)?;
    let (meet, join) = pointwise_meet_join(x, y)?;
    debug_assert!(meet
        .as_slice()
        .iter()
        .zip(join.as_slice())
        .zip(x.as_slice().iter().zip(y.as_slice()))
        .all(|((m, j), (a, b))| m + j == a + b));
    let outer = spec.evaluate(x)? + spec.evaluate(y)?;
    let inner = spec.evaluate(&meet)? + spec.evaluate(&join)?;
    Ok(GapResult::from_gap(outer - inner, epsilon))
}

/// `ρ(x) + ρ(y) − ρ(x+y)`; negative beyond `epsilon` is a violation.
pub fn subadditivity_gap(
    spec: &RiskMeasureSpec,
    x: &EmpiricalSample,
    y: &EmpiricalSample,
    epsilon: f64,
) -> Result<GapResult> {
    check_epsilon(epsilon)?;
    let sum = x.sum_with(y)?;
    let gap = spec.evaluate(x)? + spec.evaluate(y)? - spec.evaluate(&sum)?;
    Ok(GapResult::from_gap(gap, epsilon))
}

/// Fraction of violated results.
pub fn violation_rate(results: &[GapResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(domain("violation rate of an empty result list"));
    }
    let v = results.iter().filter(|r| r.violated).count();
    Ok(v as f64 / results.len() as f64)
}

/// Distribution of sweep entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairGenerator {
    /// i.i.d. standard normal entries
    Gaussian,
    /// normal / sqrt(uniform) ratio entries
    HeavyTail,
    /// entries drawn uniformly from {0, 1}
    TwoPoint,
    /// entries drawn uniformly from {0, 1, 2}
    ThreePoint,
}

impl PairGenerator {
    fn draw<R: Rng>(self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| match self {
                Self::Gaussian => rng.sample::<f64, _>(StandardNormal),
                Self::HeavyTail => {
                    let z: f64 = rng.sample(StandardNormal);
                    let u: f64 = 1.0 - rng.random::<f64>();
                    z / u.sqrt()
                }
                Self::TwoPoint => f64::from(rng.random_range(0..2u8)),
                Self::ThreePoint => f64::from(rng.random_range(0..3u8)),
            })
            .collect()
    }
}

impl fmt::Display for PairGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::HeavyTail => "heavy_tail",
            Self::TwoPoint => "two_point",
            Self::ThreePoint => "three_point",
        })
    }
}

impl FromStr for PairGenerator {
    type Err = RiskError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Self::Gaussian),
            "heavy_tail" | "heavy-tail" => Ok(Self::HeavyTail),
            "two_point" | "two-point" => Ok(Self::TwoPoint),
            "three_point" | "three-point" => Ok(Self::ThreePoint),
            other => Err(RiskError::Spec(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub measure: String,
    pub generator: PairGenerator,
    pub n_atoms: usize,
    pub trials: usize,
    pub violations: usize,
    pub worst_gap: f64,
    pub worst_pair: (EmpiricalSample, EmpiricalSample),
    pub seed: u64,
    pub epsilon: f64,
}

/// The pair used by trial `trial` of a sweep with `seed`.
///
/// Each trial owns the ChaCha stream numbered by its index, so trials can run
/// in any order or in parallel and still see the same draws.
pub fn sweep_pair(
    seed: u64,
    trial: usize,
    n_atoms: usize,
    generator: PairGenerator,
) -> (EmpiricalSample, EmpiricalSample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let x = generator.draw(&mut rng, n_atoms);
    let mut y = generator.draw(&mut rng, n_atoms);
    if rng.random_bool(COMONOTONE_PROB) {
        comonotone_perturb(&mut rng, &x, &mut y);
    }
    (
        EmpiricalSample::new(x).expect("generated entries are finite"),
        EmpiricalSample::new(y).expect("generated entries are finite"),
    )
}

/// Rearranges `y` on a random subset of atoms so that it is ordered like `x`
/// there.
fn comonotone_perturb<R: Rng>(rng: &mut R, x: &[f64], y: &mut [f64]) {
    let n = x.len();
    let count = rng.random_range(2..=n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut chosen = idx[..count].to_vec();
    let mut vals: Vec<f64> = chosen.iter().map(|&i| y[i]).collect();
    vals.sort_by(f64::total_cmp);
    chosen.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    for (i, v) in chosen.into_iter().zip(vals) {
        y[i] = v;
    }
}

/// Seeded brute-force search for submodularity violations.
pub fn random_pair_sweep(
    spec: &RiskMeasureSpec,
    n_atoms: usize,
    trials: usize,
    seed: u64,
    generator: PairGenerator,
    epsilon: f64,
) -> Result<SweepReport> {
    if n_atoms < 3 {
        return Err(domain(format!("sweeps need at least 3 atoms, got {n_atoms}")));
    }
    if trials == 0 {
        return Err(domain("sweeps need at least one trial"));
    }
    check_epsilon(epsilon)?;
    let gaps: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (x, y) = sweep_pair(seed, t, n_atoms, generator);
            submodularity_gap(spec, &x, &y, epsilon).map(|r| r.gap)
        })
        .collect::<Result<_>>()?;
    let mut violations = 0;
    let mut worst = (0, f64::INFINITY);
    for (t, &g) in gaps.iter().enumerate() {
        if g < -epsilon {
            violations += 1;
        }
        if g < worst.1 {
            worst = (t, g);
        }
    }
    Ok(SweepReport {
        measure: spec.label.clone(),
        generator,
        n_atoms,
        trials,
        violations,
        worst_gap: worst.1,
        worst_pair: sweep_pair(seed, worst.0, n_atoms, generator),
        seed,
        epsilon,
    })
}
