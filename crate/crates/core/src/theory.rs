//! Numerical checks of the curvature criterion for shortfall risk and the
//! explicit lattice counterexamples for AES, mean-deviation, shortfall with a
//! kinked loss, and certainty equivalents with a non-convex loss.
//!
//! Every grid-based verdict here is relative to the grid it was computed on;
//! the grid bounds are carried along in the result.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, RiskError};
use crate::functions::{AdjustmentGrid, DeviationWeight, DistortionFunction, LossFunction};
use crate::lattice::{submodularity_gap, MeasureKind, RiskMeasureSpec};
use crate::measures::{certainty_equivalent, es_historical, shortfall_rho};
use crate::sample::{pointwise_meet_join, EmpiricalSample};

/// Central-difference step used when analytic derivatives are absent.
pub const FD_STEP: f64 = 1e-5;
/// Curvature magnitude treated as infinite.
pub const KINK_THRESHOLD: f64 = 1e6;
const FEASIBILITY_TOL: f64 = 1e-9;

/// `R = ℓ″/ℓ′`, its grid minimum `L`, `S = ℓ′` and `h = S·(R − 2L)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub loss: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub grid: Vec<f64>,
    pub r_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub h_values: Vec<f64>,
    /// grid minimum of `R`, excluding kink points
    pub l_min: f64,
    /// grid points where `R` is effectively infinite
    pub kinks: Vec<f64>,
    pub finite_differences: bool,
}

fn curvature_at(ell: &LossFunction, x: f64) -> (f64, f64, bool) {
    let s = ell.deriv1(x, FD_STEP);
    let d2 = ell.deriv2(x, FD_STEP);
    let mut r = d2 / s;
    if ell.has_analytic_derivatives() {
        return (s, r, r.abs() > KINK_THRESHOLD);
    }
    // second differences of a locally linear ℓ are pure rounding noise
    let scale = ell.eval(x).abs() + ell.eval(x + FD_STEP).abs() + ell.eval(x - FD_STEP).abs();
    let noise = 8.0 * f64::EPSILON * scale / (FD_STEP * FD_STEP) / s.abs();
    if r.abs() <= noise {
        r = 0.0;
    }
    // A kink shows up as a second difference that scales like 1/step.
    let fine = ell.deriv2(x, FD_STEP / 4.0) / ell.deriv1(x, FD_STEP / 4.0);
    let diverging = r.abs() > 1e3 && fine.abs() > 2.0 * r.abs();
    (s, r, diverging || r.abs() > KINK_THRESHOLD)
}

pub fn curvature_profile(ell: &LossFunction, lo: f64, hi: f64, step: f64) -> Result<CurvatureProfile> {
    if !(lo < hi && step > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(domain(format!("invalid grid [{lo}, {hi}] with step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|i| {
            let x = lo + i as f64 * step;
            if x.abs() < step * 1e-6 {
                0.0
            } else {
                x
            }
        })
        .collect();

    let mut s_values = Vec::with_capacity(count);
    let mut r_values = Vec::with_capacity(count);
    let mut kinks = Vec::new();
    let mut kink_mask = Vec::with_capacity(count);
    for &x in &grid {
        let (s, r, kink) = curvature_at(ell, x);
        if !(s > 0.0) {
            return Err(domain(format!(
                "ℓ′({x}) = {s} <= 0: `{ell}` is not strictly increasing on the grid"
            )));
        }
        if ell.convex && r < -1e-12 && !kink {
            return Err(RiskError::Numeric(format!(
                "negative curvature R({x}) = {r} for convex `{ell}`"
            )));
        }
        if kink {
            kinks.push(x);
        }
        kink_mask.push(kink);
        s_values.push(s);
        r_values.push(r);
    }
    let l_min = r_values
        .iter()
        .zip(&kink_mask)
        .filter(|(_, &k)| !k)
        .map(|(&r, _)| r)
        .fold(f64::INFINITY, f64::min);
    let h_values = s_values
        .iter()
        .zip(&r_values)
        .zip(&kink_mask)
        .map(|((&s, &r), &k)| if k { f64::INFINITY } else { s * (r - 2.0 * l_min) })
        .collect();
    Ok(CurvatureProfile {
        loss: ell.name().to_string(),
        lo,
        hi,
        step,
        grid,
        r_values,
        s_values,
        h_values,
        l_min,
        kinks,
        finite_differences: !ell.has_analytic_derivatives(),
    })
}

/// Result of testing `h(x) <= λ·ℓ(x)` on the profile grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub loss: String,
    pub feasible: bool,
    /// `(α⁺, α⁻)`; `None` on a side with no grid points is reported as ∓∞
    pub alpha_plus: Option<f64>,
    pub alpha_minus: Option<f64>,
    /// `[α⁺, α⁻]` when feasible
    pub lambda_interval: Option<(f64, f64)>,
    pub h_at_zero: f64,
    /// grid version of `sup R <= 2 inf R`
    pub sufficient_condition_holds: bool,
    pub r_max: f64,
    pub r_min: f64,
    pub witnesses: Vec<f64>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_step: f64,
    pub one_sided: bool,
}

pub fn linear_dominance_check(profile: &CurvatureProfile, ell: &LossFunction) -> Result<DominanceVerdict> {
    let zero = profile
        .grid
        .iter()
        .position(|&x| x == 0.0)
        .ok_or_else(|| domain("curvature grid must contain 0"))?;
    let ell_vals: Vec<f64> = profile.grid.iter().map(|&x| ell.eval(x) - ell.eval(0.0)).collect();

    let mut alpha_plus: Option<f64> = None;
    let mut alpha_minus: Option<f64> = None;
    for (&h, &l) in profile.h_values.iter().zip(&ell_vals) {
        if l > 0.0 {
            let q = h / l;
            alpha_plus = Some(alpha_plus.map_or(q, |a| a.max(q)));
        } else if l < 0.0 {
            let q = h / l;
            alpha_minus = Some(alpha_minus.map_or(q, |a| a.min(q)));
        }
    }
    let a_plus = alpha_plus.unwrap_or(f64::NEG_INFINITY);
    let a_minus = alpha_minus.unwrap_or(f64::INFINITY);
    let h0 = profile.h_values[zero];
    let feasible = a_plus <= a_minus + FEASIBILITY_TOL && h0 <= FEASIBILITY_TOL;

    let finite_r = || profile.r_values.iter().copied().filter(|r| r.abs() <= KINK_THRESHOLD);
    let r_max = if profile.kinks.is_empty() {
        finite_r().fold(f64::NEG_INFINITY, f64::max)
    } else {
        f64::INFINITY
    };
    let r_min = profile.l_min;
    let sufficient = r_max <= 2.0 * r_min + FEASIBILITY_TOL;

    let witnesses = if feasible {
        Vec::new()
    } else {
        dominance_witnesses(profile, &ell_vals, a_plus, a_minus)
    };

    Ok(DominanceVerdict {
        loss: profile.loss.clone(),
        feasible,
        alpha_plus,
        alpha_minus,
        lambda_interval: feasible.then_some((a_plus, a_minus)),
        h_at_zero: h0,
        sufficient_condition_holds: sufficient,
        r_max,
        r_min,
        witnesses,
        grid_lo: profile.lo,
        grid_hi: profile.hi,
        grid_step: profile.step,
        one_sided: alpha_plus.is_none() || alpha_minus.is_none(),
    })
}

/// Up to three grid points violating `h <= λℓ` for every tested `λ`; falls
/// back to the points attaining `α⁺` and `α⁻` when no single point defeats
/// all of them.
fn dominance_witnesses(profile: &CurvatureProfile, ell_vals: &[f64], a_plus: f64, a_minus: f64) -> Vec<f64> {
    let mut lambdas: Vec<f64> = vec![0.0];
    for v in [a_plus, a_minus, 0.5 * (a_plus + a_minus)] {
        if v.is_finite() {
            lambdas.push(v);
        }
    }
    let all: Vec<f64> = profile
        .grid
        .iter()
        .zip(profile.h_values.iter().zip(ell_vals))
        .filter(|(_, (&h, &l))| lambdas.iter().all(|&lam| h > lam * l + FEASIBILITY_TOL))
        .map(|(&x, _)| x)
        .take(3)
        .collect();
    if !all.is_empty() {
        return all;
    }
    let mut out = Vec::new();
    for (target, positive) in [(a_plus, true), (a_minus, false)] {
        if let Some(i) = profile
            .h_values
            .iter()
            .zip(ell_vals)
            .position(|(&h, &l)| (if positive { l > 0.0 } else { l < 0.0 }) && h / l == target)
        {
            out.push(profile.grid[i]);
        }
    }
    out
}

/// The lattice pair from the AES proof and the predicted ES gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AesCounterexample {
    pub x: EmpiricalSample,
    pub y: EmpiricalSample,
    pub predicted_gap: f64,
    pub q: f64,
    pub p1: f64,
}

impl AesCounterexample {
    /// `ES_{p1}(x∨y) − ES_{p1}(x)`, which tends to `predicted_gap`.
    pub fn measured_gap(&self) -> Result<f64> {
        let (_, join) = pointwise_meet_join(&self.x, &self.y)?;
        Ok(es_at(&join, self.p1)? - es_at(&self.x, self.p1)?)
    }

    /// Two-level grid from the proof: penalties equal `ES_{p1}(x)` at `p1`
    /// and `ES_q(x)` at `q`, so `ES^g(x) = ES^g(y) = 0`.
    pub fn proof_grid(&self) -> Result<AdjustmentGrid> {
        AdjustmentGrid::new(
            vec![self.p1, self.q],
            vec![es_at(&self.x, self.p1)?, es_at(&self.x, self.q)?],
        )
    }

    /// `ES^g(x∨y) + ES^g(x∧y) − ES^g(x) − ES^g(y)` for [`Self::proof_grid`].
    pub fn aes_deficit(&self) -> Result<f64> {
        let spec = RiskMeasureSpec::new(MeasureKind::AES(self.proof_grid()?))?;
        Ok(-submodularity_gap(&spec, &self.x, &self.y, 0.0)?.gap)
    }
}

fn es_at(x: &EmpiricalSample, p: f64) -> Result<f64> {
    if p == 0.0 {
        Ok(x.mean())
    } else {
        es_historical(x, p)
    }
}

/// Discretizes `X = 2aU + b − a` and `Y = 2aV + b − a` with
/// `V = U·𝟙{U≥q} + (q−U)·𝟙{U<q}` on atoms `uᵢ = (i − ½)/n`.
pub fn aes_counterexample(a: f64, b: f64, q: f64, p1: f64, n_atoms: usize) -> Result<AesCounterexample> {
    if !(a > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(domain(format!("need a > 0 and finite b, got a={a}, b={b}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("q must lie in (0, 1), got {q}")));
    }
    if !(p1 >= 0.0 && p1 < q) {
        return Err(domain(format!("p1 must lie in [0, q), got {p1}")));
    }
    let nf = n_atoms as f64;
    if q * nf < 2.0 || (p1 > 0.0 && p1 * nf < 2.0) {
        return Err(domain(format!(
            "n_atoms = {n_atoms} too small for q = {q}, p1 = {p1}"
        )));
    }
    let u: Vec<f64> = (1..=n_atoms).map(|i| (i as f64 - 0.5) / nf).collect();
    let x: Vec<f64> = u.iter().map(|&u| 2.0 * a * u + b - a).collect();
    let qn = q * nf;
    let y: Vec<f64> = if (qn - qn.round()).abs() < 1e-9 {
        // reflection below q maps atom i to atom qn − i + 1, so y is an exact
        // rearrangement of x
        let m = qn.round() as usize;
        (0..n_atoms).map(|i| if i < m { x[m - 1 - i] } else { x[i] }).collect()
    } else {
        u.iter()
            .map(|&u| {
                let v = if u >= q { u } else { q - u };
                2.0 * a * v + b - a
            })
            .collect()
    };
    Ok(AesCounterexample {
        x: EmpiricalSample::new(x)?,
        y: EmpiricalSample::new(y)?,
        predicted_gap: a * (q - p1).powi(2) / (2.0 * (1.0 - p1)),
        q,
        p1,
    })
}

/// The nested-event pair from the mean-deviation proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmdCounterexample {
    pub x: EmpiricalSample,
    pub y: EmpiricalSample,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// the point where `g` is strictly convex
    pub pivot: f64,
    pub scale: f64,
}

fn psi(phi: &DistortionFunction, t: f64) -> f64 {
    phi.eval(t) - t
}

fn nonlinearity_point(g: &DeviationWeight) -> Option<f64> {
    [1.0, 0.5, 2.0, 0.25, 4.0, 0.1, 10.0, 0.01, 100.0]
        .into_iter()
        .find(|&x| {
            let d = 0.5 * x;
            let lhs = g.eval(x - d) + g.eval(x + d);
            let rhs = 2.0 * g.eval(x);
            lhs - rhs > 1e-10 * (1.0 + rhs.abs())
        })
}

fn check_mmd_inputs(phi: &DistortionFunction, g: &DeviationWeight, n_atoms: usize) -> Result<f64> {
    if !phi.concave {
        return Err(domain(format!("distortion `{phi}` must be concave")));
    }
    if phi.is_identity() {
        return Err(domain("identity distortion: the deviation term vanishes, no counterexample exists"));
    }
    if g.linear {
        return Err(domain(format!("deviation weight `{g}` is linear, no counterexample exists")));
    }
    if n_atoms < 3 {
        return Err(domain("need at least 3 atoms"));
    }
    nonlinearity_point(g)
        .ok_or_else(|| RiskError::Search(format!("no point of strict convexity found for `{g}`")))
}

/// Builds `X = m(𝟙_A + 𝟙_C)/2`, `Y = m𝟙_B` for a given triple `p < q < r`
/// of atom-grid levels, with `A ⊆ B ⊆ C` the first `pn`, `qn`, `rn` atoms.
pub fn mmd_counterexample_with_triple(
    phi: &DistortionFunction,
    g: &DeviationWeight,
    n_atoms: usize,
    (p, q, r): (f64, f64, f64),
) -> Result<MmdCounterexample> {
    let pivot = check_mmd_inputs(phi, g, n_atoms)?;
    let nf = n_atoms as f64;
    let on_grid = |t: f64| {
        let k = (t * nf).round();
        ((t * nf - k).abs() < 1e-9 && k >= 1.0 && k < nf).then_some(k as usize)
    };
    let (ka, kb, kc) = match (on_grid(p), on_grid(q), on_grid(r)) {
        (Some(a), Some(b), Some(c)) if a < b && b < c => (a, b, c),
        _ => {
            return Err(domain(format!(
                "({p}, {q}, {r}) must be increasing multiples of 1/{n_atoms} inside (0, 1)"
            )))
        }
    };
    let (pa, pb, pc) = (ka as f64 / nf, kb as f64 / nf, kc as f64 / nf);
    let (sp, sq, sr) = (psi(phi, pa), psi(phi, pb), psi(phi, pc));
    let tol = 1e-9;
    if !(sp > sq + tol && sq > sr + tol && (sp + sr - 2.0 * sq).abs() <= tol) {
        return Err(domain(format!(
            "ψ = ({sp}, {sq}, {sr}) must be strictly decreasing with ψ(p)+ψ(r) = 2ψ(q)"
        )));
    }
    let scale = pivot / sq;
    let x = (0..n_atoms)
        .map(|i| {
            let mut v = 0.0;
            if i < ka {
                v += 0.5 * scale;
            }
            if i < kc {
                v += 0.5 * scale;
            }
            v
        })
        .collect();
    let y = (0..n_atoms).map(|i| if i < kb { scale } else { 0.0 }).collect();
    Ok(MmdCounterexample {
        x: EmpiricalSample::new(x)?,
        y: EmpiricalSample::new(y)?,
        p: pa,
        q: pb,
        r: pc,
        pivot,
        scale,
    })
}

/// Searches the atom grid for a triple and builds the pair.
///
/// `q` is scanned upward over `j/n`; for each candidate `p < q` with
/// `ψ(p) > ψ(q)`, `r` solving `ψ(p) + ψ(r) = 2ψ(q)` is located by bisection
/// on `(q, 1)` and accepted when it lands on the atom grid.
pub fn mmd_counterexample(
    phi: &DistortionFunction,
    g: &DeviationWeight,
    n_atoms: usize,
) -> Result<MmdCounterexample> {
    check_mmd_inputs(phi, g, n_atoms)?;
    let nf = n_atoms as f64;
    let mut tried = 0usize;
    for j in 2..n_atoms - 1 {
        let q = j as f64 / nf;
        let sq = psi(phi, q);
        for i in 1..j {
            let p = i as f64 / nf;
            let sp = psi(phi, p);
            if !(sp > sq + 1e-12) {
                continue;
            }
            let target = 2.0 * sq - sp;
            if target <= 0.0 {
                continue;
            }
            tried += 1;
            // ψ(r) − target is decreasing on the descending branch of ψ
            let mut lo = q;
            let mut hi = 1.0;
            if psi(phi, lo) < target {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if psi(phi, mid) >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            let k = (r * nf).round();
            if (r * nf - k).abs() < 1e-6 && k > j as f64 && k < nf {
                let r = k / nf;
                if let Ok(ce) = mmd_counterexample_with_triple(phi, g, n_atoms, (p, q, r)) {
                    return Ok(ce);
                }
            }
        }
    }
    Err(RiskError::Search(format!(
        "no (p, q, r) on the 1/{n_atoms} grid satisfies ψ(p) > ψ(q) > ψ(r) and ψ(p)+ψ(r) = 2ψ(q) for `{phi}` ({tried} candidates tried)"
    )))
}

/// Shortfall values on the 3-atom jump construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpDeficit {
    pub h: f64,
    /// `Δ_h / h` with `Δ_h = m(x) + m(y) − m(x∨y) − m(x∧y)`
    pub measured_ratio: f64,
    /// `β + γ − α − 1`
    pub limit_ratio: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Evaluates the kink counterexample for `ℓ(x) = s₋x` (x ≤ 0), `s₊x` (x > 0)
/// with `x = (−2h, −h, 0)` and `y = (−h, −h, −h)`.
pub fn shortfall_jump_deficit(s_minus: f64, s_plus: f64, h: f64) -> Result<JumpDeficit> {
    if !(s_minus > 0.0 && s_plus >= s_minus && h > 0.0 && h.is_finite() && s_plus.is_finite()) {
        return Err(domain(format!(
            "need 0 < s- <= s+ and h > 0, got s-={s_minus}, s+={s_plus}, h={h}"
        )));
    }
    let ell = LossFunction::piecewise(s_minus, s_plus)?;
    let x = EmpiricalSample::new(vec![-2.0 * h, -h, 0.0])?;
    let y = EmpiricalSample::new(vec![-h, -h, -h])?;
    let (meet, join) = pointwise_meet_join(&x, &y)?;
    let m = |s: &EmpiricalSample| shortfall_rho(s, &ell);
    let delta = m(&x)? + m(&y)? - m(&join)? - m(&meet)?;
    let alpha = 3.0 * s_minus / (2.0 * s_minus + s_plus);
    let beta = 2.0 * s_minus / (2.0 * s_minus + s_plus);
    let gamma = 2.0 * (s_minus + s_plus) / (s_minus + 2.0 * s_plus);
    let limit = s_minus * (s_minus - s_plus) / ((s_minus + 2.0 * s_plus) * (2.0 * s_minus + s_plus));
    Ok(JumpDeficit {
        h,
        measured_ratio: delta / h,
        limit_ratio: limit,
        alpha,
        beta,
        gamma,
    })
}

/// Two-atom pair `X = (x, y)`, `Y = (y, x)` with `x > y` violating
/// submodularity of the certainty equivalent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CeCounterexample {
    pub x: EmpiricalSample,
    pub y: EmpiricalSample,
    /// `CE(x∨y) + CE(x∧y) − CE(x) − CE(y)`
    pub deficit: f64,
}

/// Scans pairs `lo <= b < a <= hi` on a uniform grid of `steps + 1` points
/// for a failure of midpoint concavity of `ℓ⁻¹`, which by the two-point
/// construction is a submodularity violation of `CE_ℓ`.
pub fn ce_two_point_counterexample(ell: &LossFunction, lo: f64, hi: f64, steps: usize) -> Result<CeCounterexample> {
    if !ell.strictly_increasing {
        return Err(domain(format!("`{ell}` must be strictly increasing")));
    }
    if !(lo < hi) || steps < 2 {
        return Err(domain("need lo < hi and at least 2 steps"));
    }
    let spec = RiskMeasureSpec::new(MeasureKind::CE(ell.clone()))?;
    let pts: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let mut best: Option<CeCounterexample> = None;
    for (i, &b) in pts.iter().enumerate() {
        for &a in &pts[i + 1..] {
            let x = EmpiricalSample::new(vec![a, b])?;
            let y = EmpiricalSample::new(vec![b, a])?;
            // CE of the constants a and b is exact; only CE(x) = CE(y) is solved
            let ce = certainty_equivalent(&x, ell)?;
            let deficit = a + b - 2.0 * ce;
            if deficit > 1e-8 && best.as_ref().is_none_or(|c| deficit > c.deficit) {
                let confirmed = -submodularity_gap(&spec, &x, &y, 0.0)?.gap;
                best = Some(CeCounterexample { x, y, deficit: confirmed });
            }
        }
    }
    best.ok_or_else(|| {
        RiskError::Search(format!(
            "no two-point violation for `{ell}` on [{lo}, {hi}] with {steps} steps"
        ))
    })
}
