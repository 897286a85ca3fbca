//! Function objects that parameterize the risk functionals: loss functions,
//! distortion functions, deviation weights and finite adjustment grids.
//!
//! Each carries a short textual name so that configurations round-trip
//! through CLI flags and report files. The `parse` constructors accept the
//! same names that `Display` produces.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, RiskError};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const SHAPE_GRID_LO: f64 = -5.0;
const SHAPE_GRID_HI: f64 = 5.0;
const SHAPE_GRID_POINTS: usize = 201;

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| RiskError::Spec(format!("cannot parse {what} from `{s}`")))
}

/// Increasing loss `ℓ` with optional analytic derivatives and declared shape.
#[derive(Clone)]
pub struct LossFunction {
    name: String,
    eval: RealFn,
    deriv1: Option<RealFn>,
    deriv2: Option<RealFn>,
    pub strictly_increasing: bool,
    pub convex: bool,
    pub normalized: bool,
}

impl fmt::Debug for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFunction")
            .field("name", &self.name)
            .field("strictly_increasing", &self.strictly_increasing)
            .field("convex", &self.convex)
            .field("normalized", &self.normalized)
            .finish()
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl LossFunction {
    /// Wraps an arbitrary closure. Declared flags are spot-checked on a grid
    /// over `[-5, 5]` and rejected when the closure contradicts them.
    pub fn custom<F>(
        name: impl Into<String>,
        eval: F,
        strictly_increasing: bool,
        convex: bool,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let eval: RealFn = Arc::new(eval);
        let normalized = eval(0.0).abs() <= 1e-12;
        let loss = Self {
            name: name.into(),
            eval,
            deriv1: None,
            deriv2: None,
            strictly_increasing,
            convex,
            normalized,
        };
        loss.check_flags()?;
        Ok(loss)
    }

    /// Attaches analytic first and second derivatives.
    pub fn with_derivatives<D1, D2>(mut self, d1: D1, d2: D2) -> Self
    where
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.deriv1 = Some(Arc::new(d1));
        self.deriv2 = Some(Arc::new(d2));
        self
    }

    fn builtin(
        name: String,
        eval: RealFn,
        d1: Option<RealFn>,
        d2: Option<RealFn>,
        strictly_increasing: bool,
        convex: bool,
    ) -> Self {
        let normalized = eval(0.0).abs() <= 1e-12;
        Self {
            name,
            eval,
            deriv1: d1,
            deriv2: d2,
            strictly_increasing,
            convex,
            normalized,
        }
    }

    /// `ℓ(x) = e^{γx} − 1`, the exponential-utility loss.
    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(domain(format!("exponential loss needs gamma > 0, got {gamma}")));
        }
        Ok(Self::builtin(
            format!("exp:{gamma}"),
            Arc::new(move |x| (gamma * x).exp_m1()),
            Some(Arc::new(move |x| gamma * (gamma * x).exp())),
            Some(Arc::new(move |x| gamma * gamma * (gamma * x).exp())),
            true,
            true,
        ))
    }

    /// `ℓ(x) = e^{γx}` without normalization.
    pub fn exponential_raw(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(domain(format!("exponential loss needs gamma > 0, got {gamma}")));
        }
        Ok(Self::builtin(
            format!("expraw:{gamma}"),
            Arc::new(move |x| (gamma * x).exp()),
            Some(Arc::new(move |x| gamma * (gamma * x).exp())),
            Some(Arc::new(move |x| gamma * gamma * (gamma * x).exp())),
            true,
            true,
        ))
    }

    /// `ℓ(x) = e^{2x} + e^x − 2`, curvature strictly between 1 and 2.
    pub fn poly2exp() -> Self {
        Self::builtin(
            "poly2exp".into(),
            Arc::new(|x| (2.0 * x).exp_m1() + x.exp_m1()),
            Some(Arc::new(|x| 2.0 * (2.0 * x).exp() + x.exp())),
            Some(Arc::new(|x| 4.0 * (2.0 * x).exp() + x.exp())),
            true,
            true,
        )
    }

    pub fn linear() -> Self {
        Self::builtin(
            "linear".into(),
            Arc::new(|x| x),
            Some(Arc::new(|_| 1.0)),
            Some(Arc::new(|_| 0.0)),
            true,
            true,
        )
    }

    /// Convex expectile loss `ℓ(x) = x + a·max{x, 0}`. Kinked at 0, so no
    /// analytic second derivative is attached.
    pub fn expectile(a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(domain(format!("expectile loss needs a >= 0, got {a}")));
        }
        Ok(Self::builtin(
            format!("expectile:{a}"),
            Arc::new(move |x| x + a * x.max(0.0)),
            None,
            None,
            true,
            true,
        ))
    }

    /// `ℓ(x) = s₋·x` for `x <= 0` and `s₊·x` for `x > 0`.
    ///
    /// With `s₋ = 0` this is the CVaR loss used in the OCE dual of ES; it is
    /// then increasing but not strictly.
    pub fn piecewise(s_minus: f64, s_plus: f64) -> Result<Self> {
        if !(s_minus >= 0.0 && s_plus >= s_minus && s_plus > 0.0 && s_plus.is_finite()) {
            return Err(domain(format!(
                "piecewise loss needs 0 <= s- <= s+ and s+ > 0, got ({s_minus}, {s_plus})"
            )));
        }
        Ok(Self::builtin(
            format!("piecewise:{s_minus},{s_plus}"),
            Arc::new(move |x| if x <= 0.0 { s_minus * x } else { s_plus * x }),
            None,
            None,
            s_minus > 0.0,
            true,
        ))
    }

    /// `ℓ(x) = x + c·max{x, 0}²`
    pub fn quadlin(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(domain(format!("quadlin loss needs c >= 0, got {c}")));
        }
        Ok(Self::builtin(
            format!("quadlin:{c}"),
            Arc::new(move |x| {
                let p = x.max(0.0);
                x + c * p * p
            }),
            Some(Arc::new(move |x| 1.0 + 2.0 * c * x.max(0.0))),
            Some(Arc::new(move |x| if x > 0.0 { 2.0 * c } else { 0.0 })),
            true,
            true,
        ))
    }

    /// `ℓ(x) = x²`, convex but not monotone.
    pub fn square() -> Self {
        Self::builtin(
            "square".into(),
            Arc::new(|x| x * x),
            Some(Arc::new(|x| 2.0 * x)),
            Some(Arc::new(|_| 2.0)),
            false,
            true,
        )
    }

    /// `ℓ(x) = x³ + x`, strictly increasing, concave on `x < 0`.
    pub fn cubic() -> Self {
        Self::builtin(
            "cubic".into(),
            Arc::new(|x| x * x * x + x),
            Some(Arc::new(|x| 3.0 * x * x + 1.0)),
            Some(Arc::new(|x| 6.0 * x)),
            true,
            false,
        )
    }

    /// Parses a named loss: `exp:γ`, `expraw:γ`, `poly2exp`, `linear`,
    /// `expectile:a`, `piecewise:s-,s+`, `quadlin:c`, `square`, `cubic`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let need = |what: &str| {
            arg.ok_or_else(|| RiskError::Spec(format!("loss `{head}` needs a parameter ({what})")))
        };
        match head {
            "exp" => Self::exponential(parse_f64(need("gamma")?, "gamma")?),
            "expraw" => Self::exponential_raw(parse_f64(need("gamma")?, "gamma")?),
            "poly2exp" => Ok(Self::poly2exp()),
            "linear" => Ok(Self::linear()),
            "expectile" => Self::expectile(parse_f64(need("a")?, "a")?),
            "piecewise" => {
                let raw = need("s-,s+")?;
                let (a, b) = raw
                    .split_once(',')
                    .ok_or_else(|| RiskError::Spec(format!("piecewise expects `s-,s+`, got `{raw}`")))?;
                Self::piecewise(parse_f64(a, "s-")?, parse_f64(b, "s+")?)
            }
            "quadlin" => Self::quadlin(parse_f64(need("c")?, "c")?),
            "square" => Ok(Self::square()),
            "cubic" => Ok(Self::cubic()),
            other => Err(RiskError::Spec(format!("unknown loss function `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.deriv1.is_some() && self.deriv2.is_some()
    }

    /// `ℓ′(x)`, analytic when available, otherwise a central difference with
    /// step `fd_step`.
    pub fn deriv1(&self, x: f64, fd_step: f64) -> f64 {
        match &self.deriv1 {
            Some(d) => d(x),
            None => (self.eval(x + fd_step) - self.eval(x - fd_step)) / (2.0 * fd_step),
        }
    }

    /// `ℓ″(x)`, analytic when available, otherwise a central second difference.
    pub fn deriv2(&self, x: f64, fd_step: f64) -> f64 {
        match &self.deriv2 {
            Some(d) => d(x),
            None => {
                (self.eval(x + fd_step) - 2.0 * self.eval(x) + self.eval(x - fd_step))
                    / (fd_step * fd_step)
            }
        }
    }

    /// `x ↦ ℓ(x) − ℓ(0)`; returns `self` unchanged when already normalized.
    pub fn normalized_copy(&self) -> Self {
        if self.normalized {
            return self.clone();
        }
        let base = self.eval(0.0);
        let inner = self.eval.clone();
        Self {
            name: self.name.clone(),
            eval: Arc::new(move |x| inner(x) - base),
            deriv1: self.deriv1.clone(),
            deriv2: self.deriv2.clone(),
            strictly_increasing: self.strictly_increasing,
            convex: self.convex,
            normalized: true,
        }
    }

    /// Spot-checks the declared shape flags on a grid.
    pub fn check_flags(&self) -> Result<()> {
        let step = (SHAPE_GRID_HI - SHAPE_GRID_LO) / (SHAPE_GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..SHAPE_GRID_POINTS)
            .map(|i| SHAPE_GRID_LO + i as f64 * step)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&x| self.eval(x)).collect();
        if self.strictly_increasing {
            if let Some(w) = vals.windows(2).position(|w| !(w[0] < w[1])) {
                return Err(domain(format!(
                    "loss `{}` declared strictly increasing but ℓ({}) >= ℓ({})",
                    self.name,
                    grid[w],
                    grid[w + 1]
                )));
            }
        }
        if self.convex {
            for i in 0..grid.len() {
                for j in (i + 2..grid.len()).step_by(7) {
                    let mid = self.eval(0.5 * (grid[i] + grid[j]));
                    let chord = 0.5 * (vals[i] + vals[j]);
                    if mid > chord + 1e-12 * (1.0 + chord.abs()) {
                        return Err(domain(format!(
                            "loss `{}` declared convex but fails midpoint test on [{}, {}]",
                            self.name, grid[i], grid[j]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Distortion `φ: [0,1] → [0,1]`, increasing with `φ(0) = 0` and `φ(1) = 1`.
#[derive(Clone)]
pub struct DistortionFunction {
    name: String,
    eval: RealFn,
    pub concave: bool,
}

impl fmt::Debug for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistortionFunction")
            .field("name", &self.name)
            .field("concave", &self.concave)
            .finish()
    }
}

impl fmt::Display for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn check_level(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(domain(format!("confidence level must lie in [0, 1), got {p}")));
    }
    Ok(())
}

impl DistortionFunction {
    /// Wraps a closure and validates endpoints, monotonicity and (when
    /// flagged) concavity on a grid of `[0, 1]`.
    pub fn custom<F>(name: impl Into<String>, eval: F, concave: bool) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let phi = Self {
            name: name.into(),
            eval: Arc::new(eval),
            concave,
        };
        phi.validate()?;
        Ok(phi)
    }

    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            eval: Arc::new(|t| t.clamp(0.0, 1.0)),
            concave: true,
        }
    }

    /// ES distortion `φ(t) = min{t/(1−p), 1}`.
    pub fn expected_shortfall(p: f64) -> Result<Self> {
        check_level(p)?;
        let tail = 1.0 - p;
        Ok(Self {
            name: format!("es:{p}"),
            eval: Arc::new(move |t| (t / tail).clamp(0.0, 1.0)),
            concave: true,
        })
    }

    /// VaR distortion `φ(t) = 𝟙{t ≥ 1−p}`. The closed indicator puts the
    /// unit Choquet weight on `L_(k)` with `k = n(1−p)` when that is an
    /// integer, matching the historical VaR estimator.
    pub fn value_at_risk(p: f64) -> Result<Self> {
        check_level(p)?;
        let tail = 1.0 - p;
        Ok(Self {
            name: format!("var:{p}"),
            eval: Arc::new(move |t| {
                if t <= 0.0 {
                    0.0
                } else if t >= tail - 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }),
            concave: false,
        })
    }

    /// Power distortion `φ(t) = t^θ`, concave for `θ <= 1`.
    pub fn power(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(domain(format!("power distortion needs theta > 0, got {theta}")));
        }
        Ok(Self {
            name: format!("pow:{theta}"),
            eval: Arc::new(move |t| t.clamp(0.0, 1.0).powf(theta)),
            concave: theta <= 1.0,
        })
    }

    /// Parses `identity`, `es:p`, `var:p` or `pow:θ`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        match spec.split_once(':') {
            None if spec == "identity" => Ok(Self::identity()),
            Some(("es", p)) => Self::expected_shortfall(parse_f64(p, "level")?),
            Some(("var", p)) => Self::value_at_risk(parse_f64(p, "level")?),
            Some(("pow", t)) => Self::power(parse_f64(t, "theta")?),
            _ => Err(RiskError::Spec(format!("unknown distortion `{spec}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn is_identity(&self) -> bool {
        (1..100).all(|i| {
            let t = i as f64 / 100.0;
            (self.eval(t) - t).abs() <= 1e-12
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval(0.0) != 0.0 || self.eval(1.0) != 1.0 {
            return Err(domain(format!(
                "distortion `{}` must satisfy φ(0)=0 and φ(1)=1",
                self.name
            )));
        }
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain(format!("distortion `{}` is not increasing", self.name)));
        }
        if self.concave {
            for i in 0..grid.len() {
                for j in (i + 2..grid.len()).step_by(3) {
                    let mid = self.eval(0.5 * (grid[i] + grid[j]));
                    if mid < 0.5 * (vals[i] + vals[j]) - 1e-12 {
                        return Err(domain(format!(
                            "distortion `{}` declared concave but fails midpoint test",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Deviation weight `g: [0,∞) → [0,∞)` of a mean-deviation measure.
#[derive(Clone)]
pub struct DeviationWeight {
    name: String,
    eval: RealFn,
    pub convex: bool,
    pub linear: bool,
}

impl fmt::Debug for DeviationWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeviationWeight")
            .field("name", &self.name)
            .field("linear", &self.linear)
            .finish()
    }
}

impl fmt::Display for DeviationWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl DeviationWeight {
    pub fn custom<F>(name: impl Into<String>, eval: F, linear: bool) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let g = Self {
            name: name.into(),
            eval: Arc::new(eval),
            convex: true,
            linear,
        };
        g.validate()?;
        Ok(g)
    }

    /// `g(t) = t`
    pub fn identity() -> Self {
        Self {
            name: "linear".into(),
            eval: Arc::new(|t| t),
            convex: true,
            linear: true,
        }
    }

    /// `g(t) = t²`
    pub fn square() -> Self {
        Self {
            name: "square".into(),
            eval: Arc::new(|t| t * t),
            convex: true,
            linear: false,
        }
    }

    /// `g(t) = t^k` for `k >= 1`.
    pub fn power(k: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(domain(format!("power weight needs k >= 1, got {k}")));
        }
        Ok(Self {
            name: format!("pow:{k}"),
            eval: Arc::new(move |t| t.max(0.0).powf(k)),
            convex: true,
            linear: k == 1.0,
        })
    }

    /// `g(t) = (e^{ct} − 1)/c`
    pub fn exponential(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(domain(format!("exponential weight needs c > 0, got {c}")));
        }
        Ok(Self {
            name: format!("exp:{c}"),
            eval: Arc::new(move |t| (c * t).exp_m1() / c),
            convex: true,
            linear: false,
        })
    }

    /// Parses `linear`, `square`, `pow:k` or `exp:c`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        match spec.split_once(':') {
            None if spec == "linear" => Ok(Self::identity()),
            None if spec == "square" => Ok(Self::square()),
            Some(("pow", k)) => Self::power(parse_f64(k, "k")?),
            Some(("exp", c)) => Self::exponential(parse_f64(c, "c")?),
            _ => Err(RiskError::Spec(format!("unknown deviation weight `{spec}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval(0.0) != 0.0 {
            return Err(domain(format!("deviation weight `{}` must have g(0)=0", self.name)));
        }
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain(format!("deviation weight `{}` is not increasing", self.name)));
        }
        if vals.iter().all(|&v| v == 0.0) {
            return Err(domain(format!("deviation weight `{}` is constant", self.name)));
        }
        if vals
            .windows(3)
            .any(|w| w[0] + w[2] < 2.0 * w[1] - 1e-12 * (1.0 + w[1].abs()))
        {
            return Err(domain(format!("deviation weight `{}` is not convex", self.name)));
        }
        Ok(())
    }
}

/// Finite restriction of an increasing penalty `g` to a grid of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentGrid {
    levels: Vec<f64>,
    penalties: Vec<f64>,
}

impl AdjustmentGrid {
    pub fn new(levels: Vec<f64>, penalties: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(domain("adjustment grid must contain at least one level"));
        }
        if levels.len() != penalties.len() {
            return Err(RiskError::Dimension {
                expected: levels.len(),
                actual: penalties.len(),
            });
        }
        for &p in &levels {
            check_level(p)?;
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("adjustment levels must be strictly increasing"));
        }
        if penalties.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(domain("adjustment penalties must be finite and nonnegative"));
        }
        if penalties.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain("adjustment penalties must be increasing along levels"));
        }
        Ok(Self { levels, penalties })
    }

    /// `max{ES_q, ES_p − c}` as a grid: levels `(q, p)`, penalties `(0, c)`.
    pub fn two_level(q: f64, p: f64, c: f64) -> Result<Self> {
        Self::new(vec![q, p], vec![0.0, c])
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.levels.iter().copied().zip(self.penalties.iter().copied())
    }

    /// Parses `level@penalty,level@penalty,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut levels = Vec::new();
        let mut penalties = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (l, g) = part
                .split_once('@')
                .ok_or_else(|| RiskError::Spec(format!("AES grid entry `{part}` must be level@penalty")))?;
            levels.push(parse_f64(l, "level")?);
            penalties.push(parse_f64(g, "penalty")?);
        }
        Self::new(levels, penalties)
    }
}

impl fmt::Display for AdjustmentGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(l, g)| format!("{l}@{g}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_losses_pass_their_flags() {
        for spec in [
            "exp:1", "exp:0.5", "expraw:1", "poly2exp", "linear", "expectile:1", "piecewise:1,2",
            "piecewise:0,4", "quadlin:0.5", "square", "cubic",
        ] {
            let l = LossFunction::parse(spec).unwrap();
            l.check_flags().unwrap_or_else(|e| panic!("{spec}: {e}"));
            assert_eq!(l.name(), spec);
        }
    }

    #[test]
    fn normalization_flags() {
        assert!(LossFunction::parse("exp:2").unwrap().normalized);
        let raw = LossFunction::parse("expraw:1").unwrap();
        assert!(!raw.normalized);
        let n = raw.normalized_copy();
        assert!(n.normalized);
        assert!(n.eval(0.0).abs() < 1e-15);
        assert!((n.eval(1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn custom_loss_flag_mismatch_rejected() {
        assert!(LossFunction::custom("neg", |x| -x, true, true).is_err());
        assert!(LossFunction::custom("concave", |x: f64| x - (-x).exp(), true, true).is_err());
        assert!(LossFunction::custom("ok", |x: f64| x + 0.1 * x * x.abs(), true, false).is_ok());
    }

    #[test]
    fn unknown_loss_rejected() {
        assert!(LossFunction::parse("foo").is_err());
        assert!(LossFunction::parse("exp").is_err());
        assert!(LossFunction::parse("exp:-1").is_err());
        assert!(LossFunction::parse("piecewise:2,1").is_err());
    }

    #[test]
    fn fd_derivatives_close_to_analytic() {
        let l = LossFunction::poly2exp();
        let plain = LossFunction::custom("p", |x: f64| (2.0 * x).exp() + x.exp() - 2.0, true, true).unwrap();
        for x in [-2.0, 0.0, 0.7] {
            assert!((plain.deriv1(x, 1e-5) - l.deriv1(x, 1e-5)).abs() < 1e-6);
            assert!((plain.deriv2(x, 1e-4) - l.deriv2(x, 1e-4)).abs() < 1e-4);
        }
    }

    #[test]
    fn distortions_validate() {
        for spec in ["identity", "es:0.6", "es:0", "var:0.9", "pow:0.5", "pow:2"] {
            DistortionFunction::parse(spec).unwrap().validate().unwrap();
        }
        assert!(DistortionFunction::identity().is_identity());
        assert!(!DistortionFunction::parse("es:0.5").unwrap().is_identity());
        assert!(DistortionFunction::custom("bad", |t| t * t, true).is_err());
        assert!(DistortionFunction::custom("off", |t| 0.5 * t, false).is_err());
    }

    #[test]
    fn deviation_weights_validate() {
        for spec in ["linear", "square", "pow:1.5", "exp:2"] {
            DeviationWeight::parse(spec).unwrap().validate().unwrap();
        }
        assert!(DeviationWeight::custom("const", |_| 0.0, false).is_err());
        assert!(DeviationWeight::custom("sqrt", |t: f64| t.sqrt(), false).is_err());
    }

    #[test]
    fn adjustment_grid_invariants() {
        let g = AdjustmentGrid::two_level(0.9, 0.98, 0.01).unwrap();
        assert_eq!(g.levels(), &[0.9, 0.98]);
        assert_eq!(g.to_string(), "0.9@0,0.98@0.01");
        assert_eq!(AdjustmentGrid::parse("0.9@0,0.98@0.01").unwrap(), g);
        assert!(AdjustmentGrid::new(vec![], vec![]).is_err());
        assert!(AdjustmentGrid::new(vec![0.9, 0.8], vec![0.0, 0.1]).is_err());
        assert!(AdjustmentGrid::new(vec![0.8, 0.9], vec![0.1, 0.0]).is_err());
        assert!(AdjustmentGrid::new(vec![1.0], vec![0.0]).is_err());
        assert!(AdjustmentGrid::new(vec![0.0], vec![0.0]).is_ok());
    }
}
