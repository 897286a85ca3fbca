//! One-dimensional solvers used by the implicit and optimized functionals.

use crate::error::{RiskError, Result};

pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;
pub const MAX_BRACKET_DOUBLINGS: usize = 60;
pub const SECTION_TOL: f64 = 1e-12;

/// Root of a decreasing function `f` starting from the bracket `[lo, hi]`.
///
/// The bracket is widened by doubling its half-width until `f(lo) >= 0 >=
/// f(hi)`, then bisected until its width falls below [`ROOT_TOL`] or the
/// midpoint stops moving.
pub fn bisect_decreasing<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut doublings = 0;
    while !(flo >= 0.0 && fhi <= 0.0) {
        if doublings == MAX_BRACKET_DOUBLINGS || flo.is_nan() || fhi.is_nan() {
            return Err(RiskError::Numeric(format!(
                "no sign change on [{lo}, {hi}] after {doublings} bracket doublings (f(lo)={flo}, f(hi)={fhi})"
            )));
        }
        let width = hi - lo;
        if flo < 0.0 {
            lo -= width;
            flo = f(lo);
        }
        if fhi > 0.0 {
            hi += width;
            fhi = f(hi);
        }
        doublings += 1;
    }
    for _ in 0..ROOT_MAX_ITER {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimum value of a convex function by ternary section.
///
/// The starting bracket is widened until the function is non-increasing at
/// the left end and non-decreasing at the right end; that certifies the
/// minimizer lies inside for a convex `f`. Failure to certify within the
/// doubling cap is reported as an unbounded objective.
///
/// Returns `(minimizer, value)`. On flat stretches the midpoint of the final
/// bracket is returned, so only the value is meaningful.
pub fn minimize_convex<F>(f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let probe = |a: f64, b: f64| 1e-3 * (b - a);
    let mut doublings = 0;
    loop {
        let d = probe(lo, hi);
        let left_ok = f(lo + d) <= f(lo);
        let right_ok = f(hi - d) <= f(hi);
        if left_ok && right_ok {
            break;
        }
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(RiskError::Domain(format!(
                "objective appears unbounded below: no minimizer certified on [{lo}, {hi}] after {doublings} doublings"
            )));
        }
        let width = hi - lo;
        if !left_ok {
            lo -= width;
        }
        if !right_ok {
            hi += width;
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(RiskError::Domain("objective bracket became non-finite".into()));
        }
        doublings += 1;
    }

    while hi - lo > SECTION_TOL {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if m1 <= lo || m2 >= hi || m1 >= m2 {
            break;
        }
        let (f1, f2) = (f(m1), f(m2));
        if f1 < f2 {
            hi = m2;
        } else if f1 > f2 {
            lo = m1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    let mid = 0.5 * (lo + hi);
    let best = f(mid).min(f(lo)).min(f(hi));
    if !best.is_finite() {
        return Err(RiskError::Domain(format!("objective is not finite near m = {mid}")));
    }
    Ok((mid, best))
}
