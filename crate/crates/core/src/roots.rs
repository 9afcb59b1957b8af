//! Bracketed scalar root finding.
//!
//! Bisection keeps a sign-changing bracket at all times; a Newton step is
//! taken whenever it lands strictly inside the current bracket, otherwise the
//! midpoint is used.

use thiserror::Error;

/// Absolute tolerance on the residual used by every landmark solve.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root solve did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Finds a root of `f` in `[lo, hi]` using safeguarded Newton with derivative `df`.
///
/// Stops when `|f(x)| <= tol` or the bracket has shrunk to a few ulps.
pub fn bisect_newton<F, D>(f: F, df: D, lo: f64, hi: f64, tol: f64) -> Result<f64, RootError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(RootError::NotBracketed { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }

    let mut x = 0.5 * (a + b);
    for _ in 0..400 {
        let fx = f(x);
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        if (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            return Ok(if f(a).abs() < f(b).abs() { a } else { b });
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Err(RootError::NoConvergence { iterations: 400 })
}

/// Plain bisection for a continuous `f` with `f(lo) <= 0 < f(hi)`.
///
/// Returns the final bracket `(a, b)` with `f(a) <= 0 < f(b)`, narrowed until
/// `b - a <= width`.
pub fn bisect_bracket<F>(f: F, lo: f64, hi: f64, width: f64) -> Result<(f64, f64), RootError>
where
    F: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo <= 0.0 && f_hi > 0.0) {
        return Err(RootError::NotBracketed { lo, hi, f_lo, f_hi });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        if b - a <= width {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a, b))
}
