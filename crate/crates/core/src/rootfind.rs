//! Safeguarded scalar root finding for monotone functions.
//!
//! The solvers here assume a strictly increasing function and keep a
//! bracket at all times: a secant candidate is accepted only when it falls
//! inside the bracket and makes reasonable progress, otherwise the step
//! falls back to bisection.

use crate::error::{Error, Result};

/// Grow a bracket `[lo, hi]` with `f(lo) <= target <= f(hi)` for a strictly
/// increasing `f` with `f(0) = 0`, doubling the upper end from 1.
pub fn grow_bracket<F: Fn(f64) -> f64>(f: &F, target: f64) -> Result<(f64, f64)> {
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Domain { what: "target", value: target });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut fhi = f(hi);
    let mut guard = 0;
    while fhi < target {
        lo = hi;
        hi *= 2.0;
        fhi = f(hi);
        guard += 1;
        if guard > 2100 || !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "bracket growth failed: f({hi:e}) = {fhi:e} < target {target:e}"
            )));
        }
    }
    // Shrink from below so the secant starts tight for small targets.
    while lo == 0.0 && hi > f64::MIN_POSITIVE && f(hi * 0.5) > target {
        hi *= 0.5;
    }
    Ok((lo, hi))
}

/// Solve `f(x) = target` for strictly increasing `f` on the bracket
/// `[lo, hi]`, to relative tolerance `rel_tol` on `x`.
pub fn solve_monotone<F: Fn(f64) -> f64>(
    f: &F,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut flo = f(lo) - target;
    let mut fhi = f(hi) - target;
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Numerical(format!(
            "root not bracketed: f({lo:e}) - t = {flo:e}, f({hi:e}) - t = {fhi:e}"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut last_width = hi - lo;
    for iter in 0..200 {
        let width = hi - lo;
        if width <= rel_tol * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        // Secant candidate; bisect every other failure to guarantee progress.
        let mut x = if fhi != flo {
            lo - flo * (hi - lo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        let margin = 0.01 * width;
        if !(x > lo + margin && x < hi - margin) || (iter % 3 == 2 && width > 0.25 * last_width) {
            x = 0.5 * (lo + hi);
        }
        if iter % 3 == 2 {
            last_width = width;
        }
        let fx = f(x) - target;
        if !fx.is_finite() {
            return Err(Error::Numerical(format!("non-finite value at x = {x:e}")));
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    // Pick the endpoint with smaller residual.
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Solve `f(x) = target` for strictly increasing `f` on `[0, ∞)` with
/// `f(0) = 0`, growing the bracket geometrically.
pub fn solve_increasing_from_zero<F: Fn(f64) -> f64>(f: &F, target: f64, rel_tol: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = grow_bracket(f, target)?;
    solve_monotone(f, lo, hi, target, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let f = |x: f64| x * x * x;
        let x = solve_increasing_from_zero(&f, 27.0, 1e-14).unwrap();
        assert!((x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_target() {
        let f = |x: f64| x.powf(1.7);
        let x = solve_increasing_from_zero(&f, 1e-9, 1e-13).unwrap();
        assert!((f(x) - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn zero_target() {
        let f = |x: f64| x;
        assert_eq!(solve_increasing_from_zero(&f, 0.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn large_target() {
        let f = |x: f64| x * (1.0 + x).ln();
        let x = solve_increasing_from_zero(&f, 1e9, 1e-13).unwrap();
        assert!((f(x) - 1e9).abs() / 1e9 < 1e-10);
    }
}
