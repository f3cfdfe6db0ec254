//! Adaptive Simpson quadrature for smooth integrands on finite intervals.

use crate::error::{Error, Result};

/// Default absolute tolerance.
pub const ABS_TOL: f64 = 1e-10;
/// Default relative tolerance.
pub const REL_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 48;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

struct Adaptive<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    worst: f64,
}

impl<F: Fn(f64) -> f64> Adaptive<'_, F> {
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = (left + right - whole) / 15.0;
        // Roundoff floor: once the requested tolerance drops below the
        // relative noise of the local Simpson sums, refinement only
        // chases noise.
        let noise = 1e-15 * (left.abs() + right.abs());
        if err.abs() <= tol.max(noise) || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && err.abs() > tol {
                self.worst = self.worst.max(err.abs());
            }
            return left + right + err;
        }
        self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
}

/// Integrate `f` over `[a, b]` with adaptive Simpson refinement.
///
/// The subdivision stops once the local error estimate drops below
/// `max(abs_tol, rel_tol * |I|)` distributed over the subintervals.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain { what: "integration endpoint", value: if a.is_finite() { b } else { a } });
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::Numerical("non-finite integrand".into()));
    }
    let whole = simpson(fa, fm, fb, b - a);
    let tol = abs_tol.max(rel_tol * whole.abs());
    let mut ad = Adaptive { f: &f, worst: 0.0 };
    let value = ad.recurse(a, b, fa, fm, fb, whole, tol, 0);
    if ad.worst > 0.0 {
        let requested = abs_tol.max(rel_tol * value.abs());
        let achieved = ad.worst;
        if achieved > 100.0 * requested {
            return Err(Error::QuadratureNonConvergence { achieved, requested });
        }
    }
    Ok(value)
}

/// Integrate with the default tolerances.
pub fn integrate_default<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    integrate(f, a, b, ABS_TOL, REL_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate_default(|x| 3.0 * x * x, 0.0, 2.0).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn log_integrand() {
        // ∫_0^1 x ln(x+1) dx = 1/4
        let v = integrate_default(|x| x * (x + 1.0).ln(), 0.0, 1.0).unwrap();
        assert!((v - 0.25).abs() < 1e-10);
    }

    #[test]
    fn large_interval_relative_tolerance() {
        let v = integrate_default(|x| x.powf(2.5), 0.0, 1e4).unwrap();
        let exact = 1e4f64.powf(3.5) / 3.5;
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate_default(|x| x, 1.0, 1.0).unwrap(), 0.0);
    }
}
