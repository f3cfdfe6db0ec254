//! Ground-truth minimizers of `J` on an interval.
//!
//! On `[0, L]` with boundary values `a, b ≥ 0` the minimizer is one of a
//! finite candidate set: the linear interpolant with full support, a
//! wedge of slope `λ*` descending to a dead core (one-sided when one
//! boundary value vanishes, two-sided otherwise), or the zero function.
//! Wedge slopes are stationary exactly when `g(m) m − G(m) = λ`, i.e.
//! `m = λ*`. The brute-force minimizer cross-checks this on a nodal grid.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::grid::Grid;
use crate::solver::{self, SolveOptions, StepRule};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Segment1D {
    pub x0: f64,
    pub x1: f64,
    pub v0: f64,
    pub v1: f64,
}

/// Piecewise-linear profile on `[0, L]`.
#[derive(Clone, Debug, Serialize)]
pub struct Profile1D {
    pub segments: Vec<Segment1D>,
    /// Maximal open intervals of `{u > 0}` (closures recorded).
    pub support: Vec<(f64, f64)>,
    pub energy: f64,
}

impl Profile1D {
    pub fn eval(&self, x: f64) -> f64 {
        for s in &self.segments {
            if x >= s.x0 && x <= s.x1 {
                if s.x1 == s.x0 {
                    return s.v0;
                }
                let t = (x - s.x0) / (s.x1 - s.x0);
                return s.v0 + t * (s.v1 - s.v0);
            }
        }
        0.0
    }

    pub fn support_measure(&self) -> f64 {
        self.support.iter().map(|(a, b)| b - a).sum()
    }

    /// Interior free-boundary points: endpoints of the support inside
    /// `(0, L)`.
    pub fn free_boundaries(&self, length: f64) -> Vec<f64> {
        let mut fb = Vec::new();
        for &(a, b) in &self.support {
            if a > 0.0 && a < length {
                fb.push(a);
            }
            if b > 0.0 && b < length {
                fb.push(b);
            }
        }
        fb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        fb
    }
}

fn check_boundary(what: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Domain { what, value: v });
    }
    Ok(())
}

struct Candidate {
    energy: f64,
    support_measure: f64,
    profile: Profile1D,
}

/// Exact minimizer over the finite candidate set. Ties prefer the larger
/// support (the maximal minimizer).
pub fn exact_solve_1d(a: f64, b: f64, length: f64, f: &GFunction, lambda: f64) -> Result<Profile1D> {
    check_boundary("a", a)?;
    check_boundary("b", b)?;
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain { what: "lambda", value: lambda });
    }

    if a == 0.0 && b == 0.0 {
        return Ok(Profile1D {
            segments: vec![Segment1D { x0: 0.0, x1: length, v0: 0.0, v1: 0.0 }],
            support: vec![],
            energy: 0.0,
        });
    }

    let ls = f.lambda_star(lambda)?;
    let mut candidates: Vec<Candidate> = Vec::new();

    // Full-support linear interpolant.
    let slope = (b - a).abs() / length;
    candidates.push(Candidate {
        energy: length * f.big_g(slope)? + lambda * length,
        support_measure: length,
        profile: Profile1D {
            segments: vec![Segment1D { x0: 0.0, x1: length, v0: a, v1: b }],
            support: vec![(0.0, length)],
            energy: 0.0,
        },
    });

    if ls > 0.0 {
        let wedge_density = f.big_g(ls)? + lambda;
        if b == 0.0 && a > 0.0 {
            let s = a / ls;
            if s < length {
                candidates.push(Candidate {
                    energy: s * wedge_density,
                    support_measure: s,
                    profile: Profile1D {
                        segments: vec![
                            Segment1D { x0: 0.0, x1: s, v0: a, v1: 0.0 },
                            Segment1D { x0: s, x1: length, v0: 0.0, v1: 0.0 },
                        ],
                        support: vec![(0.0, s)],
                        energy: 0.0,
                    },
                });
            }
        }
        if a == 0.0 && b > 0.0 {
            let s = b / ls;
            if s < length {
                candidates.push(Candidate {
                    energy: s * wedge_density,
                    support_measure: s,
                    profile: Profile1D {
                        segments: vec![
                            Segment1D { x0: 0.0, x1: length - s, v0: 0.0, v1: 0.0 },
                            Segment1D { x0: length - s, x1: length, v0: 0.0, v1: b },
                        ],
                        support: vec![(length - s, length)],
                        energy: 0.0,
                    },
                });
            }
        }
        if a > 0.0 && b > 0.0 {
            let sa = a / ls;
            let sb = b / ls;
            // Zero-width dead cores collapse to the linear candidate.
            if sa + sb < length {
                candidates.push(Candidate {
                    energy: (sa + sb) * wedge_density,
                    support_measure: sa + sb,
                    profile: Profile1D {
                        segments: vec![
                            Segment1D { x0: 0.0, x1: sa, v0: a, v1: 0.0 },
                            Segment1D { x0: sa, x1: length - sb, v0: 0.0, v1: 0.0 },
                            Segment1D { x0: length - sb, x1: length, v0: 0.0, v1: b },
                        ],
                        support: vec![(0.0, sa), (length - sb, length)],
                        energy: 0.0,
                    },
                });
            }
        }
    }

    let mut best = 0usize;
    for i in 1..candidates.len() {
        let e_best = candidates[best].energy;
        let e = candidates[i].energy;
        let tol = 1e-12 * e_best.abs().max(e.abs()).max(1.0);
        if e < e_best - tol
            || ((e - e_best).abs() <= tol
                && candidates[i].support_measure > candidates[best].support_measure)
        {
            best = i;
        }
    }
    let chosen = candidates.swap_remove(best);
    let mut profile = chosen.profile;
    profile.energy = chosen.energy;
    Ok(profile)
}

/// Nodal brute-force minimizer: exhaustive search over dead-core node
/// ranges (each pattern's optimum is piecewise linear in closed form)
/// combined with multi-start projected descent on the smoothed energy.
pub fn brute_force_1d(
    a: f64,
    b: f64,
    length: f64,
    f: &GFunction,
    lambda: f64,
    n: usize,
) -> Result<Profile1D> {
    check_boundary("a", a)?;
    check_boundary("b", b)?;
    if n < 3 || n > 200 {
        return Err(Error::InvalidArgument(format!("node count must be in [3, 200], got {n}")));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
    }
    let h = length / (n - 1) as f64;
    let x = |i: usize| i as f64 * h;

    let mut grid = Grid::rectangle(n, 1, length, 0.0)?;
    grid.set_phi0(|xx, _| if xx == 0.0 { a } else { b })?;
    let grid = Arc::new(grid);

    if a == 0.0 && b == 0.0 {
        return nodal_profile(&grid, &vec![0.0; n], f, lambda);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |values: Vec<f64>, energy: f64, best: &mut Option<(f64, Vec<f64>)>| {
        if best.as_ref().map_or(true, |(e, _)| energy < *e) {
            *best = Some((energy, values));
        }
    };

    // Full support: linear interpolant.
    {
        let values: Vec<f64> = (0..n).map(|i| a + (b - a) * x(i) / length).collect();
        let e = solver::assemble_energy_sharp(&grid, &values, f, lambda)?;
        consider(values, e, &mut best);
    }

    // Zero runs [k1, k2]: linear wedges outside, zero inside.
    let k1_min = if a > 0.0 { 1 } else { 0 };
    let k2_max = if b > 0.0 { n - 2 } else { n - 1 };
    for k1 in k1_min..=k2_max {
        for k2 in k1..=k2_max {
            let mut values = vec![0.0; n];
            let mut e = 0.0;
            if k1 > 0 {
                let s = x(k1);
                for i in 0..k1 {
                    values[i] = a * (1.0 - x(i) / s);
                }
                e += s * f.big_g(a / s)? + lambda * s;
            } else if a > 0.0 {
                continue;
            }
            if k2 < n - 1 {
                let s = length - x(k2);
                for i in (k2 + 1)..n {
                    values[i] = b * (x(i) - x(k2)) / s;
                }
                e += s * f.big_g(b / s)? + lambda * s;
            } else if b > 0.0 {
                continue;
            }
            values[0] = a;
            values[n - 1] = b;
            consider(values, e, &mut best);
        }
    }

    // Multi-start smoothed descent as an independent structural check.
    let opts = SolveOptions {
        max_iters: 400,
        restarts: 1,
        stall_window: 30,
        energy_tol: 1e-11,
        step_rule: StepRule::Armijo,
        ..SolveOptions::default()
    };
    if let Ok((u, _)) = solver::minimize(&grid, f, lambda, &opts) {
        let e = solver::assemble_energy_sharp(&grid, u.values(), f, lambda)?;
        consider(u.values().to_vec(), e, &mut best);
    }

    let (_, values) = best.expect("candidate set nonempty");
    nodal_profile(&grid, &values, f, lambda)
}

fn nodal_profile(grid: &Arc<Grid>, values: &[f64], f: &GFunction, lambda: f64) -> Result<Profile1D> {
    let n = grid.nx();
    let h = grid.hx();
    let energy = solver::assemble_energy_sharp(grid, values, f, lambda)?;
    let mut segments = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        segments.push(Segment1D {
            x0: i as f64 * h,
            x1: (i + 1) as f64 * h,
            v0: values[i],
            v1: values[i + 1],
        });
    }
    // Support: union of cells with a positive endpoint, coalesced.
    let mut support: Vec<(f64, f64)> = Vec::new();
    for i in 0..n - 1 {
        if values[i] > 0.0 || values[i + 1] > 0.0 {
            let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
            match support.last_mut() {
                Some(last) if last.1 >= x0 - 1e-15 => last.1 = x1,
                _ => support.push((x0, x1)),
            }
        }
    }
    Ok(Profile1D { segments, support, energy })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> GFunction {
        GFunction::power(2.0).unwrap()
    }

    #[test]
    fn wedge_example() {
        // a=1, b=0, L=2, λ=0.5 with G = t²/2: λ* = 1, FB at 1, energy 1.
        let prof = exact_solve_1d(1.0, 0.0, 2.0, &p2(), 0.5).unwrap();
        assert!((prof.energy - 1.0).abs() < 1e-12);
        let fb = prof.free_boundaries(2.0);
        assert_eq!(fb.len(), 1);
        assert!((fb[0] - 1.0).abs() < 1e-12);
        assert!((prof.eval(0.5) - 0.5).abs() < 1e-12);
        assert_eq!(prof.eval(1.5), 0.0);
    }

    #[test]
    fn full_support_when_wedge_does_not_fit() {
        // a=3, b=0, L=1: a/λ* = 3 > 1, so the linear interpolant wins.
        let prof = exact_solve_1d(3.0, 0.0, 1.0, &p2(), 0.5).unwrap();
        assert_eq!(prof.free_boundaries(1.0).len(), 0);
        assert!((prof.eval(0.5) - 1.5).abs() < 1e-12);
        assert!((prof.support_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_zero_profile() {
        let prof = exact_solve_1d(0.0, 0.0, 1.0, &p2(), 0.5).unwrap();
        assert_eq!(prof.energy, 0.0);
        assert_eq!(prof.support_measure(), 0.0);
    }

    #[test]
    fn two_wedges() {
        // a=b=1, L=10: wedges of slope ±1 and dead core [1, 9]; energy
        // 2(G(1) + λ) = 2 beats the linear candidate's 5.
        let prof = exact_solve_1d(1.0, 1.0, 10.0, &p2(), 0.5).unwrap();
        assert!((prof.energy - 2.0).abs() < 1e-12);
        let fb = prof.free_boundaries(10.0);
        assert_eq!(fb.len(), 2);
        assert!((fb[0] - 1.0).abs() < 1e-12 && (fb[1] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn wedge_slope_is_stationary() {
        let f = GFunction::power_log(1.0, 1.0, 1.0).unwrap();
        let lambda = 0.7;
        let prof = exact_solve_1d(0.8, 0.0, 5.0, &f, lambda).unwrap();
        let fb = prof.free_boundaries(5.0);
        assert_eq!(fb.len(), 1);
        let m = 0.8 / fb[0];
        let resid = (f.g(m).unwrap() * m - f.big_g(m).unwrap() - lambda).abs();
        assert!(resid <= 1e-10, "stationarity defect {resid:e}");
    }

    #[test]
    fn brute_force_matches_exact_wedge() {
        let exact = exact_solve_1d(1.0, 0.0, 2.0, &p2(), 0.5).unwrap();
        let brute = brute_force_1d(1.0, 0.0, 2.0, &p2(), 0.5, 101).unwrap();
        assert!((brute.energy - exact.energy).abs() < 0.02);
        let fb_e = exact.free_boundaries(2.0);
        let fb_b = brute.free_boundaries(2.0);
        assert_eq!(fb_b.len(), 1);
        assert!((fb_b[0] - fb_e[0]).abs() <= 2.0 / 100.0 + 1e-12);
    }

    #[test]
    fn brute_force_zero_data() {
        let brute = brute_force_1d(0.0, 0.0, 1.0, &p2(), 0.5, 51).unwrap();
        assert_eq!(brute.energy, 0.0);
        assert_eq!(brute.support_measure(), 0.0);
    }

    #[test]
    fn brute_force_two_wedges() {
        let brute = brute_force_1d(1.0, 1.0, 10.0, &p2(), 0.5, 101).unwrap();
        assert!((brute.energy - 2.0).abs() < 3.0 / 101.0, "energy {}", brute.energy);
        let fb = brute.free_boundaries(10.0);
        assert_eq!(fb.len(), 2);
    }

    #[test]
    fn exact_energy_below_brute_force() {
        let f = GFunction::power(3.0).unwrap();
        for &(a, b, length, lambda) in
            &[(1.0, 0.0, 2.0, 0.5), (0.5, 1.5, 1.5, 1.0), (0.0, 1.0, 2.0, 0.25)]
        {
            let exact = exact_solve_1d(a, b, length, &f, lambda).unwrap();
            let brute = brute_force_1d(a, b, length, &f, lambda, 101).unwrap();
            assert!(exact.energy <= brute.energy + 1e-9, "exact {} brute {}", exact.energy, brute.energy);
        }
    }

    #[test]
    fn monotone_support_in_lambda() {
        let f = p2();
        let mut prev = f64::INFINITY;
        for &lam in &[0.1, 0.3, 0.6, 1.0, 2.0] {
            let prof = exact_solve_1d(1.0, 0.5, 4.0, &f, lam).unwrap();
            let m = prof.support_measure();
            assert!(m <= prev + 1e-12, "support grew: {m} after {prev}");
            prev = m;
        }
    }

    #[test]
    fn symmetry_of_support() {
        let f = p2();
        let left = exact_solve_1d(1.2, 0.0, 3.0, &f, 0.8).unwrap();
        let right = exact_solve_1d(0.0, 1.2, 3.0, &f, 0.8).unwrap();
        assert!((left.support_measure() - right.support_measure()).abs() < 1e-12);
        let fb_l = left.free_boundaries(3.0);
        let fb_r = right.free_boundaries(3.0);
        assert_eq!(fb_l.len(), 1);
        assert_eq!(fb_r.len(), 1);
        assert!((fb_l[0] - (3.0 - fb_r[0])).abs() < 1e-12);
    }
}
