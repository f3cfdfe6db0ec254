//! Discrete minimization of `J(u) = Σ_T |T| [G(|∇u_T|) + λ H_ε(ū_T)]`
//! by projected descent with indicator smoothing and continuation, plus
//! the discrete diagnostics built on the same assembly: weak residual,
//! harmonic replacement, comparison of ordered boundary data, and the
//! annulus barrier evaluation.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::grid::{Field, Grid};

/// Clamped cubic smoothstep: 0 below 0, `3(t/ε)² − 2(t/ε)³` on `[0, ε]`,
/// 1 above `ε`.
#[inline]
pub fn smoothstep(t: f64, eps: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= eps {
        1.0
    } else {
        let s = t / eps;
        s * s * (3.0 - 2.0 * s)
    }
}

#[inline]
fn smoothstep_prime(t: f64, eps: f64) -> f64 {
    if t <= 0.0 || t >= eps {
        0.0
    } else {
        let s = t / eps;
        6.0 * s * (1.0 - s) / eps
    }
}

/// Step-size rule for the descent loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepRule {
    /// Armijo backtracking from a Barzilai-Borwein initial guess.
    Armijo,
    /// Barzilai-Borwein step accepted directly when it decreases the
    /// energy, with backtracking as the safeguard.
    BarzilaiBorwein,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Strictly decreasing smoothing widths; `None` derives the default
    /// schedule `ε₀ = 0.25 sup φ₀` halved until `ε ≤ max(2h, 1e-3 sup φ₀)`.
    pub eps_schedule: Option<Vec<f64>>,
    /// Gradient regularization; `None` defaults to `1e-6 λ*`.
    pub eta: Option<f64>,
    /// Iteration cap per ε stage.
    pub max_iters: usize,
    /// Relative energy-decrease threshold over `stall_window` iterations.
    pub energy_tol: f64,
    pub stall_window: usize,
    pub step_rule: StepRule,
    /// Number of randomly perturbed initializations tried in addition to
    /// the harmonic one.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_schedule: None,
            eta: None,
            max_iters: 5000,
            energy_tol: 1e-10,
            stall_window: 50,
            step_rule: StepRule::Armijo,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageDiagnostics {
    pub eps: f64,
    pub iterations: usize,
    pub energy_start: f64,
    pub energy_end: f64,
    pub aborted: bool,
    /// Energy after every accepted step of this stage.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct Diagnostics {
    pub eps_schedule: Vec<f64>,
    pub eta: f64,
    pub lambda_star: f64,
    pub stages: Vec<StageDiagnostics>,
    /// Sharp energy of the best candidate of each initialization.
    pub restart_energies: Vec<f64>,
    pub chosen_restart: usize,
    pub chosen_threshold: f64,
    pub energy_smoothed: f64,
    pub energy_sharp: f64,
    /// Max weak residual over interior nodes with an all-positive patch.
    pub residual_max: f64,
}

/// Smoothed discrete energy `Σ_T |T| [G(|∇u_T|) + λ H_ε(ū_T)]`.
pub fn assemble_energy(
    grid: &Grid,
    values: &[f64],
    f: &GFunction,
    lambda: f64,
    eps: f64,
) -> Result<f64> {
    if values.len() != grid.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} values on a grid with {} nodes",
            values.len(),
            grid.node_count()
        )));
    }
    let mut total = 0.0;
    for el in grid.elements() {
        let [gx, gy] = el.gradient(values);
        let t = gx.hypot(gy);
        total += el.measure * f.big_g(t)?;
        if lambda != 0.0 {
            total += el.measure * lambda * smoothstep(el.mean(values), eps);
        }
    }
    Ok(total)
}

/// Sharp discrete energy: the indicator term counts every element with a
/// positive vertex (exact for nonnegative P1 fields, whose zero set meets
/// such an element in measure zero).
pub fn assemble_energy_sharp(grid: &Grid, values: &[f64], f: &GFunction, lambda: f64) -> Result<f64> {
    let mut total = 0.0;
    for el in grid.elements() {
        let [gx, gy] = el.gradient(values);
        total += el.measure * f.big_g(gx.hypot(gy))?;
        if lambda != 0.0 {
            let positive = (0..el.nn).any(|k| values[el.nodes[k]] > 0.0);
            if positive {
                total += el.measure * lambda;
            }
        }
    }
    Ok(total)
}

/// Measure of `{u > 0}` of a nonnegative P1 field (elements with a
/// positive vertex count fully).
pub fn support_measure(grid: &Grid, values: &[f64]) -> f64 {
    grid.elements()
        .filter(|el| (0..el.nn).any(|k| values[el.nodes[k]] > 0.0))
        .map(|el| el.measure)
        .sum()
}

/// Gradient of the smoothed energy with the degenerate flux regularized:
/// `F_η(t) = g(√(t²+η²))/√(t²+η²)` replaces `g(t)/t`. Entries at masked
/// nodes (Dirichlet, plus any `frozen` ones) are zero.
pub fn energy_gradient(
    grid: &Grid,
    values: &[f64],
    f: &GFunction,
    lambda: f64,
    eps: f64,
    eta: f64,
    frozen: Option<&[bool]>,
) -> Vec<f64> {
    let mut grad = vec![0.0; grid.node_count()];
    energy_gradient_into(grid, values, f, lambda, eps, eta, frozen, &mut grad);
    grad
}

#[allow(clippy::too_many_arguments)]
fn energy_gradient_into(
    grid: &Grid,
    values: &[f64],
    f: &GFunction,
    lambda: f64,
    eps: f64,
    eta: f64,
    frozen: Option<&[bool]>,
    grad: &mut [f64],
) {
    grad.iter_mut().for_each(|x| *x = 0.0);
    for el in grid.elements() {
        let [gx, gy] = el.gradient(values);
        let t = gx.hypot(gy);
        let w = el.measure * f.flux_weight(t, eta);
        let hp = if lambda != 0.0 {
            el.measure * lambda * smoothstep_prime(el.mean(values), eps) / el.nn as f64
        } else {
            0.0
        };
        for k in 0..el.nn {
            let i = el.nodes[k];
            grad[i] += w * (gx * el.grads[k][0] + gy * el.grads[k][1]) + hp;
        }
    }
    for i in 0..grid.node_count() {
        if grid.is_boundary(i) || frozen.map_or(false, |m| m[i]) {
            grad[i] = 0.0;
        }
    }
}

/// Weak residual of the g-Laplacian against nodal hat functions,
/// normalized by the node volume; zero on the boundary.
pub fn g_laplacian_residual(grid: &Grid, u: &Field, f: &GFunction, eta: f64) -> Field {
    let mut res = vec![0.0; grid.node_count()];
    for el in grid.elements() {
        let [gx, gy] = el.gradient(u.values());
        let w = el.measure * f.flux_weight(gx.hypot(gy), eta);
        for k in 0..el.nn {
            res[el.nodes[k]] += w * (gx * el.grads[k][0] + gy * el.grads[k][1]);
        }
    }
    let vol = grid.node_volumes();
    for i in 0..grid.node_count() {
        if grid.is_boundary(i) {
            res[i] = 0.0;
        } else {
            res[i] /= vol[i];
        }
    }
    Field::from_values(u.grid().clone(), res).expect("residual shape")
}

struct Objective<'a> {
    grid: &'a Grid,
    f: &'a GFunction,
    lambda: f64,
    eps: f64,
    eta: f64,
    lower: f64,
    upper: f64,
    frozen: Option<&'a [bool]>,
}

impl Objective<'_> {
    fn energy(&self, v: &[f64]) -> f64 {
        assemble_energy(self.grid, v, self.f, self.lambda, self.eps).unwrap_or(f64::INFINITY)
    }

    fn gradient_into(&self, v: &[f64], out: &mut [f64]) {
        energy_gradient_into(self.grid, v, self.f, self.lambda, self.eps, self.eta, self.frozen, out);
    }

    fn project(&self, v: &mut [f64]) {
        for (i, x) in v.iter_mut().enumerate() {
            if self.grid.is_boundary(i) || self.frozen.map_or(false, |m| m[i]) {
                continue;
            }
            *x = x.clamp(self.lower, self.upper);
        }
    }
}

struct DescentOutcome {
    energy: f64,
    iterations: usize,
    aborted: bool,
    trace: Vec<f64>,
}

/// Projected descent with BB step guess and Armijo backtracking. Only
/// energy-decreasing steps are accepted, so the energy trace is monotone.
fn descend(
    obj: &Objective,
    u: &mut Vec<f64>,
    max_iters: usize,
    energy_tol: f64,
    stall_window: usize,
    step_rule: StepRule,
) -> DescentOutcome {
    let n = u.len();
    obj.project(u);
    let mut energy = obj.energy(u);
    let mut trace = vec![energy];
    let mut grad = vec![0.0; n];
    obj.gradient_into(u, &mut grad);
    let mut prev_u = vec![0.0; n];
    let mut prev_grad = vec![0.0; n];
    let mut have_prev = false;
    let mut failures = 0usize;
    let mut iterations = 0usize;
    let mut cand = vec![0.0; n];
    let scale = obj.upper.abs().max(1.0);

    for it in 0..max_iters {
        iterations = it + 1;
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            break;
        }
        // BB1 step from the previous pair, else a conservative scaled guess.
        let mut step = if have_prev {
            let mut sy = 0.0;
            let mut ss = 0.0;
            for i in 0..n {
                let s = u[i] - prev_u[i];
                let y = grad[i] - prev_grad[i];
                sy += s * y;
                ss += s * s;
            }
            if sy > 0.0 && ss > 0.0 {
                (ss / sy).clamp(1e-14, 1e14)
            } else {
                1.0
            }
        } else {
            0.1 * scale / gnorm2.sqrt().max(1e-300)
        };

        let mut accepted = false;
        let mut cand_energy = f64::INFINITY;
        for bt in 0..55 {
            for i in 0..n {
                cand[i] = u[i] - step * grad[i];
            }
            obj.project(&mut cand);
            cand_energy = obj.energy(&cand);
            // Projected Armijo decrease against the actually taken step.
            let mut dec = 0.0;
            for i in 0..n {
                dec += grad[i] * (u[i] - cand[i]);
            }
            let enough = if step_rule == StepRule::BarzilaiBorwein && bt == 0 {
                cand_energy < energy
            } else {
                cand_energy <= energy - 1e-4 * dec.max(0.0) && cand_energy <= energy
            };
            if enough && dec >= 0.0 && cand_energy.is_finite() {
                accepted = true;
                break;
            }
            step *= 0.5;
        }

        if !accepted {
            failures += 1;
            have_prev = false;
            if failures >= 3 {
                return DescentOutcome { energy, iterations, aborted: true, trace };
            }
            continue;
        }
        failures = 0;
        prev_u.copy_from_slice(u);
        prev_grad.copy_from_slice(&grad);
        have_prev = true;
        std::mem::swap(u, &mut cand);
        obj.gradient_into(u, &mut grad);
        energy = cand_energy;
        trace.push(energy);

        if trace.len() > stall_window {
            let before = trace[trace.len() - 1 - stall_window];
            if before - energy <= energy_tol * energy.abs().max(1.0) {
                break;
            }
        }
    }
    DescentOutcome { energy, iterations, aborted: false, trace }
}

/// `out = A(w) v` for the weighted P1 stiffness operator with fixed
/// per-element coefficients `coef[e] = F_η(|∇u_e|) |T_e|`.
fn apply_weighted_stiffness(grid: &Grid, coef: &[f64], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for e in 0..grid.element_count() {
        let el = grid.element(e);
        let c = coef[e];
        if c == 0.0 {
            continue;
        }
        let [gx, gy] = el.gradient(v);
        for k in 0..el.nn {
            out[el.nodes[k]] += c * (gx * el.grads[k][0] + gy * el.grads[k][1]);
        }
    }
}

/// Successive-substitution refinement of the gradient-part minimizer on
/// the free nodes: freeze the flux weights `F_η(|∇u|)` and solve the
/// resulting linear system by conjugate gradients, then re-freeze.
/// Mutates `values` in place; the caller decides whether to keep the
/// result (the iteration is not guaranteed monotone in the energy).
fn picard_refine(
    grid: &Grid,
    values: &mut [f64],
    f: &GFunction,
    eta: f64,
    free: &[bool],
    rounds: usize,
    cg_iters: usize,
) {
    let n = grid.node_count();
    let ne = grid.element_count();
    let mut coef = vec![0.0; ne];
    let mut av = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    for _ in 0..rounds {
        for e in 0..ne {
            let el = grid.element(e);
            let [gx, gy] = el.gradient(values);
            coef[e] = el.measure * f.flux_weight(gx.hypot(gy), eta);
        }
        // CG for A x = 0 over the free nodes (fixed nodes enter the RHS).
        apply_weighted_stiffness(grid, &coef, values, &mut av);
        let mut rs = 0.0;
        for i in 0..n {
            r[i] = if free[i] { -av[i] } else { 0.0 };
            p[i] = r[i];
            rs += r[i] * r[i];
        }
        if rs == 0.0 {
            break;
        }
        let rs0 = rs;
        for _ in 0..cg_iters {
            apply_weighted_stiffness(grid, &coef, &p, &mut ap);
            let mut pap = 0.0;
            for i in 0..n {
                if free[i] {
                    pap += p[i] * ap[i];
                }
            }
            if pap <= 0.0 {
                break;
            }
            let alpha = rs / pap;
            let mut rs_new = 0.0;
            for i in 0..n {
                if free[i] {
                    values[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                    rs_new += r[i] * r[i];
                }
            }
            if rs_new <= 1e-30 * rs0 || rs_new == 0.0 {
                break;
            }
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..n {
                if free[i] {
                    p[i] = r[i] + beta * p[i];
                }
            }
        }
    }
}

/// Default smoothing schedule.
fn default_eps_schedule(grid: &Grid, sup_phi: f64) -> Vec<f64> {
    let eps_final = (2.0 * grid.h()).max(1e-3 * sup_phi);
    let mut schedule = Vec::new();
    let mut e = 0.25 * sup_phi;
    while e > eps_final {
        schedule.push(e);
        e *= 0.5;
    }
    schedule.push(eps_final);
    schedule
}

fn default_eta(f: &GFunction, lambda: f64, grid: &Grid, sup_phi: f64) -> Result<f64> {
    let ls = f.lambda_star(lambda)?;
    let fallback = 1e-9 * (sup_phi / grid.diameter()).max(f64::MIN_POSITIVE);
    Ok(if ls > 0.0 { 1e-6 * ls } else { fallback })
}

/// Minimize the pure gradient part `Σ |T| G(|∇u|)` subject to the grid's
/// Dirichlet data (the `λ = 0` problem). Used as the solver
/// initialization and by the comparison diagnostics.
pub fn solve_harmonic(grid: &Arc<Grid>, f: &GFunction, max_iters: usize) -> Result<Field> {
    let mut u: Vec<f64> = grid.phi0().to_vec();
    // Interior nodes start from the boundary mean.
    let nb = grid.boundary_mask().iter().filter(|&&b| b).count().max(1);
    let mean = grid.phi0().iter().sum::<f64>() / nb as f64;
    for i in 0..grid.node_count() {
        if !grid.is_boundary(i) {
            u[i] = mean;
        }
    }
    let eta = default_eta(f, 0.0, grid, grid.sup_phi0().max(mean))?;
    let obj = Objective {
        grid,
        f,
        lambda: 0.0,
        eps: 1.0,
        eta,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        frozen: None,
    };
    descend(&obj, &mut u, max_iters, 1e-13, 100, StepRule::Armijo);
    // Linearized refinement, kept only when it lowers the energy.
    let free: Vec<bool> = (0..grid.node_count()).map(|i| !grid.is_boundary(i)).collect();
    let before = assemble_energy(grid, &u, f, 0.0, 1.0)?;
    let mut refined = u.clone();
    picard_refine(grid, &mut refined, f, eta, &free, 30, 4 * grid.node_count());
    if refined.iter().all(|v| v.is_finite()) && assemble_energy(grid, &refined, f, 0.0, 1.0)? <= before {
        u = refined;
    }
    Field::from_values(grid.clone(), u)
}

/// Continuation + projected descent minimization of the smoothed `J`.
///
/// After the last stage the zero set is detected by sweeping hard
/// thresholds (the fixed `1e-12 sup φ₀` cutoff plus a geometric ladder up
/// to twice the final smoothing width), re-polishing each candidate with
/// its positivity pattern frozen, and keeping the candidate with the
/// smallest sharp energy; the sweep is what turns the smoothed solution's
/// exponential tail into a crisp discrete free boundary.
pub fn minimize(
    grid: &Arc<Grid>,
    f: &GFunction,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<(Field, Diagnostics)> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain { what: "lambda", value: lambda });
    }
    let sup_phi = grid.sup_phi0();
    let mut diag = Diagnostics {
        lambda_star: f.lambda_star(lambda)?,
        ..Diagnostics::default()
    };
    if sup_phi <= 0.0 {
        let u = Field::zeros(grid.clone());
        return Ok((u, diag));
    }
    let eta = match opts.eta {
        Some(e) => e,
        None => default_eta(f, lambda, grid, sup_phi)?,
    };
    let schedule = match &opts.eps_schedule {
        Some(s) => {
            if s.is_empty() || s.windows(2).any(|w| w[1] >= w[0]) || s.iter().any(|&e| e <= 0.0) {
                return Err(Error::InvalidArgument(
                    "eps_schedule must be strictly decreasing and positive".into(),
                ));
            }
            s.clone()
        }
        None => default_eps_schedule(grid, sup_phi),
    };
    diag.eta = eta;
    diag.eps_schedule = schedule.clone();

    let harmonic = solve_harmonic(grid, f, opts.max_iters.min(4000))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (sharp energy, values, threshold)
    let mut best_restart = 0usize;

    for restart in 0..=opts.restarts {
        let mut u = harmonic.values().to_vec();
        if restart > 0 {
            for i in 0..grid.node_count() {
                if !grid.is_boundary(i) {
                    u[i] = (u[i] + 0.3 * sup_phi * rng.gen::<f64>()).clamp(0.0, sup_phi);
                }
            }
        }

        for &eps in &schedule {
            let obj = Objective {
                grid,
                f,
                lambda,
                eps,
                eta,
                lower: 0.0,
                upper: sup_phi,
                frozen: None,
            };
            let start = obj.energy(&u);
            let out = descend(&obj, &mut u, opts.max_iters, opts.energy_tol, opts.stall_window, opts.step_rule);
            if restart == 0 {
                diag.stages.push(StageDiagnostics {
                    eps,
                    iterations: out.iterations,
                    energy_start: start,
                    energy_end: out.energy,
                    aborted: out.aborted,
                    trace: out.trace,
                });
            }
        }

        let eps_final = *schedule.last().expect("nonempty schedule");
        let (sharp, trimmed, threshold) =
            trim_and_polish(grid, f, lambda, eta, sup_phi, &u, eps_final, opts)?;
        if restart == 0 {
            diag.energy_smoothed = assemble_energy(grid, &u, f, lambda, eps_final)?;
        }
        diag.restart_energies.push(sharp);
        if best.as_ref().map_or(true, |(e, _, _)| sharp < *e) {
            best = Some((sharp, trimmed, threshold));
            best_restart = restart;
        }
    }

    let (_, mut u, threshold) = best.expect("at least one restart");
    diag.chosen_restart = best_restart;
    diag.chosen_threshold = threshold;

    // Final tight polish on the winning support pattern.
    let frozen: Vec<bool> = u.iter().map(|&v| v == 0.0).collect();
    let obj = Objective {
        grid,
        f,
        lambda: 0.0,
        eps: 1.0,
        eta,
        lower: 0.0,
        upper: sup_phi,
        frozen: Some(&frozen),
    };
    descend(&obj, &mut u, opts.max_iters, 1e-13, 120, opts.step_rule);
    // Linearized refinement of the support interior; kept only when it
    // stays in the admissible box and lowers the sharp energy.
    let before = assemble_energy_sharp(grid, &u, f, lambda)?;
    let free: Vec<bool> =
        (0..grid.node_count()).map(|i| !grid.is_boundary(i) && !frozen[i]).collect();
    let mut refined = u.clone();
    picard_refine(grid, &mut refined, f, eta, &free, 30, 4 * grid.node_count());
    let in_box = refined.iter().all(|&v| v.is_finite() && v >= -1e-13 * sup_phi && v <= sup_phi * (1.0 + 1e-13));
    if in_box {
        for v in refined.iter_mut() {
            *v = v.clamp(0.0, sup_phi);
        }
        if assemble_energy_sharp(grid, &refined, f, lambda)? <= before {
            u = refined;
        }
    }
    diag.energy_sharp = assemble_energy_sharp(grid, &u, f, lambda)?;

    let field = Field::from_values(grid.clone(), u)?;
    diag.residual_max = support_residual_max(grid, &field, f, eta);
    Ok((field, diag))
}

/// Threshold sweep + frozen-pattern polish; returns the best candidate by
/// sharp energy.
fn trim_and_polish(
    grid: &Arc<Grid>,
    f: &GFunction,
    lambda: f64,
    eta: f64,
    sup_phi: f64,
    u: &[f64],
    eps_final: f64,
    opts: &SolveOptions,
) -> Result<(f64, Vec<f64>, f64)> {
    let mut thresholds = vec![0.0, 1e-12 * sup_phi];
    if lambda > 0.0 {
        let mut t = 2.0 * eps_final;
        for _ in 0..9 {
            thresholds.push(t);
            t *= 0.5;
        }
    }
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for &tau in &thresholds {
        let mut cand = u.to_vec();
        for i in 0..grid.node_count() {
            if !grid.is_boundary(i) && cand[i] < tau {
                cand[i] = 0.0;
            }
        }
        let frozen: Vec<bool> = cand.iter().map(|&v| v == 0.0).collect();
        let obj = Objective {
            grid,
            f,
            lambda: 0.0,
            eps: 1.0,
            eta,
            lower: 0.0,
            upper: sup_phi,
            frozen: Some(&frozen),
        };
        descend(&obj, &mut cand, opts.max_iters.min(250), 1e-11, 40, opts.step_rule);
        // Cheap linearized relaxation of the pattern interior before
        // ranking; kept only when admissible and energy-decreasing.
        let free: Vec<bool> =
            (0..grid.node_count()).map(|i| !grid.is_boundary(i) && !frozen[i]).collect();
        let mut refined = cand.clone();
        picard_refine(grid, &mut refined, f, eta, &free, 6, grid.node_count());
        if refined
            .iter()
            .all(|&v| v.is_finite() && v >= -1e-13 * sup_phi && v <= sup_phi * (1.0 + 1e-13))
        {
            for v in refined.iter_mut() {
                *v = v.clamp(0.0, sup_phi);
            }
            if assemble_energy(grid, &refined, f, 0.0, 1.0)? <= assemble_energy(grid, &cand, f, 0.0, 1.0)? {
                cand = refined;
            }
        }
        let sharp = assemble_energy_sharp(grid, &cand, f, lambda)?;
        if best.as_ref().map_or(true, |(e, _, _)| sharp < *e) {
            best = Some((sharp, cand, tau));
        }
    }
    Ok(best.expect("nonempty threshold sweep"))
}

/// Max |residual| over interior nodes whose whole nodal patch is positive.
pub fn support_residual_max(grid: &Grid, u: &Field, f: &GFunction, eta: f64) -> f64 {
    let res = g_laplacian_residual(grid, u, f, eta);
    let mut patch_positive = vec![true; grid.node_count()];
    for el in grid.elements() {
        let any_zero = (0..el.nn).any(|k| u.values()[el.nodes[k]] <= 0.0);
        if any_zero {
            for k in 0..el.nn {
                patch_positive[el.nodes[k]] = false;
            }
        }
    }
    let mut max = 0.0f64;
    for i in 0..grid.node_count() {
        if !grid.is_boundary(i) && patch_positive[i] && u.values()[i] > 0.0 {
            max = max.max(res.values()[i].abs());
        }
    }
    max
}

/// Minimize `Σ |T| G(|∇v|)` over fields agreeing with `u` outside
/// `region`; the descent starts at `u` itself, so the gradient energy
/// never increases. Errors if the region touches the grid boundary or
/// the replacement's residual stays large.
pub fn harmonic_replacement(
    grid: &Arc<Grid>,
    u: &Field,
    f: &GFunction,
    region: &[usize],
    max_iters: usize,
) -> Result<Field> {
    if region.is_empty() {
        return Ok(u.clone());
    }
    let mut frozen = vec![true; grid.node_count()];
    for &i in region {
        if i >= grid.node_count() {
            return Err(Error::InvalidArgument(format!("region node {i} out of range")));
        }
        if grid.is_boundary(i) {
            return Err(Error::InvalidArgument("region must be strictly interior".into()));
        }
        frozen[i] = false;
    }
    let scale: f64 = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let eta = 1e-12 * scale / grid.h();
    let obj = Objective {
        grid,
        f,
        lambda: 0.0,
        eps: 1.0,
        eta,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        frozen: Some(&frozen),
    };
    let mut v = u.values().to_vec();
    descend(&obj, &mut v, max_iters, 1e-14, 120, StepRule::Armijo);
    // Linearized refinement; the replacement must not raise the gradient
    // energy above the descent iterate's, so it is guarded.
    let free: Vec<bool> = frozen.iter().map(|&fz| !fz).collect();
    let before = assemble_energy(grid, &v, f, 0.0, 1.0)?;
    let mut refined = v.clone();
    picard_refine(grid, &mut refined, f, eta, &free, 20, 4 * grid.node_count());
    if refined.iter().all(|x| x.is_finite()) && assemble_energy(grid, &refined, f, 0.0, 1.0)? <= before {
        v = refined;
    }
    let v = Field::from_values(grid.clone(), v)?;

    // Residual restricted to the region, scaled by the flux there.
    let res = g_laplacian_residual(grid, &v, f, eta);
    let mut res_max = 0.0f64;
    let mut flux_scale = 0.0f64;
    for &i in region {
        res_max = res_max.max(res.values()[i].abs());
    }
    for el in grid.elements() {
        if (0..el.nn).any(|k| !frozen[el.nodes[k]]) {
            let [gx, gy] = el.gradient(v.values());
            flux_scale = flux_scale.max(f.g(gx.hypot(gy))?);
        }
    }
    if res_max > 1e-5 * flux_scale.max(1e-3 * scale) {
        return Err(Error::Numerical(format!(
            "harmonic replacement did not converge: residual {res_max:.3e}, flux scale {flux_scale:.3e}"
        )));
    }
    Ok(v)
}

/// Report of the ordered-boundary comparison: both gradient-part
/// minimizers and the worst violation of `u_low ≤ u_high`.
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub u_low: Field,
    pub u_high: Field,
    pub max_violation: f64,
}

/// Solve the `λ = 0` problem for two ordered boundary data sets on copies
/// of `grid` and report `max(u_low − u_high)`.
pub fn comparison_check(
    grid: &Grid,
    f: &GFunction,
    phi0_low: &[f64],
    phi0_high: &[f64],
    max_iters: usize,
) -> Result<ComparisonReport> {
    let mut low = grid.clone();
    low.set_phi0_values(phi0_low)?;
    let mut high = grid.clone();
    high.set_phi0_values(phi0_high)?;
    for i in 0..grid.node_count() {
        if grid.is_boundary(i) && low.phi0()[i] > high.phi0()[i] {
            return Err(Error::InvalidArgument(format!(
                "boundary data not ordered at node {i}: {} > {}",
                low.phi0()[i],
                high.phi0()[i]
            )));
        }
    }
    let u_low = solve_harmonic(&Arc::new(low), f, max_iters)?;
    let u_high = solve_harmonic(&Arc::new(high), f, max_iters)?;
    let max_violation = u_low
        .values()
        .iter()
        .zip(u_high.values())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport { u_low, u_high, max_violation })
}

/// Barrier evaluation report for `w_μ = ε e^{-μ|x|²}` on the annulus.
#[derive(Clone, Debug, Serialize)]
pub struct BarrierReport {
    pub mu: f64,
    pub min_value: f64,
    pub min_radius: f64,
    /// First sampled radius (from `r2` upward) where `L w_μ ≤ 0`.
    pub first_failing_radius: Option<f64>,
}

/// Suggested `μ` making `L w_μ > 0` on the annulus `r2 < |x| < r1`:
/// `(1+margin) · K / (4 δ r2²)` with `K = 2N` for `g₀ ≤ 1` and
/// `K = 2(g₀−1) + 2N` otherwise.
pub fn suggest_barrier_mu(f: &GFunction, n_dim: usize, r2: f64, margin: f64) -> f64 {
    let n = n_dim as f64;
    let k = if f.g0() > 1.0 { 2.0 * (f.g0() - 1.0) + 2.0 * n } else { 2.0 * n };
    (1.0 + margin) * k / (4.0 * f.delta() * r2 * r2)
}

/// Evaluate the radial expression of `L w_μ`, `w_μ = ε e^{-μ|x|²}`, at
/// `n_samples` radii inside `(r2, r1)`:
///
/// ```text
///   L w_μ(ρ) = g(q)/(2ρ) · [ R(q) · 4μρ² − 2(R(q) − 1) − 2N ],
///   q = |∇w_μ| = 2εμρ e^{-μρ²},  R(q) = q g'(q)/g(q).
/// ```
pub fn barrier_check(
    f: &GFunction,
    eps_amp: f64,
    mu: f64,
    r1: f64,
    r2: f64,
    n_dim: usize,
    n_samples: usize,
) -> Result<BarrierReport> {
    if !(r1 > r2 && r2 > 0.0 && eps_amp > 0.0 && mu > 0.0 && n_samples > 0) {
        return Err(Error::InvalidArgument(format!(
            "barrier needs r1 > r2 > 0, eps > 0, mu > 0, samples > 0; got r1={r1} r2={r2} eps={eps_amp} mu={mu}"
        )));
    }
    let n = n_dim as f64;
    let mut min_value = f64::INFINITY;
    let mut min_radius = r2;
    let mut first_failing = None;
    for i in 0..n_samples {
        let rho = r2 + (i as f64 + 0.5) * (r1 - r2) / n_samples as f64;
        let q = 2.0 * eps_amp * mu * rho * (-mu * rho * rho).exp();
        let ratio = q * f.g_prime(q)? / f.g(q)?;
        let bracket = ratio * 4.0 * mu * rho * rho - 2.0 * (ratio - 1.0) - 2.0 * n;
        let value = f.g(q)? / (2.0 * rho) * bracket;
        if value < min_value {
            min_value = value;
            min_radius = rho;
        }
        if value <= 0.0 && first_failing.is_none() {
            first_failing = Some(rho);
        }
    }
    Ok(BarrierReport { mu, min_value, min_radius, first_failing_radius: first_failing })
}

/// Discrete form of the Poincaré-type bound for fields vanishing on the
/// boundary: returns `(Σ |T| G(|ū_T|/R), Σ |T| G(|∇u_T|))` with
/// `R = diam Ω`; the first never exceeds the second.
pub fn poincare_check(grid: &Grid, u: &Field, f: &GFunction) -> Result<(f64, f64)> {
    let r = grid.diameter();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for el in grid.elements() {
        let [gx, gy] = el.gradient(u.values());
        rhs += el.measure * f.big_g(gx.hypot(gy))?;
        lhs += el.measure * f.big_g(el.mean(u.values()).abs() / r)?;
    }
    Ok((lhs, rhs))
}

/// Measured Caccioppoli-type quotient for a discrete solution `v`:
/// `(Σ_{T ⊂ B_r} |T| G(|∇v|), Σ_{T ⊂ B_{3r/2}} |T| G(|v̄|/r))` with boxes
/// centered at `center`.
pub fn cacciopoli_check(
    grid: &Grid,
    u: &Field,
    f: &GFunction,
    center: (f64, f64),
    r: f64,
) -> Result<(f64, f64)> {
    let inside = |e: usize, radius: f64| -> bool {
        let el = grid.element(e);
        (0..el.nn).all(|k| {
            let (x, y) = grid.node_pos(el.nodes[k]);
            (x - center.0).abs() <= radius && (if grid.is_1d() { true } else { (y - center.1).abs() <= radius })
        })
    };
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for e in 0..grid.element_count() {
        let el = grid.element(e);
        if inside(e, r) {
            let [gx, gy] = el.gradient(u.values());
            lhs += el.measure * f.big_g(gx.hypot(gy))?;
        }
        if inside(e, 1.5 * r) {
            rhs += el.measure * f.big_g(el.mean(u.values()).abs() / r)?;
        }
    }
    Ok((lhs, rhs))
}

/// The two right-hand-side terms of the replacement inequality, split by
/// the regime `A₁ = {|∇u−∇v| ≤ 2|∇u|}` (weighted `F(|∇u|)|∇u−∇v|²`) and
/// `A₂` (weighted `G(|∇u−∇v|)`), together with the left-hand side
/// `Σ (G(|∇u|) − G(|∇v|))` over the elements touching `region`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReplacementTerms {
    pub lhs: f64,
    pub a1_term: f64,
    pub a2_term: f64,
}

pub fn replacement_terms(
    grid: &Grid,
    u: &Field,
    v: &Field,
    f: &GFunction,
    region: &[usize],
) -> Result<ReplacementTerms> {
    let mut in_region = vec![false; grid.node_count()];
    for &i in region {
        in_region[i] = true;
    }
    let mut lhs = 0.0;
    let mut a1 = 0.0;
    let mut a2 = 0.0;
    for el in grid.elements() {
        if !(0..el.nn).any(|k| in_region[el.nodes[k]]) {
            continue;
        }
        let [ux, uy] = el.gradient(u.values());
        let [vx, vy] = el.gradient(v.values());
        let tu = ux.hypot(uy);
        let tv = vx.hypot(vy);
        let diff = (ux - vx).hypot(uy - vy);
        lhs += el.measure * (f.big_g(tu)? - f.big_g(tv)?);
        if diff == 0.0 {
            continue;
        }
        if diff <= 2.0 * tu {
            a1 += el.measure * (f.g(tu)? / tu) * diff * diff;
        } else {
            a2 += el.measure * f.big_g(diff)?;
        }
    }
    Ok(ReplacementTerms { lhs, a1_term: a1, a2_term: a2 })
}
