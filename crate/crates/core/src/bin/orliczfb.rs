//! Batch front-end: `gcheck`, `lambda-star`, `solve1d`, `solve2d`,
//! `verify`, `blowup`.
//!
//! Exit codes: 0 = pass, 1 = numerical failure (artifacts still
//! written), 2 = usage/config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use orliczfb::analysis;
use orliczfb::config::{parse_mode, GcheckSpec, RunConfig};
use orliczfb::gfunction::log_grid;
use orliczfb::grid::Field;
use orliczfb::oracle1d;
use orliczfb::solver;
use orliczfb::Error;

#[derive(Parser)]
#[command(name = "orliczfb", version, about = "Free-boundary energy minimization and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Parser)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports and fields.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the ellipticity condition and the inequality battery.
    Gcheck(CommonArgs),
    /// Print the free-boundary slope and its residual.
    LambdaStar(CommonArgs),
    /// Exact 1D minimizer cross-checked against the nodal brute force.
    Solve1d(CommonArgs),
    /// Minimize on the 2D grid and write the field file.
    Solve2d(CommonArgs),
    /// Measure a field file against the weak-solution conditions.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Field file to verify.
        #[arg(long)]
        field: PathBuf,
        /// minimizer | weak
        #[arg(long)]
        mode: Option<String>,
    },
    /// Rescale around an interface point over a radius schedule.
    Blowup {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        field: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gcheck(c) => cmd_gcheck(&c),
        Command::LambdaStar(c) => cmd_lambda_star(&c),
        Command::Solve1d(c) => cmd_solve1d(&c),
        Command::Solve2d(c) => cmd_solve2d(&c),
        Command::Verify { common, field, mode } => cmd_verify(&common, &field, mode.as_deref()),
        Command::Blowup { common, field } => cmd_blowup(&common, &field),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_)
                | Error::InvalidFile(_)
                | Error::InvalidArgument(_)
                | Error::DimensionMismatch(_)
                | Error::Domain { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn ensure_out(dir: &Path) -> orliczfb::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> orliczfb::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).expect("serializable") + "\n")?;
    Ok(())
}

fn cmd_gcheck(c: &CommonArgs) -> orliczfb::Result<ExitCode> {
    let cfg = RunConfig::load(&c.config)?;
    let f = cfg.gfunction.build()?;
    let gc = cfg.gcheck.clone().unwrap_or_else(GcheckSpec::default);
    let cond = f.check_condition(gc.tmin, gc.tmax, gc.n)?;
    let grid = log_grid(gc.tmin, gc.tmax, gc.n);
    let suite = f.inequality_suite(&grid, &grid)?;
    let tol = 1e-7;
    let pass = cond.bracketed && suite.all_hold(tol);
    let report = json!({
        "family": f.describe(),
        "delta": f.delta(),
        "g0": f.g0(),
        "condition": cond,
        "inequalities": suite,
        "min_slack": suite.min_slack(),
        "slack_tolerance": tol,
        "pass": pass,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    ensure_out(&c.out)?;
    write_json(&c.out.join("gcheck.json"), &report)?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_lambda_star(c: &CommonArgs) -> orliczfb::Result<ExitCode> {
    let cfg = RunConfig::load(&c.config)?;
    let f = cfg.gfunction.build()?;
    let ls = f.lambda_star(cfg.lambda)?;
    let residual = (f.phi(ls)? - cfg.lambda).abs();
    let pass = residual <= 1e-10 * cfg.lambda.max(1.0);
    println!("lambda_star = {ls}");
    println!("residual = {residual:e}");
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_solve1d(c: &CommonArgs) -> orliczfb::Result<ExitCode> {
    let cfg = RunConfig::load(&c.config)?;
    let f = cfg.gfunction.build()?;
    let spec = cfg
        .oracle1d
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("solve1d needs an [oracle1d] section".into()))?;
    let exact = oracle1d::exact_solve_1d(spec.a, spec.b, spec.length, &f, cfg.lambda)?;
    let brute = oracle1d::brute_force_1d(spec.a, spec.b, spec.length, &f, cfg.lambda, spec.n)?;

    let energy_tol = 3.0 / spec.n as f64;
    let fb_tol = 2.0 / (spec.n - 1) as f64;
    let fb_exact = exact.free_boundaries(spec.length);
    let fb_brute = brute.free_boundaries(spec.length);
    let fb_agree = fb_exact.len() == fb_brute.len()
        && fb_exact.iter().zip(&fb_brute).all(|(a, b)| (a - b).abs() <= fb_tol);
    let energy_agree = (exact.energy - brute.energy).abs() <= energy_tol;

    let report = json!({
        "exact": exact,
        "brute_force": brute,
        "energy_tolerance": energy_tol,
        "fb_tolerance": fb_tol,
        "energy_agree": energy_agree,
        "fb_agree": fb_agree,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    ensure_out(&c.out)?;
    write_json(&c.out.join("solve1d.json"), &report)?;
    if let Some(samples) = spec.csv_samples {
        let mut csv = String::from("x,u\n");
        for k in 0..samples {
            let x = spec.length * k as f64 / (samples - 1).max(1) as f64;
            csv.push_str(&format!("{x},{}\n", exact.eval(x)));
        }
        std::fs::write(c.out.join("solve1d.csv"), csv)?;
    }
    Ok(if energy_agree && fb_agree { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_solve2d(c: &CommonArgs) -> orliczfb::Result<ExitCode> {
    let cfg = RunConfig::load(&c.config)?;
    let f = cfg.gfunction.build()?;
    let mut opts = cfg.solve.to_options()?;
    if let Some(seed) = c.seed {
        opts.seed = seed;
    }
    ensure_out(&c.out)?;

    // Optional refinement sweep against the strip oracle.
    if let Some(sweep) = &cfg.solve.sweep_nx {
        let csv = run_sweep(&cfg, &f, &opts, sweep, &c.out)?;
        std::fs::write(c.out.join("sweep.csv"), csv)?;
    }

    let grid = Arc::new(cfg.build_grid()?);
    let (u, diag) = solver::minimize(&grid, &f, cfg.lambda, &opts)?;
    let field_path = c.out.join("field.txt");
    u.write(&field_path)?;
    let aborted = diag.stages.iter().any(|s| s.aborted);
    let report = json!({
        "lambda": cfg.lambda,
        "diagnostics": diag,
        "field": field_path,
    });
    write_json(&c.out.join("solve2d.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    Ok(if aborted { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn run_sweep(
    cfg: &RunConfig,
    f: &orliczfb::GFunction,
    opts: &solver::SolveOptions,
    sweep: &[usize],
    out: &Path,
) -> orliczfb::Result<String> {
    let base = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("sweep needs a [grid] section".into()))?;
    let ls = f.lambda_star(cfg.lambda)?;
    let mut csv = String::from("h,energy,sup_error,fb_error,fb_gradient_error\n");
    for &nx in sweep {
        let ny = ((nx - 1) * base.ny.max(2).saturating_sub(1) / (base.nx - 1)).max(1) + 1;
        let mut spec = cfg.clone();
        spec.grid = Some(orliczfb::config::GridSpec { nx, ny, lx: base.lx, ly: base.ly });
        let grid = Arc::new(spec.build_grid()?);
        let (u, diag) = solver::minimize(&grid, f, cfg.lambda, opts)?;
        // Strip oracle: the 1D exact profile extended constantly in y.
        let a = grid.phi0()[0];
        let prof = oracle1d::exact_solve_1d(a, 0.0, base.lx, f, cfg.lambda)?;
        let mut sup_err = 0.0f64;
        for idx in 0..grid.node_count() {
            let (x, _) = grid.node_pos(idx);
            sup_err = sup_err.max((u.values()[idx] - prof.eval(x)).abs());
        }
        let fb = analysis::extract_free_boundary(&u);
        let fb_oracle = prof.free_boundaries(base.lx);
        let fb_err = if fb_oracle.is_empty() || fb.is_empty() {
            f64::NAN
        } else {
            let mean_x: f64 = fb.points.iter().map(|p| p[0]).sum::<f64>() / fb.len() as f64;
            (mean_x - fb_oracle[0]).abs()
        };
        let stats = analysis::fb_gradient_stats(&u, f, cfg.lambda, &fb, 2.0 * grid.h())?;
        let grad_err = if ls > 0.0 { (stats.mean - ls).abs() } else { 0.0 };
        csv.push_str(&format!("{},{},{},{},{}\n", grid.h(), diag.energy_sharp, sup_err, fb_err, grad_err));
        u.write(&out.join(format!("field_{nx}.txt")))?;
    }
    Ok(csv)
}

fn cmd_verify(c: &CommonArgs, field: &Path, mode: Option<&str>) -> orliczfb::Result<ExitCode> {
    let cfg = RunConfig::load(&c.config)?;
    let f = cfg.gfunction.build()?;
    let u = Field::read(field)?;
    let mut vcfg = cfg.verify.to_config()?;
    if let Some(m) = mode {
        vcfg.mode = parse_mode(m)?;
    }
    let report = analysis::weak_solution_check(&u, &f, cfg.lambda, &vcfg)?;
    ensure_out(&c.out)?;
    let value = serde_json::to_value(&report).expect("report");
    write_json(&c.out.join("verify.json"), &value)?;
    println!("{}", serde_json::to_string_pretty(&value).expect("report"));

    // Per-radius CSV tables for plotting.
    let mut csv = String::from("r,min_q,max_q\n");
    for s in &report.nondegeneracy.per_radius {
        csv.push_str(&format!("{},{},{}\n", s.r, s.min, s.max));
    }
    std::fs::write(c.out.join("nondegeneracy.csv"), csv)?;
    let mut csv = String::from("r,min_fraction,max_fraction\n");
    for s in &report.density.per_radius {
        csv.push_str(&format!("{},{},{}\n", s.r, s.min, s.max));
    }
    std::fs::write(c.out.join("density.csv"), csv)?;
    let mut csv = String::from("r,min_ratio,max_ratio\n");
    for s in &report.perimeter.per_radius {
        csv.push_str(&format!("{},{},{}\n", s.r, s.min, s.max));
    }
    std::fs::write(c.out.join("perimeter.csv"), csv)?;
    let mut csv = String::from("rho,sigma_plus,sigma_minus,nu_x,nu_y\n");
    for fl in &report.flatness {
        csv.push_str(&format!("{},{},{},{},{}\n", fl.rho, fl.sigma_plus, fl.sigma_minus, fl.nu[0], fl.nu[1]));
    }
    std::fs::write(c.out.join("flatness.csv"), csv)?;

    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_blowup(c: &CommonArgs, field: &Path) -> orliczfb::Result<ExitCode> {
    let cfg = RunConfig::load(&c.config)?;
    let f = cfg.gfunction.build()?;
    let spec = cfg
        .blowup
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("blowup needs a [blowup] section".into()))?;
    let u = Field::read(field)?;
    let g = u.grid();
    let fb = analysis::extract_free_boundary(&u);
    if fb.is_empty() {
        return Err(Error::Inconclusive("field has no free boundary".into()));
    }
    let x0 = match spec.x0 {
        Some(p) => p,
        None => {
            let (ox, oy) = g.origin();
            let center = [ox + g.lx() / 2.0, oy + g.ly() / 2.0];
            fb.points
                .iter()
                .min_by(|p, q| {
                    let dp = (p[0] - center[0]).hypot(p[1] - center[1]);
                    let dq = (q[0] - center[0]).hypot(q[1] - center[1]);
                    dp.partial_cmp(&dq).unwrap()
                })
                .copied()
                .expect("nonempty interface")
        }
    };
    let ls = f.lambda_star(cfg.lambda)?;
    ensure_out(&c.out)?;
    let mut csv = String::from("rho,sigma_plus,sigma_minus,nu_x,nu_y,plane_sup_dist\n");
    for (k, &rho) in spec.rho.iter().enumerate() {
        let flat = analysis::flatness_measure(&u, &fb, ls, x0, rho)?;
        let rescaled = analysis::blow_up(&u, x0, rho, spec.m)?;
        // Sup distance to the plane profile λ*⟨x, ν⟩⁻ on the unit box.
        let mut sup = 0.0f64;
        let rg = rescaled.grid();
        for idx in 0..rg.node_count() {
            let (x, y) = rg.node_pos(idx);
            if x.hypot(y) > 1.0 {
                continue;
            }
            let plane = ls * (-(x * flat.nu[0] + y * flat.nu[1])).max(0.0);
            sup = sup.max((rescaled.values()[idx] - plane).abs());
        }
        csv.push_str(&format!(
            "{rho},{},{},{},{},{sup}\n",
            flat.sigma_plus, flat.sigma_minus, flat.nu[0], flat.nu[1]
        ));
        if spec.write_fields {
            rescaled.write(&c.out.join(format!("blowup_{k}.txt")))?;
        }
    }
    std::fs::write(c.out.join("blowup.csv"), &csv)?;
    println!("{csv}");
    Ok(ExitCode::SUCCESS)
}
