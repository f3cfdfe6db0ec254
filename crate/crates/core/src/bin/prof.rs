use orliczfb::gfunction::GFunction;
use orliczfb::grid::Grid;
use orliczfb::solver::{minimize, SolveOptions};
use orliczfb::analysis;
use std::sync::Arc;
use std::time::Instant;

fn strip(nper: usize, p: f64, lambda: f64) {
    let nx = 2 * nper + 1;
    let ny = nper + 1;
    let mut grid = Grid::rectangle(nx, ny, 2.0, 1.0).unwrap();
    grid.set_phi0(|x, _| (1.0 - x).max(0.0)).unwrap();
    let grid = Arc::new(grid);
    let f = GFunction::power(p).unwrap();
    let opts = SolveOptions { restarts: 1, ..SolveOptions::default() };
    let t0 = Instant::now();
    let (u, diag) = minimize(&grid, &f, lambda, &opts).unwrap();
    let dt = t0.elapsed();
    let mut sup = 0.0f64;
    for idx in 0..grid.node_count() {
        let (x, _) = grid.node_pos(idx);
        sup = sup.max((u.values()[idx] - (1.0 - x).max(0.0)).abs());
    }
    let fb = analysis::extract_free_boundary(&u);
    let mean_x = fb.points.iter().map(|p| p[0]).sum::<f64>() / fb.len().max(1) as f64;
    let stats = analysis::fb_gradient_stats(&u, &f, lambda, &fb, 2.0 * grid.h()).unwrap();
    println!(
        "p={p} h=1/{nper}: sup={sup:.6} fb_err={:.6} grad_mean={:.6} resid={:.2e} E={:.6} {dt:?}",
        (mean_x - 1.0).abs(), stats.mean, diag.residual_max, diag.energy_sharp
    );
}

fn main() {
    strip(32, 2.0, 0.5);
    strip(64, 2.0, 0.5);
    strip(128, 2.0, 0.5);
    strip(32, 3.0, 2.0 / 3.0);
    strip(64, 3.0, 2.0 / 3.0);
    strip(128, 3.0, 2.0 / 3.0);
}
