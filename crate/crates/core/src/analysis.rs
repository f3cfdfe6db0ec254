//! Free-boundary extraction and quantitative measurements.
//!
//! All per-point set measurements (nondegeneracy averages, positivity
//! fractions, interface length, boundary flux) use axis-aligned square
//! "balls" `{|x − c|_∞ ≤ r}`: on them the plane profile `λ*⟨x,ν⟩⁻`
//! produces direction-independent constants that coincide with the 1D
//! interval values (e.g. the γ=2 nondegeneracy average is `λ*/√6` in any
//! dimension), so the same oracles serve 1D and 2D. Node membership is
//! decided by center distance and element measure is attributed
//! fractionally by vertex count.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::grid::{Field, Grid};
use crate::solver;

/// Discrete `∂{u > 0}`: midpoints of grid edges joining a positive node
/// to a zero node, with fitted normals, plus the marching interface
/// segments used for length measurements.
#[derive(Clone, Debug, Default)]
pub struct FreeBoundarySet {
    pub points: Vec<[f64; 2]>,
    /// Unit normal pointing from `{u > 0}` into `{u = 0}`; `[0, 0]` where
    /// the local fit is ill-conditioned.
    pub normals: Vec<[f64; 2]>,
    pub segments: Vec<([f64; 2], [f64; 2])>,
}

impl FreeBoundarySet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Total interface length inside the square ball `B_r(c)` (segments
    /// clipped to the box). In 1D this is the number of interface points
    /// in the interval, matching the zero-dimensional count.
    pub fn length_in_box(&self, center: [f64; 2], r: f64, one_d: bool) -> f64 {
        if one_d {
            return self
                .points
                .iter()
                .filter(|p| (p[0] - center[0]).abs() <= r)
                .count() as f64;
        }
        let mut total = 0.0;
        for (p, q) in &self.segments {
            total += clip_segment_to_box(*p, *q, center, r);
        }
        total
    }
}

fn clip_segment_to_box(p: [f64; 2], q: [f64; 2], c: [f64; 2], r: f64) -> f64 {
    // Liang-Barsky style parametric clipping of [p, q] to the box.
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let d = [q[0] - p[0], q[1] - p[1]];
    for axis in 0..2 {
        let lo = c[axis] - r;
        let hi = c[axis] + r;
        if d[axis].abs() < 1e-300 {
            if p[axis] < lo || p[axis] > hi {
                return 0.0;
            }
        } else {
            let mut ta = (lo - p[axis]) / d[axis];
            let mut tb = (hi - p[axis]) / d[axis];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return 0.0;
            }
        }
    }
    (t1 - t0) * d[0].hypot(d[1])
}

/// Extract the discrete free boundary of a post-thresholded field
/// (zeros exact). Deterministic; empty when `u > 0` everywhere or
/// `u ≡ 0`.
pub fn extract_free_boundary(u: &Field) -> FreeBoundarySet {
    let g = u.grid();
    let v = u.values();
    let pos = |i: usize| v[i] > 0.0;
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut point_sign: Vec<[f64; 2]> = Vec::new(); // direction positive -> zero

    let mut push_edge = |i0: usize, i1: usize| {
        if pos(i0) != pos(i1) {
            let (x0, y0) = g.node_pos(i0);
            let (x1, y1) = g.node_pos(i1);
            points.push([0.5 * (x0 + x1), 0.5 * (y0 + y1)]);
            let s = if pos(i0) { 1.0 } else { -1.0 };
            point_sign.push([s * (x1 - x0), s * (y1 - y0)]);
        }
    };

    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let idx = g.idx(i, j);
            if i + 1 < g.nx() {
                push_edge(idx, g.idx(i + 1, j));
            }
            if j + 1 < g.ny() {
                push_edge(idx, g.idx(i, j + 1));
            }
        }
    }

    // Marching-squares segments on the binary indicator, crossing edges
    // at midpoints.
    let mut segments = Vec::new();
    if !g.is_1d() {
        for j in 0..g.ny() - 1 {
            for i in 0..g.nx() - 1 {
                let corners = [
                    g.idx(i, j),
                    g.idx(i + 1, j),
                    g.idx(i + 1, j + 1),
                    g.idx(i, j + 1),
                ];
                let code = (pos(corners[0]) as usize)
                    | (pos(corners[1]) as usize) << 1
                    | (pos(corners[2]) as usize) << 2
                    | (pos(corners[3]) as usize) << 3;
                if code == 0 || code == 15 {
                    continue;
                }
                let (x0, y0) = g.node_pos(corners[0]);
                let hx = g.hx();
                let hy = g.hy();
                // Edge midpoints: bottom, right, top, left.
                let mids = [
                    [x0 + 0.5 * hx, y0],
                    [x0 + hx, y0 + 0.5 * hy],
                    [x0 + 0.5 * hx, y0 + hy],
                    [x0, y0 + 0.5 * hy],
                ];
                let crossed: Vec<usize> = (0..4)
                    .filter(|&e| {
                        let (a, b) = (corners[e], corners[(e + 1) % 4]);
                        pos(a) != pos(b)
                    })
                    .collect();
                match crossed.len() {
                    2 => segments.push((mids[crossed[0]], mids[crossed[1]])),
                    4 => {
                        segments.push((mids[0], mids[1]));
                        segments.push((mids[2], mids[3]));
                    }
                    _ => {}
                }
            }
        }
    }

    // Normals by local least-squares fit (principal direction of the
    // point cloud within 3h), oriented from positive to zero side.
    let h = g.h();
    let radius = 3.0 * h;
    let mut normals = vec![[0.0f64; 2]; points.len()];
    for (pi, p) in points.iter().enumerate() {
        if g.is_1d() {
            let s = point_sign[pi];
            let n = s[0].abs().max(1e-300);
            normals[pi] = [s[0] / n, 0.0];
            continue;
        }
        let mut neigh: Vec<[f64; 2]> = Vec::new();
        for q in &points {
            if (q[0] - p[0]).hypot(q[1] - p[1]) <= radius {
                neigh.push(*q);
            }
        }
        if neigh.len() < 2 {
            continue;
        }
        let nn = neigh.len() as f64;
        let mx = neigh.iter().map(|q| q[0]).sum::<f64>() / nn;
        let my = neigh.iter().map(|q| q[1]).sum::<f64>() / nn;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for q in &neigh {
            let dx = q[0] - mx;
            let dy = q[1] - my;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        // Principal eigenvector of the 2x2 covariance = tangent direction.
        let tr = sxx + syy;
        let det = sxx * syy - sxy * sxy;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let l1 = tr / 2.0 + disc;
        let tangent = if sxy.abs() > 1e-300 {
            [l1 - syy, sxy]
        } else if sxx >= syy {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let tn = tangent[0].hypot(tangent[1]);
        if tn < 1e-300 || l1 <= 0.0 {
            continue;
        }
        let mut nu = [-tangent[1] / tn, tangent[0] / tn];
        // Orientation: ν agrees with the positive-to-zero edge direction.
        let s = point_sign[pi];
        if nu[0] * s[0] + nu[1] * s[1] < 0.0 {
            nu = [-nu[0], -nu[1]];
        }
        normals[pi] = nu;
    }

    FreeBoundarySet { points, normals, segments }
}

/// Max `|∇u_T|` over elements whose nodes all lie at distance >= `inset`
/// from the domain boundary.
pub fn measure_lipschitz(u: &Field, inset: f64) -> f64 {
    let g = u.grid();
    let mut max = 0.0f64;
    for el in g.elements() {
        let ok = (0..el.nn).all(|k| {
            let (x, y) = g.node_pos(el.nodes[k]);
            let (ox, oy) = g.origin();
            let dx = (x - ox).min(ox + g.lx() - x);
            let dy = if g.is_1d() { f64::INFINITY } else { (y - oy).min(oy + g.ly() - y) };
            dx.min(dy) >= inset
        });
        if ok {
            let [gx, gy] = el.gradient(u.values());
            max = max.max(gx.hypot(gy));
        }
    }
    max
}

/// Mean of `u^γ` over the square ball by fractional element attribution;
/// returns `(mean, covered volume)`.
fn box_mean_pow(u: &Field, center: [f64; 2], r: f64, gamma: f64) -> (f64, f64) {
    let g = u.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for_elements_near(g, center, r, |el| {
        let share = el.measure / el.nn as f64;
        for k in 0..el.nn {
            let (x, y) = g.node_pos(el.nodes[k]);
            if (x - center[0]).abs() <= r && (g.is_1d() || (y - center[1]).abs() <= r) {
                num += share * u.values()[el.nodes[k]].powf(gamma);
                den += share;
            }
        }
    });
    if den == 0.0 {
        (0.0, 0.0)
    } else {
        (num / den, den)
    }
}

/// Positive-volume fraction of the square ball.
fn box_positive_fraction(u: &Field, center: [f64; 2], r: f64) -> f64 {
    let g = u.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for_elements_near(g, center, r, |el| {
        let share = el.measure / el.nn as f64;
        for k in 0..el.nn {
            let (x, y) = g.node_pos(el.nodes[k]);
            if (x - center[0]).abs() <= r && (g.is_1d() || (y - center[1]).abs() <= r) {
                den += share;
                if u.values()[el.nodes[k]] > 0.0 {
                    num += share;
                }
            }
        }
    });
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Visit only the elements whose bounding cells intersect the box.
fn for_elements_near(g: &Grid, center: [f64; 2], r: f64, mut visit: impl FnMut(&crate::grid::Element)) {
    let (ox, oy) = g.origin();
    let i0 = (((center[0] - r - ox) / g.hx()).floor() - 1.0).max(0.0) as usize;
    let i1 = ((((center[0] + r - ox) / g.hx()).ceil() + 1.0).max(0.0) as usize).min(g.nx().saturating_sub(2));
    if g.is_1d() {
        for i in i0..=i1 {
            let el = g.element(i);
            visit(&el);
        }
        return;
    }
    let j0 = (((center[1] - r - oy) / g.hy()).floor() - 1.0).max(0.0) as usize;
    let j1 = ((((center[1] + r - oy) / g.hy()).ceil() + 1.0).max(0.0) as usize).min(g.ny().saturating_sub(2));
    let cw = g.nx() - 1;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let cell = j * cw + i;
            for t in 0..2 {
                let el = g.element(2 * cell + t);
                visit(&el);
            }
        }
    }
}

/// Whether the square ball `B_r(c)` lies inside the grid rectangle.
fn box_inside(g: &Grid, center: [f64; 2], r: f64) -> bool {
    let (ox, oy) = g.origin();
    let x_ok = center[0] - r >= ox - 1e-12 && center[0] + r <= ox + g.lx() + 1e-12;
    if g.is_1d() {
        return x_ok;
    }
    x_ok && center[1] - r >= oy - 1e-12 && center[1] + r <= oy + g.ly() + 1e-12
}

/// Per-radius extrema of a quantity measured at every admissible free
/// boundary point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadiusStat {
    pub r: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

fn radius_stats(
    u: &Field,
    fb: &FreeBoundarySet,
    radii: &[f64],
    mut value: impl FnMut(&Field, [f64; 2], f64) -> Option<f64>,
) -> Vec<RadiusStat> {
    let g = u.grid();
    let mut stats = Vec::new();
    for &r in radii {
        if r < 4.0 * g.h() {
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut count = 0usize;
        for p in &fb.points {
            if !box_inside(g, *p, r) {
                continue;
            }
            if let Some(v) = value(u, *p, r) {
                min = min.min(v);
                max = max.max(v);
                count += 1;
            }
        }
        if count > 0 {
            stats.push(RadiusStat { r, min, max, count });
        }
    }
    stats
}

/// Nondegeneracy quotients `Q(x, r) = (1/r) (⨍_{B_r(x)} u^γ)^{1/γ}` over
/// free boundary points and admissible radii.
pub fn verify_nondegeneracy(
    u: &Field,
    fb: &FreeBoundarySet,
    radii: &[f64],
    gamma: f64,
) -> Result<Vec<RadiusStat>> {
    if gamma <= 1.0 {
        return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(radius_stats(u, fb, radii, |u, p, r| {
        let (mean, vol) = box_mean_pow(u, p, r, gamma);
        if vol == 0.0 {
            None
        } else {
            Some(mean.powf(1.0 / gamma) / r)
        }
    }))
}

/// Positive-volume fractions `|B_r ∩ {u>0}| / |B_r|` over free boundary
/// points and admissible radii.
pub fn verify_density(u: &Field, fb: &FreeBoundarySet, radii: &[f64]) -> Vec<RadiusStat> {
    radius_stats(u, fb, radii, |u, p, r| Some(box_positive_fraction(u, p, r)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FbGradientStats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub count: usize,
    pub lambda_star: f64,
}

/// Statistics of `|∇u_T|` over positive elements within `collar` of the
/// free boundary (an element is positive when some vertex is).
pub fn fb_gradient_stats(
    u: &Field,
    f: &GFunction,
    lambda: f64,
    fb: &FreeBoundarySet,
    collar: f64,
) -> Result<FbGradientStats> {
    let g = u.grid();
    let ls = f.lambda_star(lambda)?;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut count = 0usize;
    if !fb.is_empty() {
        for e in 0..g.element_count() {
            let el = g.element(e);
            if !(0..el.nn).any(|k| u.values()[el.nodes[k]] > 0.0) {
                continue;
            }
            let (cx, cy) = g.element_centroid(e);
            let near = fb
                .points
                .iter()
                .any(|p| (p[0] - cx).hypot(p[1] - cy) <= collar);
            if !near {
                continue;
            }
            let [gx, gy] = el.gradient(u.values());
            let t = gx.hypot(gy);
            sum += t;
            min = min.min(t);
            max = max.max(t);
            count += 1;
        }
    }
    Ok(FbGradientStats {
        mean: if count > 0 { sum / count as f64 } else { 0.0 },
        max: if count > 0 { max } else { 0.0 },
        min: if count > 0 { min } else { 0.0 },
        count,
        lambda_star: ls,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuEstimate {
    pub qu: f64,
    /// Outward flux of `F_η(|∇u|)∇u` through the box boundary restricted
    /// to `{u > 0}`.
    pub flux: f64,
    /// Interface length inside the box.
    pub fb_length: f64,
}

/// Flux-based estimate of the interface measure density `q_u` on the
/// patch `B_r(x0)`: boundary flux divided by interface length.
pub fn estimate_qu(
    u: &Field,
    f: &GFunction,
    eta: f64,
    fb: &FreeBoundarySet,
    x0: [f64; 2],
    r: f64,
) -> Result<QuEstimate> {
    let g = u.grid();
    if r < 4.0 * g.h() {
        return Err(Error::InvalidArgument(format!("patch radius {r} below 4h = {}", 4.0 * g.h())));
    }
    if g.is_1d() {
        // Flux through the two interval ends, restricted to {u > 0}.
        let mut flux = 0.0;
        for (x, n) in [(x0[0] - r, -1.0), (x0[0] + r, 1.0)] {
            if u.interp(x, 0.0) > 0.0 {
                let el = g.element(u.element_at(x, 0.0));
                let [gx, _] = el.gradient(u.values());
                flux += f.flux_weight(gx.abs(), eta) * gx * n;
            }
        }
        let fb_len = fb.length_in_box(x0, r, true);
        if fb_len == 0.0 {
            return Err(Error::Inconclusive("no interface inside the patch".into()));
        }
        return Ok(QuEstimate { qu: flux / fb_len, flux, fb_length: fb_len });
    }

    let ds = g.hx().min(g.hy()) / 6.0;
    let mut flux = 0.0;
    // Walk the four box edges with outward normals.
    let edges: [([f64; 2], [f64; 2], [f64; 2]); 4] = [
        ([x0[0] - r, x0[1] - r], [1.0, 0.0], [0.0, -1.0]), // bottom
        ([x0[0] + r, x0[1] - r], [0.0, 1.0], [1.0, 0.0]),  // right
        ([x0[0] + r, x0[1] + r], [-1.0, 0.0], [0.0, 1.0]), // top
        ([x0[0] - r, x0[1] + r], [0.0, -1.0], [-1.0, 0.0]), // left
    ];
    let side = 2.0 * r;
    let steps = (side / ds).ceil() as usize;
    let step = side / steps as f64;
    for (start, dir, normal) in edges {
        for k in 0..steps {
            let s = (k as f64 + 0.5) * step;
            let x = start[0] + dir[0] * s;
            let y = start[1] + dir[1] * s;
            if u.interp(x, y) <= 0.0 {
                continue;
            }
            let el = g.element(u.element_at(x, y));
            let [gx, gy] = el.gradient(u.values());
            let w = f.flux_weight(gx.hypot(gy), eta);
            flux += w * (gx * normal[0] + gy * normal[1]) * step;
        }
    }
    let fb_len = fb.length_in_box(x0, r, false);
    if fb_len == 0.0 {
        return Err(Error::Inconclusive("no interface inside the patch".into()));
    }
    Ok(QuEstimate { qu: flux / fb_len, flux, fb_length: fb_len })
}

/// Interface length per `r^{N-1}` around `x0` for each admissible radius.
pub fn perimeter_growth(u: &Field, fb: &FreeBoundarySet, x0: [f64; 2], radii: &[f64]) -> Vec<(f64, f64)> {
    let g = u.grid();
    let mut out = Vec::new();
    for &r in radii {
        if r < 4.0 * g.h() || !box_inside(g, x0, r) {
            continue;
        }
        let len = fb.length_in_box(x0, r, g.is_1d());
        let denom = if g.is_1d() { 1.0 } else { r };
        out.push((r, len / denom));
    }
    out
}

/// Rescale `u` around `x0`: `v(x) = u(x0 + ρ x)/ρ` sampled bilinearly on
/// an `m × m` grid covering the unit box `[-1, 1]²`.
pub fn blow_up(u: &Field, x0: [f64; 2], rho: f64, m: usize) -> Result<Field> {
    let g = u.grid();
    if rho < 4.0 * g.h() {
        return Err(Error::InvalidArgument(format!("rho {rho} below 4h = {}", 4.0 * g.h())));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    if !box_inside(g, x0, rho) {
        return Err(Error::InvalidArgument("blow-up ball exits the domain".into()));
    }
    let ny = if g.is_1d() { 1 } else { m };
    let mut out = Grid::rectangle(m, ny, 2.0, 2.0)?.with_origin(-1.0, if g.is_1d() { 0.0 } else { -1.0 });
    let gout = out.clone();
    let values: Vec<f64> = (0..gout.node_count())
        .map(|idx| {
            let (xi, yi) = gout.node_pos(idx);
            u.interp(x0[0] + rho * xi, x0[1] + rho * yi) / rho
        })
        .collect();
    out.set_phi0_values(&values)?;
    Field::from_values(std::sync::Arc::new(out), values)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Flatness {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub nu: [f64; 2],
    pub rho: f64,
}

/// Flatness of the interface in `B_ρ(x0)`: the least `σ₊` with `u = 0`
/// beyond `⟨x−x0, ν⟩ ≥ σ₊ρ` and the least `σ₋` with
/// `u ≥ −λ*(⟨x−x0, ν⟩ + σ₋ρ)` below `−σ₋ρ`, both clamped to `[0, 1]`;
/// ν is fitted from the interface points in the ball.
pub fn flatness_measure(
    u: &Field,
    fb: &FreeBoundarySet,
    lambda_star: f64,
    x0: [f64; 2],
    rho: f64,
) -> Result<Flatness> {
    let g = u.grid();
    if lambda_star <= 0.0 {
        return Err(Error::InvalidArgument("flatness needs lambda_star > 0".into()));
    }
    let in_ball: Vec<usize> = (0..fb.points.len())
        .filter(|&i| {
            let p = fb.points[i];
            (p[0] - x0[0]).hypot(p[1] - x0[1]) <= rho
        })
        .collect();
    let needed = if g.is_1d() { 1 } else { 3 };
    if in_ball.len() < needed {
        return Err(Error::Inconclusive(format!(
            "only {} interface points inside the ball, need {needed}",
            in_ball.len()
        )));
    }

    // Fit ν: average of the well-conditioned point normals in the ball.
    let mut nu = [0.0f64, 0.0f64];
    for &i in &in_ball {
        nu[0] += fb.normals[i][0];
        nu[1] += fb.normals[i][1];
    }
    let norm = nu[0].hypot(nu[1]);
    if norm < 1e-9 {
        return Err(Error::Inconclusive("interface normals cancel in the ball".into()));
    }
    nu = [nu[0] / norm, nu[1] / norm];

    let mut sigma_plus = 0.0f64;
    let mut sigma_minus = 0.0f64;
    for idx in 0..g.node_count() {
        let (x, y) = g.node_pos(idx);
        if (x - x0[0]).hypot(y - x0[1]) > rho {
            continue;
        }
        let d = (x - x0[0]) * nu[0] + (y - x0[1]) * nu[1];
        let v = u.values()[idx];
        if v > 0.0 {
            sigma_plus = sigma_plus.max(d / rho);
        }
        if d < 0.0 {
            // u >= λ*(-d - sρ) fails unless s >= (-d - u/λ*)/ρ.
            sigma_minus = sigma_minus.max((-d - v / lambda_star) / rho);
        }
    }
    Ok(Flatness {
        sigma_plus: sigma_plus.clamp(0.0, 1.0),
        sigma_minus: sigma_minus.clamp(0.0, 1.0),
        nu,
        rho,
    })
}

/// Which bounds a verification run asserts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerifyMode {
    /// Both density bounds, gradient mean and max.
    Minimizer,
    /// Lower density bound and gradient upper bound only (the zero set
    /// of a weak solution need not have uniform density).
    Weak,
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub gamma: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub density_c: f64,
    pub perimeter_min: f64,
    pub perimeter_max: f64,
    /// Relative tolerance for the Bernoulli-condition checks.
    pub tau: f64,
    /// Residual threshold relative to `g(λ*)`.
    pub residual_tol: f64,
    pub radii: Option<Vec<f64>>,
    pub qu_radius: Option<f64>,
    pub eta: Option<f64>,
    pub mode: VerifyMode,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            gamma: 2.0,
            c_min: 0.05,
            c_max: 2.0,
            density_c: 0.05,
            perimeter_min: 0.5,
            perimeter_max: 4.0,
            tau: 0.15,
            residual_tol: 1e-6,
            radii: None,
            qu_radius: None,
            eta: None,
            mode: VerifyMode::Minimizer,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegReport {
    pub per_radius: Vec<RadiusStat>,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
    pub inconclusive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub per_radius: Vec<RadiusStat>,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    pub stats: FbGradientStats,
    pub pass_upper: bool,
    pub pass_mean: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuReport {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub radius: f64,
    pub count: usize,
    pub rel_dev: f64,
    pub pass: bool,
    /// The discrete estimate integrates over the full interface, not only
    /// its reduced part; exact for minimizers, a proxy for general weak
    /// solutions.
    pub full_boundary_proxy: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerimeterReport {
    pub per_radius: Vec<RadiusStat>,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TouchingBallReport {
    /// Min over conclusive interface points of the max of `u/dist(·, B)`
    /// over positive nodes near a touching interior zero ball.
    pub min_value: f64,
    pub conclusive_points: usize,
    pub pass: bool,
}

/// Consolidated measurement report for a candidate weak solution.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub mode: VerifyMode,
    pub gamma: f64,
    pub lambda: f64,
    pub lambda_star: f64,
    pub g_lambda_star: f64,
    pub fb_count: usize,
    /// No interface: every condition is vacuous.
    pub vacuous: bool,
    pub lipschitz_max: f64,
    pub radii: Vec<f64>,
    pub residual: ResidualReport,
    pub nondegeneracy: NondegReport,
    pub density: DensityReport,
    pub fb_gradient: GradientReport,
    pub qu: QuReport,
    pub perimeter: PerimeterReport,
    pub flatness: Vec<Flatness>,
    pub touching_ball: Option<TouchingBallReport>,
    pub pass: bool,
}

/// Run the full measurement suite against the weak-solution conditions:
/// vanishing residual on the positivity set, nondegeneracy bounds, the
/// flux identity `q_u = g(λ*)`, the gradient bound `|∇u| ≤ λ*(1+τ)`,
/// and (where interior zero balls exist) the touching-ball growth
/// `limsup u/dist ≥ λ*`.
pub fn weak_solution_check(
    u: &Field,
    f: &GFunction,
    lambda: f64,
    cfg: &VerifyConfig,
) -> Result<PropertyReport> {
    let g = u.grid();
    let h = g.h();
    let ls = f.lambda_star(lambda)?;
    let gls = f.g(ls)?;
    let eta = cfg.eta.unwrap_or(if ls > 0.0 { 1e-6 * ls } else { 1e-12 });

    let fb = extract_free_boundary(u);
    let vacuous = fb.is_empty();

    let radii: Vec<f64> = match &cfg.radii {
        Some(r) => r.clone(),
        None => {
            let cap = if g.is_1d() { g.lx() / 4.0 } else { g.lx().min(g.ly()) / 4.0 };
            let mut r = 4.0 * h;
            let mut list = Vec::new();
            while r <= cap + 1e-12 {
                list.push(r);
                r *= 2.0;
            }
            list
        }
    };

    // Condition (1): residual on the interior of the positivity set.
    let residual_max = solver::support_residual_max(g, u, f, eta);
    let residual_scale = gls.max(f64::MIN_POSITIVE);
    let residual = ResidualReport {
        max: residual_max,
        scale: residual_scale,
        pass: vacuous || residual_max <= cfg.residual_tol * residual_scale,
    };

    // Condition (2): nondegeneracy bounds.
    let nd_stats = if vacuous { Vec::new() } else { verify_nondegeneracy(u, &fb, &radii, cfg.gamma)? };
    let nd_min = nd_stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let nd_max = nd_stats.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    let nondegeneracy = NondegReport {
        inconclusive: !vacuous && nd_stats.is_empty(),
        pass: vacuous || (!nd_stats.is_empty() && nd_min >= cfg.c_min && nd_max <= cfg.c_max),
        min: nd_min,
        max: nd_max,
        per_radius: nd_stats,
    };

    // Density of the positivity set.
    let de_stats = if vacuous { Vec::new() } else { verify_density(u, &fb, &radii) };
    let de_min = de_stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let de_max = de_stats.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    let density_pass = vacuous
        || (!de_stats.is_empty()
            && de_min >= cfg.density_c
            && (cfg.mode == VerifyMode::Weak || de_max <= 1.0 - cfg.density_c));
    let density = DensityReport { per_radius: de_stats, min: de_min, max: de_max, pass: density_pass };

    // Condition (4): gradient bound near the interface.
    let stats = fb_gradient_stats(u, f, lambda, &fb, 2.0 * h)?;
    let fb_gradient = GradientReport {
        pass_upper: vacuous || stats.max <= ls * (1.0 + cfg.tau),
        pass_mean: vacuous || stats.mean >= ls * (1.0 - cfg.tau),
        stats,
    };

    // Condition (3): boundary flux against g(λ*).
    let qu_radius = cfg.qu_radius.unwrap_or_else(|| {
        radii.iter().cloned().filter(|&r| r <= 16.0 * h + 1e-12).fold(4.0 * h, f64::max)
    });
    let mut qu_vals = Vec::new();
    if !vacuous {
        for p in &fb.points {
            if !box_inside(g, *p, qu_radius) {
                continue;
            }
            if let Ok(est) = estimate_qu(u, f, eta, &fb, *p, qu_radius) {
                qu_vals.push(est.qu);
            }
        }
    }
    let qu_mean = if qu_vals.is_empty() { 0.0 } else { qu_vals.iter().sum::<f64>() / qu_vals.len() as f64 };
    let rel_dev = if gls > 0.0 { (qu_mean - gls).abs() / gls } else { 0.0 };
    let qu = QuReport {
        mean: qu_mean,
        min: qu_vals.iter().cloned().fold(f64::INFINITY, f64::min),
        max: qu_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        radius: qu_radius,
        count: qu_vals.len(),
        rel_dev,
        pass: vacuous || (!qu_vals.is_empty() && rel_dev <= cfg.tau),
        full_boundary_proxy: cfg.mode == VerifyMode::Weak,
    };

    // Interface length growth.
    let mut per_stats: Vec<RadiusStat> = Vec::new();
    if !vacuous {
        for &r in &radii {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut count = 0usize;
            for p in &fb.points {
                for (_, ratio) in perimeter_growth(u, &fb, *p, &[r]) {
                    min = min.min(ratio);
                    max = max.max(ratio);
                    count += 1;
                }
            }
            if count > 0 {
                per_stats.push(RadiusStat { r, min, max, count });
            }
        }
    }
    let per_min = per_stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let per_max = per_stats.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    let perimeter = PerimeterReport {
        pass: vacuous
            || (!per_stats.is_empty() && per_min >= cfg.perimeter_min && per_max <= cfg.perimeter_max),
        min: per_min,
        max: per_max,
        per_radius: per_stats,
    };

    // Flatness at the interface point nearest the domain center.
    let mut flatness = Vec::new();
    if !vacuous && ls > 0.0 {
        let (ox, oy) = g.origin();
        let center = [ox + g.lx() / 2.0, oy + g.ly() / 2.0];
        if let Some(p) = fb
            .points
            .iter()
            .min_by(|p, q| {
                let dp = (p[0] - center[0]).hypot(p[1] - center[1]);
                let dq = (q[0] - center[0]).hypot(q[1] - center[1]);
                dp.partial_cmp(&dq).unwrap()
            })
            .copied()
        {
            for &rho in &radii {
                if box_inside(g, p, rho) {
                    if let Ok(fl) = flatness_measure(u, &fb, ls, p, rho) {
                        flatness.push(fl);
                    }
                }
            }
        }
    }

    // Touching-ball growth (the dist-quotient condition) at interface
    // points with an interior zero ball.
    let touching_ball = if vacuous { None } else { touching_ball_check(u, &fb, ls) };

    let pass = vacuous
        || (residual.pass
            && nondegeneracy.pass
            && density.pass
            && fb_gradient.pass_upper
            && (cfg.mode == VerifyMode::Weak || fb_gradient.pass_mean)
            && qu.pass
            && perimeter.pass
            && touching_ball.as_ref().map_or(true, |t| t.pass || t.conclusive_points == 0));

    Ok(PropertyReport {
        mode: cfg.mode,
        gamma: cfg.gamma,
        lambda,
        lambda_star: ls,
        g_lambda_star: gls,
        fb_count: fb.len(),
        vacuous,
        lipschitz_max: measure_lipschitz(u, 0.0),
        radii,
        residual,
        nondegeneracy,
        density,
        fb_gradient,
        qu,
        perimeter,
        flatness,
        touching_ball,
        pass,
    })
}

fn touching_ball_check(u: &Field, fb: &FreeBoundarySet, lambda_star: f64) -> Option<TouchingBallReport> {
    if lambda_star <= 0.0 {
        return None;
    }
    let g = u.grid();
    let h = g.h();
    let mut min_value = f64::INFINITY;
    let mut conclusive = 0usize;

    let zero_nodes: Vec<(f64, f64)> = (0..g.node_count())
        .filter(|&i| u.values()[i] == 0.0)
        .map(|i| {
            let (x, y) = g.node_pos(i);
            (x, y)
        })
        .collect();
    if zero_nodes.is_empty() {
        return None;
    }

    for p in &fb.points {
        // Zero node near the interface point carrying the largest
        // interior zero ball (radius = distance to the nearest interface
        // point) whose closure comes back to p.
        let mut best: Option<(f64, f64, f64)> = None; // (rho_z, zx, zy)
        for &(zx, zy) in &zero_nodes {
            let d = (zx - p[0]).hypot(zy - p[1]);
            if d > 4.0 * h {
                continue;
            }
            let rho_z = fb
                .points
                .iter()
                .map(|q| (q[0] - zx).hypot(q[1] - zy))
                .fold(f64::INFINITY, f64::min);
            if rho_z < h || d > rho_z + 2.0 * h {
                continue;
            }
            if best.as_ref().map_or(true, |(r, _, _)| rho_z > *r) {
                best = Some((rho_z, zx, zy));
            }
        }
        let Some((rho_z, zx, zy)) = best else { continue };
        let mut point_max: f64 = 0.0;
        for i in 0..g.node_count() {
            if u.values()[i] <= 0.0 {
                continue;
            }
            let (x, y) = g.node_pos(i);
            let dist = (x - zx).hypot(y - zy) - rho_z;
            if dist > 0.0 && dist <= 3.0 * h {
                point_max = point_max.max(u.values()[i] / dist);
            }
        }
        if point_max > 0.0 {
            conclusive += 1;
            min_value = min_value.min(point_max);
        }
    }
    if conclusive == 0 {
        return Some(TouchingBallReport { min_value: 0.0, conclusive_points: 0, pass: false });
    }
    Some(TouchingBallReport {
        min_value,
        conclusive_points: conclusive,
        pass: min_value >= lambda_star * 0.85,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    /// Plane profile `u = λ* (y0 − y)⁺` on the unit square.
    fn plane_field(n: usize, lambda_star: f64, y0: f64) -> Field {
        let grid = Arc::new(Grid::rectangle(n, n, 1.0, 1.0).unwrap());
        Field::from_fn(grid, move |_, y| lambda_star * (y0 - y).max(0.0))
    }

    /// 1D wedge `u = (1 − x)⁺` on `[0, 2]`.
    fn wedge_field(n: usize) -> Field {
        let grid = Arc::new(Grid::rectangle(n, 1, 2.0, 0.0).unwrap());
        Field::from_fn(grid, |x, _| (1.0 - x).max(0.0))
    }

    #[test]
    fn extract_plane_interface() {
        let u = plane_field(65, 1.0, 0.5);
        let h = 1.0 / 64.0;
        let fb = extract_free_boundary(&u);
        assert!(!fb.is_empty());
        for (p, nu) in fb.points.iter().zip(&fb.normals) {
            assert!((p[1] - (0.5 - 0.5 * h)).abs() < 1e-12);
            assert!((nu[0] - 0.0).abs() < 0.05 && (nu[1] - 1.0).abs() < 0.05, "normal {nu:?}");
        }
    }

    #[test]
    fn extract_constant_fields_empty() {
        let grid = Arc::new(Grid::rectangle(9, 9, 1.0, 1.0).unwrap());
        let ones = Field::from_fn(grid.clone(), |_, _| 1.0);
        assert!(extract_free_boundary(&ones).is_empty());
        let zeros = Field::zeros(grid);
        assert!(extract_free_boundary(&zeros).is_empty());
    }

    #[test]
    fn extract_is_translation_invariant() {
        let n = 33;
        let grid = Arc::new(Grid::rectangle(n, n, 1.0, 1.0).unwrap());
        let h = 1.0 / 32.0;
        let u1 = Field::from_fn(grid.clone(), |x, y| ((0.5 - y) - 0.2 * (x - x)).max(0.0));
        let shift = 4;
        let u2 = Field::from_fn(grid, move |x, y| ((0.5 + shift as f64 * h - y) - 0.2 * (x - x)).max(0.0));
        let f1 = extract_free_boundary(&u1);
        let f2 = extract_free_boundary(&u2);
        assert_eq!(f1.len(), f2.len());
        for (p, q) in f1.points.iter().zip(&f2.points) {
            assert!((q[1] - p[1] - shift as f64 * h).abs() < 1e-12);
            assert!((q[0] - p[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_of_wedge() {
        let u = wedge_field(65);
        assert!((measure_lipschitz(&u, 0.0) - 1.0).abs() < 1e-12);
        let mut doubled = u.clone();
        for v in doubled.values_mut() {
            *v *= 2.0;
        }
        assert!((measure_lipschitz(&doubled, 0.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nondegeneracy_wedge_1d() {
        // Q = 1/sqrt(6) independent of r for the unit-slope wedge; the
        // interface point sits h/2 left of the true boundary, which
        // inflates the average by (1 + d/r)^{3/2} with d = h/2.
        let u = wedge_field(201);
        let h = 2.0 / 200.0;
        let fb = extract_free_boundary(&u);
        assert_eq!(fb.len(), 1);
        let radii = [0.1, 0.2, 0.4];
        let stats = verify_nondegeneracy(&u, &fb, &radii, 2.0).unwrap();
        assert_eq!(stats.len(), 3);
        for s in &stats {
            let expected = (1.0 + 0.5 * h / s.r).powf(1.5) / 6f64.sqrt();
            assert!((s.min - expected).abs() < 0.01, "Q at r={}: {} vs {expected}", s.r, s.min);
        }
    }

    #[test]
    fn nondegeneracy_plane_2d_box_constant() {
        let ls = 1.3;
        let u = plane_field(129, ls, 0.5);
        let fb = extract_free_boundary(&u);
        let stats = verify_nondegeneracy(&u, &fb, &[0.25], 2.0).unwrap();
        let expected = ls / 6f64.sqrt();
        assert_eq!(stats.len(), 1);
        assert!(
            (stats[0].min - expected).abs() < 0.03 * expected
                && (stats[0].max - expected).abs() < 0.03 * expected,
            "expected {expected}, got [{}, {}]",
            stats[0].min,
            stats[0].max
        );
    }

    #[test]
    fn density_of_plane() {
        let u = plane_field(129, 1.0, 0.5);
        let fb = extract_free_boundary(&u);
        let stats = verify_density(&u, &fb, &[0.125, 0.25]);
        for s in &stats {
            assert!((s.min - 0.5).abs() < 0.05 && (s.max - 0.5).abs() < 0.05, "{s:?}");
        }
    }

    #[test]
    fn perimeter_of_plane_is_two() {
        let u = plane_field(129, 1.0, 0.5);
        let fb = extract_free_boundary(&u);
        let center = [0.5, 0.5 - 1.0 / 256.0];
        for (r, ratio) in perimeter_growth(&u, &fb, center, &[0.125, 0.25]) {
            assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio} at r={r}");
        }
    }

    #[test]
    fn qu_of_plane_matches_g_lambda_star() {
        let f = GFunction::power(2.0).unwrap();
        let ls = 1.0;
        let u = plane_field(129, ls, 0.5);
        let fb = extract_free_boundary(&u);
        let est = estimate_qu(&u, &f, 1e-9, &fb, [0.5, 0.5 - 1.0 / 256.0], 0.125).unwrap();
        let expected = f.g(ls).unwrap();
        assert!((est.qu - expected).abs() < 0.05 * expected, "qu {} vs {}", est.qu, expected);
        // Doubling the radius keeps the plane estimate unchanged.
        let est2 = estimate_qu(&u, &f, 1e-9, &fb, [0.5, 0.5 - 1.0 / 256.0], 0.25).unwrap();
        assert!((est2.qu - est.qu).abs() < 0.02 * expected);
    }

    #[test]
    fn blow_up_of_plane_is_scale_invariant() {
        let u = plane_field(129, 1.0, 0.5);
        let b1 = blow_up(&u, [0.5, 0.5], 0.25, 33).unwrap();
        let b2 = blow_up(&u, [0.5, 0.5], 0.125, 33).unwrap();
        assert!(b1.max_abs_diff(&b2) < 1e-12);
        assert!(blow_up(&u, [0.5, 0.5], 1.0 / 128.0, 9).is_err());
        assert!(blow_up(&u, [0.01, 0.5], 0.25, 9).is_err());
    }

    #[test]
    fn flatness_of_plane_near_zero() {
        let ls = 1.0;
        let u = plane_field(129, ls, 0.5);
        let h = 1.0 / 128.0;
        let fb = extract_free_boundary(&u);
        let x0 = [0.5 + h / 2.0, 0.5 - h / 2.0];
        let rho = 0.25;
        let fl = flatness_measure(&u, &fb, ls, x0, rho).unwrap();
        assert!(fl.sigma_plus <= 2.0 * h / rho, "sigma+ {}", fl.sigma_plus);
        assert!(fl.sigma_minus <= 2.0 * h / rho, "sigma- {}", fl.sigma_minus);
        assert!((fl.nu[1] - 1.0).abs() < 0.05);
    }

    #[test]
    fn flatness_inconclusive_without_interface() {
        let grid = Arc::new(Grid::rectangle(33, 33, 1.0, 1.0).unwrap());
        let u = Field::from_fn(grid, |_, _| 1.0);
        let fb = extract_free_boundary(&u);
        assert!(flatness_measure(&u, &fb, 1.0, [0.5, 0.5], 0.25).is_err());
    }

    #[test]
    fn scaling_covariance_of_measurements() {
        // u_s(x) = s u(x/s) on the scaled grid leaves Q, density,
        // perimeter ratio and flatness unchanged.
        let ls = 1.0;
        let n = 129;
        let u1 = plane_field(n, ls, 0.5);
        let s = 2.0;
        let grid2 = Arc::new(Grid::rectangle(n, n, s, s).unwrap());
        let u2 = Field::from_fn(grid2, move |_, y| s * (ls * (0.5 - y / s).max(0.0)));
        let fb1 = extract_free_boundary(&u1);
        let fb2 = extract_free_boundary(&u2);
        let q1 = verify_nondegeneracy(&u1, &fb1, &[0.25], 2.0).unwrap()[0];
        let q2 = verify_nondegeneracy(&u2, &fb2, &[0.5], 2.0).unwrap()[0];
        assert!((q1.min - q2.min).abs() < 1e-9, "{} vs {}", q1.min, q2.min);
        let d1 = verify_density(&u1, &fb1, &[0.25])[0];
        let d2 = verify_density(&u2, &fb2, &[0.5])[0];
        assert!((d1.min - d2.min).abs() < 1e-9);
        let c1 = [0.5, 0.5 - 0.5 / (n - 1) as f64];
        let c2 = [1.0, 1.0 - 1.0 / (n - 1) as f64];
        let p1 = perimeter_growth(&u1, &fb1, c1, &[0.25])[0].1;
        let p2 = perimeter_growth(&u2, &fb2, c2, &[0.5])[0].1;
        assert!((p1 - p2).abs() < 1e-9);
    }

    #[test]
    fn weak_check_flags_wrong_slope() {
        let f = GFunction::power(2.0).unwrap();
        let lambda = 0.5; // λ* = 1
        let good = plane_field(129, 1.0, 0.5);
        let bad = plane_field(129, 2.0, 0.5);
        let cfg = VerifyConfig::default();
        let rep_good = weak_solution_check(&good, &f, lambda, &cfg).unwrap();
        assert!(rep_good.fb_gradient.pass_upper, "{:?}", rep_good.fb_gradient);
        assert!(rep_good.qu.pass, "{:?}", rep_good.qu);
        let rep_bad = weak_solution_check(&bad, &f, lambda, &cfg).unwrap();
        assert!(!rep_bad.fb_gradient.pass_upper);
        assert!(!rep_bad.pass);
    }

    #[test]
    fn weak_check_vacuous_without_interface() {
        let f = GFunction::power(2.0).unwrap();
        let grid = Arc::new(Grid::rectangle(17, 17, 1.0, 1.0).unwrap());
        let u = Field::from_fn(grid, |x, _| 1.0 + x);
        let rep = weak_solution_check(&u, &f, 0.5, &VerifyConfig::default()).unwrap();
        assert!(rep.vacuous && rep.pass);
    }
}
