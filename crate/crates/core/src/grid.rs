//! Rectangular grids, piecewise-linear fields, and field file I/O.
//!
//! A [`Grid`] is a uniform node lattice on a rectangle. In 2D every cell
//! is split into two triangles along the lower-left to upper-right
//! diagonal (fixed for determinism); with `ny = 1` the grid degenerates to
//! a 1D chain of segments and all element machinery keeps working.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const FIELD_MAGIC: &str = "ORLICZFB 1";

#[derive(Clone, Debug)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    lx: f64,
    ly: f64,
    ox: f64,
    oy: f64,
    boundary: Vec<bool>,
    phi0: Vec<f64>,
}

/// One P1 element: a triangle (or a segment when `ny = 1`) with its
/// nodes, measure, and constant hat-function gradients.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub nodes: [usize; 3],
    pub nn: usize,
    pub measure: f64,
    pub grads: [[f64; 2]; 3],
}

impl Element {
    /// Gradient of the P1 interpolant of `values` on this element.
    #[inline]
    pub fn gradient(&self, values: &[f64]) -> [f64; 2] {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for k in 0..self.nn {
            let v = values[self.nodes[k]];
            gx += v * self.grads[k][0];
            gy += v * self.grads[k][1];
        }
        [gx, gy]
    }

    /// Mean of the nodal values on this element.
    #[inline]
    pub fn mean(&self, values: &[f64]) -> f64 {
        let mut m = 0.0;
        for k in 0..self.nn {
            m += values[self.nodes[k]];
        }
        m / self.nn as f64
    }
}

impl Grid {
    /// Uniform grid on `[0, lx] × [0, ly]` with `nx × ny` nodes and zero
    /// Dirichlet data. `ny = 1` builds a 1D grid on `[0, lx]`.
    pub fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
        if nx < 2 || (ny != 1 && ny < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid needs nx >= 2 and ny >= 2 (or ny = 1 for 1D), got {nx} x {ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0) || (ny > 1 && !(ly.is_finite() && ly > 0.0)) {
            return Err(Error::InvalidArgument(format!("bad extent {lx} x {ly}")));
        }
        let hx = lx / (nx - 1) as f64;
        let hy = if ny > 1 { ly / (ny - 1) as f64 } else { 0.0 };
        let n = nx * ny;
        let mut boundary = vec![false; n];
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 || i == nx - 1 || (ny > 1 && (j == 0 || j == ny - 1)) {
                    boundary[j * nx + i] = true;
                }
            }
        }
        Ok(Grid {
            nx,
            ny,
            hx,
            hy,
            lx,
            ly: if ny > 1 { ly } else { 0.0 },
            ox: 0.0,
            oy: 0.0,
            boundary,
            phi0: vec![0.0; n],
        })
    }

    pub fn with_origin(mut self, ox: f64, oy: f64) -> Grid {
        self.ox = ox;
        self.oy = oy;
        self
    }

    /// Set the Dirichlet data from a function of the node position;
    /// values must be finite and nonnegative.
    pub fn set_phi0(&mut self, f: impl Fn(f64, f64) -> f64) -> Result<()> {
        for idx in 0..self.node_count() {
            if self.boundary[idx] {
                let (x, y) = self.node_pos(idx);
                let v = f(x, y);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "phi0 must be finite and nonnegative, got {v} at ({x}, {y})"
                    )));
                }
                self.phi0[idx] = v;
            }
        }
        Ok(())
    }

    /// Set the Dirichlet data from a full nodal array (interior entries
    /// are ignored).
    pub fn set_phi0_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "phi0 array has {} entries, grid has {} nodes",
                values.len(),
                self.node_count()
            )));
        }
        for idx in 0..self.node_count() {
            if self.boundary[idx] {
                let v = values[idx];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidArgument(format!("phi0 must be >= 0, got {v}")));
                }
                self.phi0[idx] = v;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.hx
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.ox, self.oy)
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    /// Largest node spacing; the mesh-size parameter used by defaults.
    pub fn h(&self) -> f64 {
        if self.is_1d() {
            self.hx
        } else {
            self.hx.max(self.hy)
        }
    }

    pub fn diameter(&self) -> f64 {
        if self.is_1d() {
            self.lx
        } else {
            self.lx.hypot(self.ly)
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node_pos(&self, idx: usize) -> (f64, f64) {
        let i = idx % self.nx;
        let j = idx / self.nx;
        (self.ox + i as f64 * self.hx, self.oy + j as f64 * self.hy)
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary[idx]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn phi0(&self) -> &[f64] {
        &self.phi0
    }

    pub fn sup_phi0(&self) -> f64 {
        self.phi0.iter().cloned().fold(0.0, f64::max)
    }

    pub fn element_count(&self) -> usize {
        if self.is_1d() {
            self.nx - 1
        } else {
            2 * (self.nx - 1) * (self.ny - 1)
        }
    }

    /// Element by index: in 2D, cell `(i, j)` holds elements `2c` (lower
    /// triangle `A B C`) and `2c + 1` (upper triangle `A C D`) where
    /// `A = (i,j)`, `B = (i+1,j)`, `C = (i+1,j+1)`, `D = (i,j+1)`.
    #[inline]
    pub fn element(&self, e: usize) -> Element {
        if self.is_1d() {
            let i = e;
            return Element {
                nodes: [i, i + 1, usize::MAX],
                nn: 2,
                measure: self.hx,
                grads: [[-1.0 / self.hx, 0.0], [1.0 / self.hx, 0.0], [0.0, 0.0]],
            };
        }
        let cell = e / 2;
        let cw = self.nx - 1;
        let i = cell % cw;
        let j = cell / cw;
        let a = self.idx(i, j);
        let b = self.idx(i + 1, j);
        let c = self.idx(i + 1, j + 1);
        let d = self.idx(i, j + 1);
        let area = 0.5 * self.hx * self.hy;
        if e % 2 == 0 {
            Element {
                nodes: [a, b, c],
                nn: 3,
                measure: area,
                grads: [
                    [-1.0 / self.hx, 0.0],
                    [1.0 / self.hx, -1.0 / self.hy],
                    [0.0, 1.0 / self.hy],
                ],
            }
        } else {
            Element {
                nodes: [a, c, d],
                nn: 3,
                measure: area,
                grads: [
                    [0.0, -1.0 / self.hy],
                    [1.0 / self.hx, 0.0],
                    [-1.0 / self.hx, 1.0 / self.hy],
                ],
            }
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.element_count()).map(move |e| self.element(e))
    }

    /// Centroid of element `e`.
    pub fn element_centroid(&self, e: usize) -> (f64, f64) {
        let el = self.element(e);
        let mut x = 0.0;
        let mut y = 0.0;
        for k in 0..el.nn {
            let (px, py) = self.node_pos(el.nodes[k]);
            x += px;
            y += py;
        }
        (x / el.nn as f64, y / el.nn as f64)
    }

    /// Nodal control volume (one `nn`-th of each adjacent element).
    pub fn node_volumes(&self) -> Vec<f64> {
        let mut vol = vec![0.0; self.node_count()];
        for el in self.elements() {
            let share = el.measure / el.nn as f64;
            for k in 0..el.nn {
                vol[el.nodes[k]] += share;
            }
        }
        vol
    }
}

/// Nodal values of a candidate minimizer on a shared grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.node_count();
        Field { grid, values: vec![0.0; n] }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..grid.node_count())
            .map(|idx| {
                let (x, y) = grid.node_pos(idx);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bilinear interpolation at `(x, y)` (clamped to the grid).
    pub fn interp(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x - g.ox) / g.hx).clamp(0.0, (g.nx - 1) as f64);
        let i = (fx as usize).min(g.nx - 2);
        let tx = fx - i as f64;
        if g.is_1d() {
            let v0 = self.values[i];
            let v1 = self.values[i + 1];
            return v0 + tx * (v1 - v0);
        }
        let fy = ((y - g.oy) / g.hy).clamp(0.0, (g.ny - 1) as f64);
        let j = (fy as usize).min(g.ny - 2);
        let ty = fy - j as f64;
        let v00 = self.values[g.idx(i, j)];
        let v10 = self.values[g.idx(i + 1, j)];
        let v01 = self.values[g.idx(i, j + 1)];
        let v11 = self.values[g.idx(i + 1, j + 1)];
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }

    /// Containing element and P1 gradient at `(x, y)`; points on the cell
    /// diagonal go to the lower triangle.
    pub fn element_at(&self, x: f64, y: f64) -> usize {
        let g = &self.grid;
        let fx = ((x - g.ox) / g.hx).clamp(0.0, (g.nx - 1) as f64 - 1e-12);
        let i = (fx as usize).min(g.nx - 2);
        if g.is_1d() {
            return i;
        }
        let fy = ((y - g.oy) / g.hy).clamp(0.0, (g.ny - 1) as f64 - 1e-12);
        let j = (fy as usize).min(g.ny - 2);
        let cell = j * (g.nx - 1) + i;
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        if ty <= tx {
            2 * cell
        } else {
            2 * cell + 1
        }
    }

    /// Serialize in the `ORLICZFB 1` format: magic line, grid line,
    /// then `ny` rows of `nx` full-precision values.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        let _ = writeln!(out, "{FIELD_MAGIC}");
        let _ = writeln!(out, "grid {} {} {} {}", g.nx, g.ny, g.hx, g.hy);
        for j in 0..g.ny {
            let mut line = String::new();
            for i in 0..g.nx {
                if i > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{}", self.values[g.idx(i, j)]);
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parse a field file; values must be finite and nonnegative.
    pub fn from_text(text: &str) -> Result<Field> {
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| Error::InvalidFile("empty field file".into()))?;
        if magic.trim() != FIELD_MAGIC {
            return Err(Error::InvalidFile(format!("bad magic line {magic:?}")));
        }
        let header = lines.next().ok_or_else(|| Error::InvalidFile("missing grid line".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "grid" {
            return Err(Error::InvalidFile(format!("bad grid line {header:?}")));
        }
        let nx: usize = parts[1].parse().map_err(|_| Error::InvalidFile("bad nx".into()))?;
        let ny: usize = parts[2].parse().map_err(|_| Error::InvalidFile("bad ny".into()))?;
        let hx: f64 = parts[3].parse().map_err(|_| Error::InvalidFile("bad hx".into()))?;
        let hy: f64 = parts[4].parse().map_err(|_| Error::InvalidFile("bad hy".into()))?;
        let lx = hx * (nx.max(2) - 1) as f64;
        let ly = if ny > 1 { hy * (ny - 1) as f64 } else { 1.0 };
        let mut grid = Grid::rectangle(nx, ny, lx, ly)?;
        let mut values = vec![0.0; nx * ny];
        for j in 0..ny {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidFile(format!("missing row {j} of {ny}")))?;
            let row: Vec<&str> = line.split_whitespace().collect();
            if row.len() != nx {
                return Err(Error::InvalidFile(format!("row {j} has {} values, expected {nx}", row.len())));
            }
            for (i, tok) in row.iter().enumerate() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::InvalidFile(format!("bad value {tok:?} at ({i}, {j})")))?;
                if !v.is_finite() {
                    return Err(Error::InvalidFile(format!("non-finite value at ({i}, {j})")));
                }
                if v < 0.0 {
                    return Err(Error::InvalidFile(format!("negative value {v} at ({i}, {j})")));
                }
                values[j * nx + i] = v;
            }
        }
        // Boundary data are recovered from the stored nodal values.
        grid.set_phi0_values(&values)?;
        Field::from_values(Arc::new(grid), values)
    }

    pub fn read(path: &Path) -> Result<Field> {
        let text = std::fs::read_to_string(path)?;
        Field::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_gradients_reproduce_linear() {
        let mut grid = Grid::rectangle(5, 4, 2.0, 1.5).unwrap();
        grid.set_phi0(|x, y| 2.0 * x + 3.0 * y).unwrap();
        let grid = Arc::new(grid);
        let u = Field::from_fn(grid.clone(), |x, y| 2.0 * x + 3.0 * y);
        for el in grid.elements() {
            let [gx, gy] = el.gradient(u.values());
            assert!((gx - 2.0).abs() < 1e-12 && (gy - 3.0).abs() < 1e-12);
        }
        let total: f64 = grid.elements().map(|el| el.measure).sum();
        assert!((total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_elements() {
        let grid = Arc::new(Grid::rectangle(11, 1, 2.0, 0.0).unwrap());
        let u = Field::from_fn(grid.clone(), |x, _| 3.0 * x);
        assert_eq!(grid.element_count(), 10);
        for el in grid.elements() {
            assert!((el.gradient(u.values())[0] - 3.0).abs() < 1e-12);
            assert!((el.measure - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn field_file_round_trip() {
        let mut grid = Grid::rectangle(4, 3, 1.0, 1.0).unwrap();
        grid.set_phi0(|x, _| x).unwrap();
        let grid = Arc::new(grid);
        let u = Field::from_fn(grid, |x, y| (x * 7.3 + y * 0.11).abs() / 3.0 + 1e-17);
        let text = u.to_text();
        let back = Field::from_text(&text).unwrap();
        assert_eq!(u.values(), back.values());
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn field_file_rejects_negative() {
        let text = format!("{FIELD_MAGIC}\ngrid 2 2 1 1\n0 0\n0 -1\n");
        assert!(Field::from_text(&text).is_err());
    }

    #[test]
    fn field_file_rejects_bad_magic() {
        assert!(Field::from_text("NOPE 1\ngrid 2 2 1 1\n0 0\n0 0\n").is_err());
    }

    #[test]
    fn interp_is_bilinear() {
        let grid = Arc::new(Grid::rectangle(3, 3, 2.0, 2.0).unwrap());
        let u = Field::from_fn(grid, |x, y| 1.0 + x + 2.0 * y);
        assert!((u.interp(0.5, 1.3) - (1.0 + 0.5 + 2.6)).abs() < 1e-12);
    }
}
