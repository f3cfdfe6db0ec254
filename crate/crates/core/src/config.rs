//! Run configuration: TOML with one section per subsystem.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{VerifyConfig, VerifyMode};
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::grid::{Field, Grid};
use crate::solver::{SolveOptions, StepRule};

/// Recursive G-function specification.
///
/// ```toml
/// [gfunction]
/// family = "product"
///   [gfunction.first]
///   family = "power"
///   p = 2.0
///   [gfunction.second]
///   family = "powerlog"
///   a = 1.0
///   b = 1.0
///   c = 1.0
/// ```
#[derive(Clone, Debug, Deserialize)]
pub struct GSpec {
    pub family: String,
    pub p: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub s: Option<f64>,
    pub c1: Option<f64>,
    pub parts: Option<Vec<GPart>>,
    pub first: Option<Box<GSpec>>,
    pub second: Option<Box<GSpec>>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GPart {
    pub weight: f64,
    #[serde(flatten)]
    pub spec: GSpec,
}

impl GSpec {
    pub fn build(&self) -> Result<GFunction> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("gfunction {} needs `{name}`", self.family)))
        };
        match self.family.as_str() {
            "power" => GFunction::power(need(self.p, "p")?),
            "powerlog" | "power-log" | "power_log" => {
                GFunction::power_log(need(self.a, "a")?, need(self.b, "b")?, need(self.c, "c")?)
            }
            "spliced" => GFunction::spliced(
                need(self.a1, "a1")?,
                need(self.a2, "a2")?,
                need(self.s, "s")?,
                self.c1.unwrap_or(1.0),
            ),
            "sum" => {
                let parts = self
                    .parts
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("sum needs `parts`".into()))?;
                let mut built = Vec::new();
                for p in parts {
                    built.push((p.weight, p.spec.build()?));
                }
                GFunction::sum(built)
            }
            "product" | "compose" => {
                let first = self
                    .first
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument(format!("{} needs `first`", self.family)))?
                    .build()?;
                let second = self
                    .second
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument(format!("{} needs `second`", self.family)))?
                    .build()?;
                if self.family == "product" {
                    GFunction::product(first, second)
                } else {
                    GFunction::compose(first, second)
                }
            }
            other => Err(Error::InvalidArgument(format!("unknown gfunction family {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    #[serde(default = "one")]
    pub ny: usize,
    pub lx: f64,
    #[serde(default = "one_f")]
    pub ly: f64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

/// Boundary data: a named preset or a nodal field file whose rim is used.
#[derive(Clone, Debug, Deserialize)]
pub struct Phi0Spec {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
    #[serde(default = "one_f")]
    pub scale: f64,
}

#[derive(Clone, Debug, Deserialize, Default)]
pub struct SolveSpec {
    pub eps_schedule: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub energy_tol: Option<f64>,
    pub stall_window: Option<usize>,
    pub step_rule: Option<String>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    /// Node counts of a refinement sweep (solve2d writes one CSV row per
    /// entry).
    pub sweep_nx: Option<Vec<usize>>,
}

impl SolveSpec {
    pub fn to_options(&self) -> Result<SolveOptions> {
        let mut o = SolveOptions::default();
        o.eps_schedule = self.eps_schedule.clone();
        o.eta = self.eta;
        if let Some(v) = self.max_iters {
            o.max_iters = v;
        }
        if let Some(v) = self.energy_tol {
            o.energy_tol = v;
        }
        if let Some(v) = self.stall_window {
            o.stall_window = v;
        }
        if let Some(rule) = &self.step_rule {
            o.step_rule = match rule.as_str() {
                "armijo" => StepRule::Armijo,
                "bb" | "barzilai-borwein" | "barzilai_borwein" => StepRule::BarzilaiBorwein,
                other => {
                    return Err(Error::InvalidArgument(format!("unknown step rule {other:?}")));
                }
            };
        }
        if let Some(v) = self.restarts {
            o.restarts = v;
        }
        if let Some(v) = self.seed {
            o.seed = v;
        }
        Ok(o)
    }
}

#[derive(Clone, Debug, Deserialize, Default)]
pub struct VerifySpec {
    pub gamma: Option<f64>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub density_c: Option<f64>,
    pub perimeter_min: Option<f64>,
    pub perimeter_max: Option<f64>,
    pub tau: Option<f64>,
    pub residual_tol: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub qu_radius: Option<f64>,
    pub eta: Option<f64>,
    pub mode: Option<String>,
}

impl VerifySpec {
    pub fn to_config(&self) -> Result<VerifyConfig> {
        let mut c = VerifyConfig::default();
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.c_min {
            c.c_min = v;
        }
        if let Some(v) = self.c_max {
            c.c_max = v;
        }
        if let Some(v) = self.density_c {
            c.density_c = v;
        }
        if let Some(v) = self.perimeter_min {
            c.perimeter_min = v;
        }
        if let Some(v) = self.perimeter_max {
            c.perimeter_max = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.residual_tol {
            c.residual_tol = v;
        }
        c.radii = self.radii.clone();
        c.qu_radius = self.qu_radius;
        c.eta = self.eta;
        if let Some(mode) = &self.mode {
            c.mode = parse_mode(mode)?;
        }
        Ok(c)
    }
}

pub fn parse_mode(mode: &str) -> Result<VerifyMode> {
    match mode {
        "minimizer" => Ok(VerifyMode::Minimizer),
        "weak" => Ok(VerifyMode::Weak),
        other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct Oracle1dSpec {
    pub a: f64,
    pub b: f64,
    pub length: f64,
    #[serde(default = "default_nodes")]
    pub n: usize,
    /// Sample count for the optional CSV of u(x).
    pub csv_samples: Option<usize>,
}

fn default_nodes() -> usize {
    101
}

#[derive(Clone, Debug, Deserialize)]
pub struct BlowupSpec {
    /// Center; defaults to the interface point nearest the domain center.
    pub x0: Option<[f64; 2]>,
    pub rho: Vec<f64>,
    #[serde(default = "default_blowup_res")]
    pub m: usize,
    #[serde(default)]
    pub write_fields: bool,
}

fn default_blowup_res() -> usize {
    65
}

#[derive(Clone, Debug, Deserialize)]
pub struct GcheckSpec {
    #[serde(default = "default_tmin")]
    pub tmin: f64,
    #[serde(default = "default_tmax")]
    pub tmax: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_tmin() -> f64 {
    1e-6
}

fn default_tmax() -> f64 {
    1e6
}

fn default_n() -> usize {
    200
}

impl Default for GcheckSpec {
    fn default() -> Self {
        GcheckSpec { tmin: default_tmin(), tmax: default_tmax(), n: default_n() }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct RunConfig {
    pub gfunction: GSpec,
    #[serde(default)]
    pub lambda: f64,
    pub grid: Option<GridSpec>,
    pub phi0: Option<Phi0Spec>,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    pub oracle1d: Option<Oracle1dSpec>,
    pub blowup: Option<BlowupSpec>,
    pub gcheck: Option<GcheckSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidFile(format!("{}: {e}", path.display())))
    }

    /// Build the grid with its Dirichlet data resolved.
    pub fn build_grid(&self) -> Result<Grid> {
        let spec = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config has no [grid] section".into()))?;
        let mut grid = Grid::rectangle(spec.nx, spec.ny, spec.lx, spec.ly)?;
        match &self.phi0 {
            None => {}
            Some(phi) => {
                let scale = phi.scale;
                match (phi.preset.as_deref(), &phi.file) {
                    (Some("strip"), None) => {
                        grid.set_phi0(move |x, _| scale * (1.0 - x).max(0.0))?;
                    }
                    (Some("constant-left"), None) => {
                        grid.set_phi0(move |x, _| if x == 0.0 { scale } else { 0.0 })?;
                    }
                    (None, Some(file)) => {
                        let f = Field::read(file)?;
                        if f.grid().node_count() != grid.node_count() {
                            return Err(Error::DimensionMismatch(format!(
                                "phi0 file has {} nodes, grid {}",
                                f.grid().node_count(),
                                grid.node_count()
                            )));
                        }
                        grid.set_phi0_values(f.values())?;
                    }
                    (Some(other), None) => {
                        return Err(Error::InvalidArgument(format!("unknown phi0 preset {other:?}")));
                    }
                    _ => {
                        return Err(Error::InvalidArgument(
                            "phi0 needs either `preset` or `file`, not both".into(),
                        ));
                    }
                }
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_config() {
        let cfg: RunConfig = toml::from_str(
            r#"
            lambda = 0.5
            [gfunction]
            family = "power"
            p = 2.0
            [grid]
            nx = 65
            ny = 33
            lx = 2.0
            ly = 1.0
            [phi0]
            preset = "strip"
            "#,
        )
        .unwrap();
        let f = cfg.gfunction.build().unwrap();
        assert_eq!(f.delta(), 1.0);
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.nx(), 65);
        assert!((grid.sup_phi0() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_nested_gfunction() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [gfunction]
            family = "sum"
            [[gfunction.parts]]
            weight = 1.0
            family = "power"
            p = 2.0
            [[gfunction.parts]]
            weight = 2.0
            family = "powerlog"
            a = 1.0
            b = 1.0
            c = 1.0
            "#,
        )
        .unwrap();
        let f = cfg.gfunction.build().unwrap();
        assert_eq!(f.delta(), 1.0);
        assert_eq!(f.g0(), 2.0);
    }

    #[test]
    fn reject_bad_family() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [gfunction]
            family = "powerlog"
            a = 1.0
            b = 1.0
            c = 0.5
            "#,
        )
        .unwrap();
        assert!(cfg.gfunction.build().is_err());
    }
}
