//! Minimization of the cavitation-type functional
//! `J(u) = ∫ G(|∇u|) + λ χ_{u>0}` over fields with prescribed nonnegative
//! boundary data, together with measurement tools for the quantities the
//! minimizers are expected to exhibit: the free-boundary slope `λ*` with
//! `g(λ*)λ* − G(λ*) = λ`, Lipschitz bounds, nondegeneracy and density of
//! the positivity set, boundary flux, and flatness of the interface.
//!
//! The crate is organized around five pieces:
//!
//! * [`gfunction`] — the admissible convex energies `G` (power,
//!   power-log, spliced, and their sums/products/compositions) with
//!   certified ellipticity bounds and the structural inequality battery;
//! * [`oracle1d`] — closed-form and brute-force minimizers on an interval,
//!   used as ground truth;
//! * [`grid`] — rectangular meshes, piecewise-linear fields, and the
//!   `ORLICZFB 1` field file format;
//! * [`solver`] — the smoothed projected-descent minimizer and the
//!   discrete diagnostics (residual, harmonic replacement, comparison,
//!   annulus barrier);
//! * [`analysis`] — free-boundary extraction and the property report.

pub mod analysis;
pub mod config;
pub mod error;
pub mod gfunction;
pub mod grid;
pub mod oracle1d;
pub mod quadrature;
pub mod rootfind;
pub mod solver;

pub use error::{Error, Result};
pub use gfunction::{GFamily, GFunction};
pub use grid::{Field, Grid};
