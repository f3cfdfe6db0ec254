//! C ABI for the orliczfb library: opaque handles, status codes, and a
//! JSON bridge for the structured reports. The header is generated into
//! `include/orliczfb.h` by the build script.

use std::ffi::{c_char, CString};
use std::path::Path;
use std::sync::Arc;

use orliczfb::analysis::{self, VerifyConfig, VerifyMode};
use orliczfb::gfunction::GFunction;
use orliczfb::grid::{Field, Grid};
use orliczfb::oracle1d;
use orliczfb::solver::{self, SolveOptions};
use orliczfb::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum OrliczStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    DomainError = 3,
    NumericalError = 4,
    Inconclusive = 5,
    IoError = 6,
}

fn status_of(e: &Error) -> OrliczStatus {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::InvalidFile(_) => {
            OrliczStatus::InvalidArgument
        }
        Error::Domain { .. } => OrliczStatus::DomainError,
        Error::QuadratureNonConvergence { .. } | Error::Numerical(_) => OrliczStatus::NumericalError,
        Error::Inconclusive(_) => OrliczStatus::Inconclusive,
        Error::Io(_) => OrliczStatus::IoError,
    }
}

/// Opaque N-function handle.
pub struct OrliczGFunction(GFunction);

/// Opaque grid handle (rectangle with Dirichlet data).
pub struct OrliczGrid(Grid);

/// Opaque nodal field handle.
pub struct OrliczField(Field);

macro_rules! nonnull {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => return OrliczStatus::NullArgument,
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(r) => r,
            None => return OrliczStatus::NullArgument,
        }
    };
}

fn give_gfunction(out: &mut *mut OrliczGFunction, r: orliczfb::Result<GFunction>) -> OrliczStatus {
    match r {
        Ok(f) => {
            *out = Box::into_raw(Box::new(OrliczGFunction(f)));
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// `g(t) = t^(p-1)`.
#[no_mangle]
pub extern "C" fn orlicz_gfunction_power(p: f64, out: *mut *mut OrliczGFunction) -> OrliczStatus {
    let out = out_ptr!(out);
    give_gfunction(out, GFunction::power(p))
}

/// `g(t) = t^a ln(b t + c)`, `c >= 1`.
#[no_mangle]
pub extern "C" fn orlicz_gfunction_power_log(
    a: f64,
    b: f64,
    c: f64,
    out: *mut *mut OrliczGFunction,
) -> OrliczStatus {
    let out = out_ptr!(out);
    give_gfunction(out, GFunction::power_log(a, b, c))
}

/// C¹ spliced powers with exponents `a1, a2`, splice point `s`, and
/// leading coefficient `c1`.
#[no_mangle]
pub extern "C" fn orlicz_gfunction_spliced(
    a1: f64,
    a2: f64,
    s: f64,
    c1: f64,
    out: *mut *mut OrliczGFunction,
) -> OrliczStatus {
    let out = out_ptr!(out);
    give_gfunction(out, GFunction::spliced(a1, a2, s, c1))
}

/// Weighted sum of `n` parts.
///
/// # Safety
/// `parts` must point to `n` valid handles and `weights` to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn orlicz_gfunction_sum(
    parts: *const *const OrliczGFunction,
    weights: *const f64,
    n: usize,
    out: *mut *mut OrliczGFunction,
) -> OrliczStatus {
    let out = out_ptr!(out);
    if parts.is_null() || weights.is_null() || n == 0 {
        return OrliczStatus::NullArgument;
    }
    let mut built = Vec::with_capacity(n);
    for k in 0..n {
        let part = *parts.add(k);
        let Some(part) = part.as_ref() else {
            return OrliczStatus::NullArgument;
        };
        built.push((*weights.add(k), part.0.clone()));
    }
    give_gfunction(out, GFunction::sum(built))
}

#[no_mangle]
pub extern "C" fn orlicz_gfunction_product(
    g1: *const OrliczGFunction,
    g2: *const OrliczGFunction,
    out: *mut *mut OrliczGFunction,
) -> OrliczStatus {
    let (g1, g2) = (nonnull!(g1), nonnull!(g2));
    let out = out_ptr!(out);
    give_gfunction(out, GFunction::product(g1.0.clone(), g2.0.clone()))
}

#[no_mangle]
pub extern "C" fn orlicz_gfunction_compose(
    g1: *const OrliczGFunction,
    g2: *const OrliczGFunction,
    out: *mut *mut OrliczGFunction,
) -> OrliczStatus {
    let (g1, g2) = (nonnull!(g1), nonnull!(g2));
    let out = out_ptr!(out);
    give_gfunction(out, GFunction::compose(g1.0.clone(), g2.0.clone()))
}

/// # Safety
/// `f` must be a handle from one of the constructors, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orlicz_gfunction_free(f: *mut OrliczGFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Certified lower ellipticity bound δ.
#[no_mangle]
pub extern "C" fn orlicz_gfunction_delta(f: *const OrliczGFunction) -> f64 {
    match unsafe { f.as_ref() } {
        Some(f) => f.0.delta(),
        None => f64::NAN,
    }
}

/// Certified upper ellipticity bound g₀.
#[no_mangle]
pub extern "C" fn orlicz_gfunction_g0(f: *const OrliczGFunction) -> f64 {
    match unsafe { f.as_ref() } {
        Some(f) => f.0.g0(),
        None => f64::NAN,
    }
}

fn scalar_out(out: *mut f64, r: orliczfb::Result<f64>) -> OrliczStatus {
    let Some(slot) = (unsafe { out.as_mut() }) else {
        return OrliczStatus::NullArgument;
    };
    match r {
        Ok(v) => {
            *slot = v;
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

#[no_mangle]
pub extern "C" fn orlicz_eval_g(f: *const OrliczGFunction, t: f64, out: *mut f64) -> OrliczStatus {
    let f = nonnull!(f);
    scalar_out(out, f.0.g(t))
}

#[no_mangle]
pub extern "C" fn orlicz_eval_big_g(f: *const OrliczGFunction, t: f64, out: *mut f64) -> OrliczStatus {
    let f = nonnull!(f);
    scalar_out(out, f.0.big_g(t))
}

#[no_mangle]
pub extern "C" fn orlicz_g_inverse(f: *const OrliczGFunction, y: f64, out: *mut f64) -> OrliczStatus {
    let f = nonnull!(f);
    scalar_out(out, f.0.g_inverse(y))
}

/// Young conjugate `G̃(y) = ∫_0^y g⁻¹`.
#[no_mangle]
pub extern "C" fn orlicz_gtilde(f: *const OrliczGFunction, y: f64, out: *mut f64) -> OrliczStatus {
    let f = nonnull!(f);
    scalar_out(out, f.0.gtilde(y))
}

/// The slope `λ*` with `g(λ*)λ* − G(λ*) = λ`.
#[no_mangle]
pub extern "C" fn orlicz_lambda_star(
    f: *const OrliczGFunction,
    lambda: f64,
    out: *mut f64,
) -> OrliczStatus {
    let f = nonnull!(f);
    scalar_out(out, f.0.lambda_star(lambda))
}

/// Empirical range of `t g'(t)/g(t)` on a log grid; returns
/// `NumericalError` when the certified bounds fail to bracket it.
#[no_mangle]
pub extern "C" fn orlicz_check_condition(
    f: *const OrliczGFunction,
    tmin: f64,
    tmax: f64,
    n: usize,
    delta_emp: *mut f64,
    g0_emp: *mut f64,
) -> OrliczStatus {
    let f = nonnull!(f);
    let (d, g) = match (unsafe { delta_emp.as_mut() }, unsafe { g0_emp.as_mut() }) {
        (Some(d), Some(g)) => (d, g),
        _ => return OrliczStatus::NullArgument,
    };
    match f.0.check_condition(tmin, tmax, n) {
        Ok(c) => {
            *d = c.delta_emp;
            *g = c.g0_emp;
            if c.bracketed {
                OrliczStatus::Ok
            } else {
                OrliczStatus::NumericalError
            }
        }
        Err(e) => status_of(&e),
    }
}

/// Uniform rectangle grid with zero Dirichlet data; `ny = 1` is 1D.
#[no_mangle]
pub extern "C" fn orlicz_grid_rectangle(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    out: *mut *mut OrliczGrid,
) -> OrliczStatus {
    let out = out_ptr!(out);
    match Grid::rectangle(nx, ny, lx, ly) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(OrliczGrid(g)));
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `g` must be a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn orlicz_grid_free(g: *mut OrliczGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Dirichlet data `(1 - x)^+ * scale` on the whole boundary.
#[no_mangle]
pub extern "C" fn orlicz_grid_set_phi0_strip(g: *mut OrliczGrid, scale: f64) -> OrliczStatus {
    let Some(g) = (unsafe { g.as_mut() }) else {
        return OrliczStatus::NullArgument;
    };
    match g.0.set_phi0(move |x, _| scale * (1.0 - x).max(0.0)) {
        Ok(()) => OrliczStatus::Ok,
        Err(e) => status_of(&e),
    }
}

/// Dirichlet data from a full nodal array of length `nx * ny` (interior
/// entries ignored).
///
/// # Safety
/// `values` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn orlicz_grid_set_phi0_values(
    g: *mut OrliczGrid,
    values: *const f64,
    n: usize,
) -> OrliczStatus {
    let Some(g) = (unsafe { g.as_mut() }) else {
        return OrliczStatus::NullArgument;
    };
    if values.is_null() {
        return OrliczStatus::NullArgument;
    }
    let vals = unsafe { std::slice::from_raw_parts(values, n) };
    match g.0.set_phi0_values(vals) {
        Ok(()) => OrliczStatus::Ok,
        Err(e) => status_of(&e),
    }
}

/// Minimize `J` with default options and the given seed and restart
/// count; returns a field handle.
#[no_mangle]
pub extern "C" fn orlicz_minimize(
    g: *const OrliczGrid,
    f: *const OrliczGFunction,
    lambda: f64,
    seed: u64,
    restarts: usize,
    out: *mut *mut OrliczField,
) -> OrliczStatus {
    let g = nonnull!(g);
    let f = nonnull!(f);
    let out = out_ptr!(out);
    let opts = SolveOptions { seed, restarts, ..SolveOptions::default() };
    match solver::minimize(&Arc::new(g.0.clone()), &f.0, lambda, &opts) {
        Ok((u, _)) => {
            *out = Box::into_raw(Box::new(OrliczField(u)));
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `f` must be a live field handle.
#[no_mangle]
pub unsafe extern "C" fn orlicz_field_free(f: *mut OrliczField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub extern "C" fn orlicz_field_node_count(f: *const OrliczField) -> usize {
    match unsafe { f.as_ref() } {
        Some(f) => f.0.values().len(),
        None => 0,
    }
}

/// Borrow the nodal values (row-major; valid while the handle lives).
#[no_mangle]
pub extern "C" fn orlicz_field_values(
    f: *const OrliczField,
    ptr: *mut *const f64,
    len: *mut usize,
) -> OrliczStatus {
    let f = nonnull!(f);
    let (p, l) = match (unsafe { ptr.as_mut() }, unsafe { len.as_mut() }) {
        (Some(p), Some(l)) => (p, l),
        _ => return OrliczStatus::NullArgument,
    };
    *p = f.0.values().as_ptr();
    *l = f.0.values().len();
    OrliczStatus::Ok
}

fn cstr_path<'a>(p: *const c_char) -> Option<&'a Path> {
    if p.is_null() {
        return None;
    }
    let s = unsafe { std::ffi::CStr::from_ptr(p) }.to_str().ok()?;
    Some(Path::new(s))
}

/// Write the field in the `ORLICZFB 1` format.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn orlicz_field_write(f: *const OrliczField, path: *const c_char) -> OrliczStatus {
    let f = nonnull!(f);
    let Some(path) = cstr_path(path) else {
        return OrliczStatus::NullArgument;
    };
    match f.0.write(path) {
        Ok(()) => OrliczStatus::Ok,
        Err(e) => status_of(&e),
    }
}

/// Read a field file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn orlicz_field_read(path: *const c_char, out: *mut *mut OrliczField) -> OrliczStatus {
    let out = out_ptr!(out);
    let Some(path) = cstr_path(path) else {
        return OrliczStatus::NullArgument;
    };
    match Field::read(path) {
        Ok(u) => {
            *out = Box::into_raw(Box::new(OrliczField(u)));
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Exact 1D minimizer serialized as JSON (free with
/// `orlicz_string_free`).
#[no_mangle]
pub extern "C" fn orlicz_exact_solve_1d(
    a: f64,
    b: f64,
    length: f64,
    f: *const OrliczGFunction,
    lambda: f64,
    json_out: *mut *mut c_char,
) -> OrliczStatus {
    let f = nonnull!(f);
    let out = out_ptr!(json_out);
    match oracle1d::exact_solve_1d(a, b, length, &f.0, lambda) {
        Ok(prof) => {
            let json = serde_json::to_string(&prof).expect("profile serializes");
            *out = CString::new(json).expect("no NUL in JSON").into_raw();
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Run the measurement suite; the report is returned as JSON (free with
/// `orlicz_string_free`). `weak_mode != 0` asserts only the
/// weak-solution bounds.
#[no_mangle]
pub extern "C" fn orlicz_verify(
    u: *const OrliczField,
    f: *const OrliczGFunction,
    lambda: f64,
    weak_mode: i32,
    pass: *mut i32,
    json_out: *mut *mut c_char,
) -> OrliczStatus {
    let u = nonnull!(u);
    let f = nonnull!(f);
    let out = out_ptr!(json_out);
    let Some(pass) = (unsafe { pass.as_mut() }) else {
        return OrliczStatus::NullArgument;
    };
    let cfg = VerifyConfig {
        mode: if weak_mode != 0 { VerifyMode::Weak } else { VerifyMode::Minimizer },
        ..VerifyConfig::default()
    };
    match analysis::weak_solution_check(&u.0, &f.0, lambda, &cfg) {
        Ok(report) => {
            *pass = report.pass as i32;
            let json = serde_json::to_string(&report).expect("report serializes");
            *out = CString::new(json).expect("no NUL in JSON").into_raw();
            OrliczStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `s` must have been returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orlicz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_round_trip_through_ffi() {
        let mut f: *mut OrliczGFunction = std::ptr::null_mut();
        assert!(orlicz_gfunction_power(2.0, &mut f) == OrliczStatus::Ok);
        let mut v = 0.0;
        assert!(orlicz_lambda_star(f, 0.5, &mut v) == OrliczStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        assert!(orlicz_eval_g(f, -1.0, &mut v) == OrliczStatus::DomainError);
        unsafe { orlicz_gfunction_free(f) };
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut v = 0.0;
        assert!(orlicz_eval_g(std::ptr::null(), 1.0, &mut v) == OrliczStatus::NullArgument);
        assert!(orlicz_gfunction_power(2.0, std::ptr::null_mut()) == OrliczStatus::NullArgument);
    }

    #[test]
    fn field_round_trip_through_ffi() {
        let mut g: *mut OrliczGrid = std::ptr::null_mut();
        assert!(orlicz_grid_rectangle(9, 5, 2.0, 1.0, &mut g) == OrliczStatus::Ok);
        assert!(orlicz_grid_set_phi0_strip(g, 1.0) == OrliczStatus::Ok);
        let mut f: *mut OrliczGFunction = std::ptr::null_mut();
        assert!(orlicz_gfunction_power(2.0, &mut f) == OrliczStatus::Ok);
        let mut u: *mut OrliczField = std::ptr::null_mut();
        assert!(orlicz_minimize(g, f, 0.5, 0, 0, &mut u) == OrliczStatus::Ok);
        let mut ptr: *const f64 = std::ptr::null();
        let mut len = 0usize;
        assert!(orlicz_field_values(u, &mut ptr, &mut len) == OrliczStatus::Ok);
        assert_eq!(len, 45);
        unsafe {
            orlicz_field_free(u);
            orlicz_gfunction_free(f);
            orlicz_grid_free(g);
        }
    }
}
