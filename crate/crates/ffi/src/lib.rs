//! C ABI over `conformal_lab`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every entry point returns a [`CmlStatus`] and
//! records a message retrievable with [`cml_last_error_message`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conformal_lab::continuation::{run_continuation, ContinuationSchedule, CurvatureTarget};
use conformal_lab::green::singular_part;
use conformal_lab::solver::{CurvatureSpec, Problem, Solution, SolverOptions};
use conformal_lab::{Chart, CmlError, Divisor, Field, Point};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InfeasibleTopology = 3,
    NonConvergence = 4,
    Io = 5,
    Inconclusive = 6,
    Panic = 7,
}

/// Torus grid sample.
pub struct CmlField(Field);

/// Weighted atoms on the torus.
pub struct CmlDivisor(Divisor);

/// Converged solution of the singular Liouville equation.
pub struct CmlSolution(Solution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &CmlError) -> CmlStatus {
    match err {
        CmlError::InfeasibleTopology { .. } => CmlStatus::InfeasibleTopology,
        CmlError::NonConvergence { .. }
        | CmlError::IndefiniteJacobian
        | CmlError::Quadrature(_) => CmlStatus::NonConvergence,
        CmlError::StageFailure { source, .. } => status_of(source),
        CmlError::Inconclusive { .. } => CmlStatus::Inconclusive,
        CmlError::Io(_) | CmlError::GridFormat { .. } => CmlStatus::Io,
        CmlError::InvalidInput(_) | CmlError::OutsideChart { .. } => CmlStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Cml(CmlError),
}

impl From<CmlError> for Failure {
    fn from(e: CmlError) -> Self {
        Failure::Cml(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmlStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CmlStatus::NullPointer
        }
        Ok(Err(Failure::Cml(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CmlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn options(tol: f64) -> SolverOptions {
    SolverOptions {
        tol,
        ..Default::default()
    }
}

/// Message for the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cml_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `n * n` row-major samples into a new torus field.
///
/// # Safety
/// `values` must point to `n * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cml_field_new(
    n: usize,
    values: *const f64,
    out: *mut *mut CmlField,
) -> CmlStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or(Failure::Cml(CmlError::InvalidInput(
            "grid too large".into(),
        )))?;
        let v = slice(values, len, "values")?.to_vec();
        put(out, CmlField(Field::new(n, Chart::Torus, v)?))
    })
}

/// Grid size per axis, or 0 for NULL.
///
/// # Safety
/// `field` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cml_field_size(field: *const CmlField) -> usize {
    field.as_ref().map_or(0, |f| f.0.n())
}

/// Copies the samples into `buf`, which must hold `len >= n * n` doubles.
///
/// # Safety
/// `field` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cml_field_values(
    field: *const CmlField,
    buf: *mut f64,
    len: usize,
) -> CmlStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let v = f.0.values();
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if len < v.len() {
            return Err(
                CmlError::InvalidInput(format!("buffer holds {len}, need {}", v.len())).into(),
            );
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `field` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cml_field_free(field: *mut CmlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Builds a divisor from `count` atoms at `(xs[i], ys[i])` with weights
/// `betas[i]`. Weights below −1 are rejected.
///
/// # Safety
/// The three arrays must hold `count` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cml_divisor_new(
    xs: *const f64,
    ys: *const f64,
    betas: *const f64,
    count: usize,
    out: *mut *mut CmlDivisor,
) -> CmlStatus {
    guard(|| {
        let xs = slice(xs, count, "xs")?;
        let ys = slice(ys, count, "ys")?;
        let bs = slice(betas, count, "betas")?;
        let pts = xs.iter().zip(ys).map(|(&x, &y)| Point::new(x, y)).collect();
        put(out, CmlDivisor(Divisor::new(pts, bs.to_vec())?))
    })
}

/// Euler characteristic of the torus with this divisor, or NaN for NULL.
///
/// # Safety
/// `divisor` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cml_divisor_euler_characteristic(divisor: *const CmlDivisor) -> f64 {
    divisor.as_ref().map_or(f64::NAN, |d| {
        conformal_lab::measure::euler_characteristic(conformal_lab::measure::Surface::Torus, &d.0)
    })
}

/// # Safety
/// `divisor` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cml_divisor_free(divisor: *mut CmlDivisor) {
    if !divisor.is_null() {
        drop(Box::from_raw(divisor));
    }
}

/// Solves with constant curvature `curvature` on an `n × n` grid. All
/// weights must exceed −1; use [`cml_continue_cusp`] for cusps.
///
/// # Safety
/// `divisor` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cml_solve(
    divisor: *const CmlDivisor,
    curvature: f64,
    n: usize,
    tol: f64,
    out: *mut *mut CmlSolution,
) -> CmlStatus {
    guard(|| {
        let d = deref(divisor, "divisor")?;
        let problem = Problem::new(CurvatureSpec::constant(curvature)?, singular_part(&d.0, n)?)?;
        let sol = problem.solve(&problem.default_guess()?, &options(tol))?;
        put(out, CmlSolution(sol))
    })
}

/// Like [`cml_solve`] with a sampled curvature field. Bounds are checked
/// on the grid the field was sampled on.
///
/// # Safety
/// `divisor` and `curvature` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cml_solve_grid(
    divisor: *const CmlDivisor,
    curvature: *const CmlField,
    tol: f64,
    out: *mut *mut CmlSolution,
) -> CmlStatus {
    guard(|| {
        let d = deref(divisor, "divisor")?;
        let k = deref(curvature, "curvature")?;
        let n = k.0.n();
        let problem = Problem::new(CurvatureSpec::grid(k.0.clone())?, singular_part(&d.0, n)?)?;
        let sol = problem.solve(&problem.default_guess()?, &options(tol))?;
        put(out, CmlSolution(sol))
    })
}

/// Runs the default cone-to-cusp schedule towards `target` with constant
/// curvature. Stage areas are written to `areas` (up to `stages` entries)
/// and the last stage's solution to `out`.
///
/// # Safety
/// `target` must be a live handle, `areas` NULL or writable for `stages`
/// doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cml_continue_cusp(
    target: *const CmlDivisor,
    curvature: f64,
    n: usize,
    stages: u32,
    tol: f64,
    areas: *mut f64,
    out: *mut *mut CmlSolution,
) -> CmlStatus {
    guard(|| {
        let d = deref(target, "target")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let sched = ContinuationSchedule::cusp_default(
            &d.0,
            &CurvatureTarget::Constant(curvature),
            stages,
        )?;
        let run = run_continuation(&sched, n, &options(tol))?;
        if !areas.is_null() {
            for (i, s) in run.stages.iter().enumerate().take(stages as usize) {
                *areas.add(i) = s.area;
            }
        }
        put(out, CmlSolution(run.last))
    })
}

/// Total area of the metric e^{2u}|dz|², or NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cml_solution_area(sol: *const CmlSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.area)
}

/// |∫K dA − 2πχ|, or NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cml_solution_gb_defect(sol: *const CmlSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.gb_defect)
}

/// Final Newton residual (sup norm), or NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cml_solution_residual(sol: *const CmlSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.residual_norm)
}

/// Newton iterations used, or 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cml_solution_iterations(sol: *const CmlSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.iterations)
}

/// Regular part v of the solution as a new field handle.
///
/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cml_solution_regular_part(
    sol: *const CmlSolution,
    out: *mut *mut CmlField,
) -> CmlStatus {
    guard(|| {
        let s = deref(sol, "sol")?;
        put(out, CmlField(s.0.v.clone()))
    })
}

/// # Safety
/// `sol` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cml_solution_free(sol: *mut CmlSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
