//! C ABI over the rootlip solver.
//!
//! Every entry point returns an [`RlStatus`]. On failure the message is
//! available from [`rl_last_error`] on the same thread until the next call.
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rootlip::cli::{self, ScenarioConfig};
use rootlip::diagnostics::riccati_reference;
use rootlip::domain::{CaseKind, DomainCase};
use rootlip::solver::{SolveResult, Status};
use rootlip::transform::{default_y_range, v_to_u, Transform};
use rootlip::Error;

/// Result code of every `rl_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidInput = 4,
    SolverFailure = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlCaseKind {
    /// Bounded interval (0, L); the parameter is L.
    Interval = 0,
    /// Whole line; the parameter is γ.
    Line = 1,
    /// Half-line (0, ∞); the parameter is γ.
    HalfLine = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlSolveStatus {
    Completed = 0,
    BlowupDetected = 1,
    StepFailure = 2,
}

/// A change of variables ζ for one domain case.
pub struct RlTransform {
    inner: Transform,
}

/// A finished solve: snapshots, trust regions and status.
pub struct RlSolution {
    inner: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> RlStatus {
    match cli::error_exit_code(e) {
        cli::EXIT_SOLVER => RlStatus::SolverFailure,
        _ => match e {
            Error::InvalidConfig(_) => RlStatus::InvalidConfig,
            _ => RlStatus::InvalidInput,
        },
    }
}

/// Run `f`, recording its error and containing panics.
fn guard(f: impl FnOnce() -> Result<(), (RlStatus, String)>) -> RlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            RlStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RlStatus, String) {
    (RlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (RlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (RlStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next `rl_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// s(t) = 2/(2/s0 − t), the blow-up curve of ∂x²u at the boundary.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn rl_riccati_reference(s0: f64, t: f64, out: *mut f64) -> RlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = riccati_reference(s0, t).map_err(lib_err)?;
        Ok(())
    })
}

/// Build the default transform for a case. `param` is L for the interval
/// and γ otherwise.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_transform_new(
    kind: RlCaseKind,
    param: f64,
    kappa: f64,
    k: f64,
    out: *mut *mut RlTransform,
) -> RlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let kind = match kind {
            RlCaseKind::Interval => CaseKind::BoundedInterval { length: param },
            RlCaseKind::Line => CaseKind::WholeLine { gamma: param },
            RlCaseKind::HalfLine => CaseKind::HalfLine { gamma: param },
        };
        let case = DomainCase::new(kind, kappa, k).map_err(lib_err)?;
        let inner = Transform::new(case, default_y_range(&case)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RlTransform { inner }));
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a handle from [`rl_transform_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_transform_free(t: *mut RlTransform) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Computational box [y_min, y_max] of the transform.
///
/// # Safety
/// `t` must be a live handle; `y_min` and `y_max` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_transform_y_range(t: *const RlTransform, y_min: *mut f64, y_max: *mut f64) -> RlStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        let (lo, hi) = (out_ref(y_min, "y_min")?, out_ref(y_max, "y_max")?);
        *lo = t.inner.y_min;
        *hi = t.inner.y_max;
        Ok(())
    })
}

/// x = ζ(y) together with ζ'(y).
///
/// # Safety
/// `t` must be a live handle; `x` and `dx_dy` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_transform_zeta(t: *const RlTransform, y: f64, x: *mut f64, dx_dy: *mut f64) -> RlStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        let (x, d) = (out_ref(x, "x")?, out_ref(dx_dy, "dx_dy")?);
        if !y.is_finite() {
            return Err((RlStatus::OutOfRange, format!("y = {y}")));
        }
        *x = t.inner.zeta(y);
        *d = t.inner.zeta1(y);
        Ok(())
    })
}

/// y = ζ⁻¹(x) for x in the image of ζ.
///
/// # Safety
/// `t` must be a live handle; `y` a writable double.
#[no_mangle]
pub unsafe extern "C" fn rl_transform_inverse(t: *const RlTransform, x: f64, y: *mut f64) -> RlStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        let y = out_ref(y, "y")?;
        let inside = match t.inner.case.kind {
            CaseKind::BoundedInterval { length } => x > 0.0 && x < length,
            CaseKind::HalfLine { .. } => x > 0.0,
            CaseKind::WholeLine { .. } => true,
        };
        if !(inside && x.is_finite()) {
            return Err((RlStatus::OutOfRange, format!("x = {x} is outside the image of the transform")));
        }
        *y = t.inner.inverse(x);
        Ok(())
    })
}

fn parse_config(text: &str) -> Result<ScenarioConfig, (RlStatus, String)> {
    ScenarioConfig::parse(text).map_err(|e| (RlStatus::InvalidConfig, e.to_string()))
}

/// Solve from a scenario config (JSON, the CLI's schema). Only the case,
/// `u0`, `solver` and `y_range` sections are used.
///
/// # Safety
/// `config_json` must be NULL or a NUL-terminated string; `out` must be
/// NULL or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_solve(config_json: *const c_char, out: *mut *mut RlSolution) -> RlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let cfg = parse_config(read_str(config_json, "config_json")?)?;
        let inner = cli::solve_config(&cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RlSolution { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a handle from [`rl_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_solution_free(s: *mut RlSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Terminal status; `t_stop` is the final time, or the estimated blow-up
/// time when one was detected.
///
/// # Safety
/// `s` must be a live handle; `status` and `t_stop` writable.
#[no_mangle]
pub unsafe extern "C" fn rl_solution_status(
    s: *const RlSolution,
    status: *mut RlSolveStatus,
    t_stop: *mut f64,
) -> RlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        let (st, ts) = (out_ref(status, "status")?, out_ref(t_stop, "t_stop")?);
        let last = s.inner.final_field().t;
        (*st, *ts) = match &s.inner.status {
            Status::Completed => (RlSolveStatus::Completed, last),
            Status::BlowupDetected { t_star, .. } => (RlSolveStatus::BlowupDetected, *t_star),
            Status::StepFailure { t, .. } => (RlSolveStatus::StepFailure, *t),
        };
        Ok(())
    })
}

/// Number of stored snapshots, including t = 0.
///
/// # Safety
/// `s` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn rl_solution_snapshot_count(s: *const RlSolution, count: *mut usize) -> RlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        *out_ref(count, "count")? = s.inner.trajectory.len();
        Ok(())
    })
}

/// Copy snapshot `k` over its trusted nodes into `x` and `u`, each of
/// capacity `cap`. `len` receives the node count; when it exceeds `cap`
/// nothing is copied and `RL_STATUS_BUFFER_TOO_SMALL` is returned, so a
/// call with `cap = 0` queries the size.
///
/// # Safety
/// `s` must be a live handle; `t` and `len` writable; `x` and `u` must each
/// hold `cap` doubles (they may be NULL when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn rl_solution_snapshot(
    s: *const RlSolution,
    k: usize,
    t: *mut f64,
    x: *mut f64,
    u: *mut f64,
    cap: usize,
    len: *mut usize,
) -> RlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        let (t, len) = (out_ref(t, "t")?, out_ref(len, "len")?);
        let r = &s.inner;
        if k >= r.trajectory.len() {
            return Err((RlStatus::OutOfRange, format!("snapshot {k} of {}", r.trajectory.len())));
        }
        let f = &r.trajectory[k];
        let (lo, hi) = r.trust[k];
        let n = hi + 1 - lo;
        *t = f.t;
        *len = n;
        if n > cap {
            return Err((RlStatus::BufferTooSmall, format!("snapshot {k} has {n} nodes, buffer holds {cap}")));
        }
        if x.is_null() || u.is_null() {
            return Err(null("x or u"));
        }
        let uu = v_to_u(f, &r.geometry);
        let xs = std::slice::from_raw_parts_mut(x, n);
        let us = std::slice::from_raw_parts_mut(u, n);
        xs.copy_from_slice(&r.geometry.x[lo..=hi]);
        us.copy_from_slice(&uu[lo..=hi]);
        Ok(())
    })
}

/// Run a full scenario in memory (no files are written). `exit_code`
/// receives the CLI exit code; `report_json` receives the report document,
/// to be released with [`rl_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `exit_code` and
/// `report_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_run_scenario(
    config_json: *const c_char,
    exit_code: *mut i32,
    report_json: *mut *mut c_char,
) -> RlStatus {
    guard(|| {
        let (code, report) = (out_ref(exit_code, "exit_code")?, out_ref(report_json, "report_json")?);
        *report = ptr::null_mut();
        let cfg = parse_config(read_str(config_json, "config_json")?)?;
        let outcome = match cli::execute(&cfg) {
            Ok(o) => o,
            Err(e) => {
                *code = cli::error_exit_code(&e);
                return Err(lib_err(e));
            }
        };
        *code = outcome.exit_code();
        let text = rootlip::io::to_json(&cli::report_json(&outcome)).map_err(lib_err)?;
        *report = CString::new(text).map_err(|e| (RlStatus::InvalidInput, e.to_string()))?.into_raw();
        Ok(())
    })
}
