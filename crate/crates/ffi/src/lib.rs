//! C ABI over the hjgraph solver.
//!
//! Conventions: handles are opaque pointers created and destroyed here;
//! every fallible call returns an [`HjgStatus`] and writes results through
//! out-pointers; the last failure message per thread is retrievable with
//! [`hjg_last_error_message`]. Strings returned by this library must be
//! released with [`hjg_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use libc::{c_char, c_double, c_int};

use hjgraph_core::cli::{run, Command};
use hjgraph_core::error::Error;
use hjgraph_core::graph::{EdgeId, GraphPoint};
use hjgraph_core::scenario::{load_scenario, Scenario};
use hjgraph_core::solver::{solve, ValueGrid};
use hjgraph_core::verification::{run_full_verification, SamplerConfig};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjgStatus {
    Ok = 0,
    NullPointer = 1,
    Utf8Error = 2,
    ConfigError = 3,
    InternalError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HjgStatus {
    match err {
        Error::Internal(_) => HjgStatus::InternalError,
        _ => HjgStatus::ConfigError,
    }
}

fn guard<T>(f: impl FnOnce() -> Result<T, (HjgStatus, String)>) -> Result<T, HjgStatus> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err((status, msg))) => {
            set_error(msg);
            Err(status)
        }
        Err(_) => {
            set_error("panic across the FFI boundary");
            Err(HjgStatus::InternalError)
        }
    }
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, (HjgStatus, String)> {
    if ptr.is_null() {
        return Err((HjgStatus::NullPointer, "null path".into()));
    }
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| (HjgStatus::Utf8Error, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

/// Opaque scenario handle.
pub struct HjgScenario {
    inner: Scenario,
}

/// Opaque solution handle: a solved value grid plus the output sign of
/// the scenario orientation.
pub struct HjgSolution {
    grid: ValueGrid,
    sign: f64,
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn hjg_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr() as *const c_char
}

/// Returns the last error message on this thread as a newly allocated
/// string (free with [`hjg_string_free`]), or NULL if none.
#[no_mangle]
pub extern "C" fn hjg_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string allocated by this library.
///
/// # Safety
/// `s` must have been returned by an hjgraph function and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn hjg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hjg_scenario_load(
    path: *const c_char,
    out: *mut *mut HjgScenario,
) -> HjgStatus {
    if out.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    let result = guard(|| {
        let path = path_arg(path)?;
        let scenario =
            load_scenario(&path).map_err(|e| (status_of(&e), e.to_string()))?;
        Ok(HjgScenario { inner: scenario })
    });
    match result {
        Ok(handle) => {
            *out = Box::into_raw(Box::new(handle));
            HjgStatus::Ok
        }
        Err(status) => {
            *out = std::ptr::null_mut();
            status
        }
    }
}

/// Releases a scenario handle.
///
/// # Safety
/// `s` must come from [`hjg_scenario_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hjg_scenario_free(s: *mut HjgScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of lattice nodes of a loaded scenario (0 on null).
///
/// # Safety
/// `s` must be a valid scenario handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hjg_scenario_node_count(s: *const HjgScenario) -> usize {
    match s.as_ref() {
        Some(h) => h.inner.lattice.num_nodes(),
        None => 0,
    }
}

/// Solves the scenario and returns a solution handle.
///
/// # Safety
/// `s` must be a valid scenario handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hjg_solve(
    s: *const HjgScenario,
    out: *mut *mut HjgSolution,
) -> HjgStatus {
    if out.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    *out = std::ptr::null_mut();
    let Some(handle) = s.as_ref() else {
        set_error("null scenario handle");
        return HjgStatus::NullPointer;
    };
    let result = guard(|| {
        let sc = &handle.inner;
        let grid = solve(
            &sc.lattice,
            &sc.lag,
            &sc.u0,
            sc.t_horizon,
            sc.dt,
            sc.speed_grid(),
        )
        .map_err(|e| (status_of(&e), e.to_string()))?;
        Ok(HjgSolution {
            grid,
            sign: if sc.negate_output { -1.0 } else { 1.0 },
        })
    });
    match result {
        Ok(sol) => {
            *out = Box::into_raw(Box::new(sol));
            HjgStatus::Ok
        }
        Err(status) => status,
    }
}

/// Releases a solution handle.
///
/// # Safety
/// `s` must come from [`hjg_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_free(s: *mut HjgSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of lattice nodes (0 on null).
///
/// # Safety
/// `s` must be a valid solution handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_node_count(s: *const HjgSolution) -> usize {
    s.as_ref().map_or(0, |h| h.grid.lattice().num_nodes())
}

/// Number of time steps (0 on null).
///
/// # Safety
/// `s` must be a valid solution handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_step_count(s: *const HjgSolution) -> usize {
    s.as_ref().map_or(0, |h| h.grid.num_steps())
}

/// Time step of the solution grid (0 on null).
///
/// # Safety
/// `s` must be a valid solution handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_dt(s: *const HjgSolution) -> c_double {
    s.as_ref().map_or(0.0, |h| h.grid.dt())
}

/// Location of lattice node `node` as (edge id, offset).
///
/// # Safety
/// All pointers must be valid; `s` a valid solution handle.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_node_location(
    s: *const HjgSolution,
    node: usize,
    out_edge: *mut usize,
    out_offset: *mut c_double,
) -> HjgStatus {
    let Some(handle) = s.as_ref() else {
        set_error("null solution handle");
        return HjgStatus::NullPointer;
    };
    if out_edge.is_null() || out_offset.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    if node >= handle.grid.lattice().num_nodes() {
        set_error(format!("node {node} out of range"));
        return HjgStatus::ConfigError;
    }
    let p = handle.grid.lattice().node_point(node);
    *out_edge = p.edge.0;
    *out_offset = p.offset;
    HjgStatus::Ok
}

/// U at lattice node `node` and time index `step`.
///
/// # Safety
/// All pointers must be valid; `s` a valid solution handle.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_value(
    s: *const HjgSolution,
    node: usize,
    step: usize,
    out: *mut c_double,
) -> HjgStatus {
    let Some(handle) = s.as_ref() else {
        set_error("null solution handle");
        return HjgStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    if node >= handle.grid.lattice().num_nodes() || step > handle.grid.num_steps() {
        set_error(format!("(node {node}, step {step}) out of range"));
        return HjgStatus::ConfigError;
    }
    *out = handle.sign * handle.grid.value(node, step);
    HjgStatus::Ok
}

/// U interpolated at an arbitrary point (edge id, offset) and time t.
///
/// # Safety
/// All pointers must be valid; `s` a valid solution handle.
#[no_mangle]
pub unsafe extern "C" fn hjg_solution_value_at(
    s: *const HjgSolution,
    edge: usize,
    offset: c_double,
    t: c_double,
    out: *mut c_double,
) -> HjgStatus {
    let Some(handle) = s.as_ref() else {
        set_error("null solution handle");
        return HjgStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    let lattice = handle.grid.lattice();
    if edge >= lattice.graph().num_edges() {
        set_error(format!("edge {edge} out of range"));
        return HjgStatus::ConfigError;
    }
    let len = lattice.graph().edge(EdgeId(edge)).length;
    if !(0.0..=len).contains(&offset) || !t.is_finite() || t < 0.0 {
        set_error(format!("point ({edge}, {offset}) at t = {t} out of range"));
        return HjgStatus::ConfigError;
    }
    let result = guard(|| {
        Ok(handle
            .grid
            .value_at(GraphPoint::new(EdgeId(edge), offset), t))
    });
    match result {
        Ok(v) => {
            *out = handle.sign * v;
            HjgStatus::Ok
        }
        Err(status) => status,
    }
}

/// Solves and runs the full verification suite; writes 1 to `out_passed`
/// iff every check passes.
///
/// # Safety
/// `s` must be a valid scenario handle; `out_passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hjg_verify(
    s: *const HjgScenario,
    out_passed: *mut c_int,
) -> HjgStatus {
    let Some(handle) = s.as_ref() else {
        set_error("null scenario handle");
        return HjgStatus::NullPointer;
    };
    if out_passed.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    let result = guard(|| {
        let sc = &handle.inner;
        let grid = solve(
            &sc.lattice,
            &sc.lag,
            &sc.u0,
            sc.t_horizon,
            sc.dt,
            sc.speed_grid(),
        )
        .map_err(|e| (status_of(&e), e.to_string()))?;
        let cfg = SamplerConfig {
            seed: sc.verify.seed,
            curve_samples: sc.verify.curve_samples,
            triple_samples: sc.verify.triple_samples,
            trajectory_samples: sc.verify.trajectory_samples,
            viscosity_curves: sc.verify.viscosity_curves,
        };
        let (report, _) = run_full_verification(
            &grid,
            &sc.ham,
            &sc.lag,
            &sc.u0,
            &cfg,
            sc.verify.viscosity_c2,
            &[],
        );
        Ok(report.all_passed())
    });
    match result {
        Ok(passed) => {
            *out_passed = passed as c_int;
            HjgStatus::Ok
        }
        Err(status) => status,
    }
}

/// File-level entry point mirroring the CLI: runs `command` on the
/// scenario at `path`, writing outputs under `out_dir`. As in the CLI,
/// a verify run with failing checks reports `ConfigError`-level status 0
/// via `out_passed`, not an error.
///
/// # Safety
/// `path`, `command`, `out_dir` must be NUL-terminated strings;
/// `out_passed` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hjg_run_command(
    path: *const c_char,
    command: *const c_char,
    out_dir: *const c_char,
    out_passed: *mut c_int,
) -> HjgStatus {
    if out_passed.is_null() {
        set_error("null out pointer");
        return HjgStatus::NullPointer;
    }
    let result = guard(|| {
        let path = path_arg(path)?;
        let out_dir = path_arg(out_dir)?;
        if command.is_null() {
            return Err((HjgStatus::NullPointer, "null command".into()));
        }
        let command = CStr::from_ptr(command)
            .to_str()
            .map_err(|_| (HjgStatus::Utf8Error, "command is not valid UTF-8".into()))?;
        let command = Command::parse(command).map_err(|e| (status_of(&e), e.to_string()))?;
        let scenario = load_scenario(&path).map_err(|e| (status_of(&e), e.to_string()))?;
        run(command, &scenario, Path::new(&out_dir)).map_err(|e| (status_of(&e), e.to_string()))
    });
    match result {
        Ok(passed) => {
            *out_passed = passed as c_int;
            HjgStatus::Ok
        }
        Err(status) => status,
    }
}
