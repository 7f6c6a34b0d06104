//! C ABI for the consistent-histories engine.
//!
//! The surface is deliberately narrow: load a scenario (from a file path,
//! a JSON string, or a built-in demo), run its queries, and read the
//! report back as JSON or human-readable text. Handles are opaque;
//! every constructor has a matching `_free`; strings returned by the
//! library must be released with [`chq_string_free`].
//!
//! All functions return a [`ChqStatus`]; on failure the thread-local
//! message from [`chq_last_error`] carries the details.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use chq::report::Report;
use chq::scenario::{self, RunOptions, Scenario};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChqStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidScenario = 4,
    Panic = 5,
}

/// Opaque handle to a validated scenario.
pub struct ChqScenario {
    inner: Scenario,
}

/// Opaque handle to a finished report.
pub struct ChqReport {
    inner: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c =
        CString::new(message.replace('\0', "?")).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "?"))
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, ChqStatus> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(ChqStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8".into());
        ChqStatus::InvalidUtf8
    })
}

fn scenario_status(err: &scenario::ScenarioError) -> ChqStatus {
    match err {
        scenario::ScenarioError::Io { .. } => ChqStatus::Io,
        _ => ChqStatus::InvalidScenario,
    }
}

unsafe fn deliver_scenario(
    out: *mut *mut ChqScenario,
    result: Result<Scenario, scenario::ScenarioError>,
) -> ChqStatus {
    if out.is_null() {
        set_error("null output pointer".into());
        return ChqStatus::NullArgument;
    }
    match result {
        Ok(inner) => {
            clear_error();
            *out = Box::into_raw(Box::new(ChqScenario { inner }));
            ChqStatus::Ok
        }
        Err(e) => {
            let status = scenario_status(&e);
            set_error(e.to_string());
            *out = std::ptr::null_mut();
            status
        }
    }
}

fn guarded<T>(f: impl FnOnce() -> T) -> Result<T, ChqStatus> {
    catch_unwind(AssertUnwindSafe(f)).map_err(|_| {
        set_error("internal panic".into());
        ChqStatus::Panic
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn chq_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Last error message for this thread as a fresh allocation (empty string
/// when no error is pending). Free with `chq_string_free`.
#[no_mangle]
pub extern "C" fn chq_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        let text = slot
            .borrow()
            .as_ref()
            .map(|c| c.to_string_lossy().into_owned())
            .unwrap_or_default();
        to_c_string(text)
    })
}

/// Load and validate a scenario file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn chq_scenario_load_path(
    path: *const c_char,
    out: *mut *mut ChqScenario,
) -> ChqStatus {
    let path = match read_str(path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match guarded(|| scenario::load_path(path)) {
        Ok(result) => deliver_scenario(out, result),
        Err(status) => status,
    }
}

/// Load and validate a scenario from a JSON string.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn chq_scenario_load_json(
    json: *const c_char,
    out: *mut *mut ChqScenario,
) -> ChqStatus {
    let json = match read_str(json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match guarded(|| scenario::load_str(json)) {
        Ok(result) => deliver_scenario(out, result),
        Err(status) => status,
    }
}

/// Load a built-in demo scenario (`stern_gerlach` or `crossed_beam`) with
/// its bundled default parameters.
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn chq_demo_scenario(
    name: *const c_char,
    out: *mut *mut ChqScenario,
) -> ChqStatus {
    let name = match read_str(name) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match guarded(|| scenario::demo_scenario(name, None, None)) {
        Ok(result) => deliver_scenario(out, result),
        Err(status) => status,
    }
}

/// Load the Stern-Gerlach demo with explicit spin amplitudes
/// α = a_re + i·a_im, β = b_re + i·b_im (|α|² + |β|² must be 1).
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn chq_demo_stern_gerlach(
    a_re: f64,
    a_im: f64,
    b_re: f64,
    b_im: f64,
    out: *mut *mut ChqScenario,
) -> ChqStatus {
    match guarded(|| {
        scenario::demo_scenario("stern_gerlach", Some([a_re, a_im]), Some([b_re, b_im]))
    }) {
        Ok(result) => deliver_scenario(out, result),
        Err(status) => status,
    }
}

/// Scenario digest (hex SHA-256 of the canonical form). Free with
/// `chq_string_free`.
///
/// # Safety
/// `scenario` must be a live handle from one of the load functions.
#[no_mangle]
pub unsafe extern "C" fn chq_scenario_digest(scenario: *const ChqScenario) -> *mut c_char {
    if scenario.is_null() {
        set_error("null scenario handle".into());
        return std::ptr::null_mut();
    }
    to_c_string((*scenario).inner.digest.clone())
}

/// Run every query in the scenario. `consistency_tol` overrides the
/// scenario's consistency tolerance when nonnegative; pass a negative
/// value to keep the scenario default. Query failures do not fail the
/// call — inspect `chq_report_has_errors`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chq_scenario_run(
    scenario: *const ChqScenario,
    consistency_tol: f64,
    out: *mut *mut ChqReport,
) -> ChqStatus {
    if scenario.is_null() || out.is_null() {
        set_error("null argument".into());
        return ChqStatus::NullArgument;
    }
    let options = RunOptions {
        consistency_tol: (consistency_tol >= 0.0).then_some(consistency_tol),
    };
    match guarded(|| scenario::run(&(*scenario).inner, &options)) {
        Ok(report) => {
            clear_error();
            *out = Box::into_raw(Box::new(ChqReport { inner: report }));
            ChqStatus::Ok
        }
        Err(status) => status,
    }
}

/// True when any query in the report failed.
///
/// # Safety
/// `report` must be a live handle from `chq_scenario_run`.
#[no_mangle]
pub unsafe extern "C" fn chq_report_has_errors(report: *const ChqReport) -> bool {
    !report.is_null() && (*report).inner.has_errors()
}

/// Machine-readable report (JSON). Free with `chq_string_free`.
///
/// # Safety
/// `report` must be a live handle from `chq_scenario_run`.
#[no_mangle]
pub unsafe extern "C" fn chq_report_to_json(report: *const ChqReport) -> *mut c_char {
    if report.is_null() {
        set_error("null report handle".into());
        return std::ptr::null_mut();
    }
    to_c_string((*report).inner.to_json())
}

/// Human-readable report. Free with `chq_string_free`.
///
/// # Safety
/// `report` must be a live handle from `chq_scenario_run`.
#[no_mangle]
pub unsafe extern "C" fn chq_report_to_text(report: *const ChqReport) -> *mut c_char {
    if report.is_null() {
        set_error("null report handle".into());
        return std::ptr::null_mut();
    }
    let tol = (*report).inner.tolerance;
    to_c_string((*report).inner.to_human(tol))
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chq_scenario_free(scenario: *mut ChqScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chq_report_free(report: *mut ChqReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string produced by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn chq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
