//! C interface to `elastoed`.
//!
//! Configurations and problems are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns an
//! [`ElastoedStatus`]; the message of the most recent failure on the calling
//! thread is available through [`elastoed_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use elastoed::config::ExperimentConfig;
use elastoed::experiment::{self, build_objective};
use elastoed::objective::DesignObjective;
use elastoed::optim::Objective;
use elastoed::Error;

/// Result of a C API call. Codes 2 to 6 match the command line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElastoedStatus {
    Ok = 0,
    InvalidConfig = 2,
    Geometry = 3,
    Numerical = 4,
    Dimension = 5,
    Io = 6,
    NullPointer = 10,
    InvalidUtf8 = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Experiment settings.
pub struct ElastoedConfig(ExperimentConfig);

/// Assembled forward and Gaussian model for one configuration.
pub struct ElastoedProblem {
    config: ExperimentConfig,
    objective: DesignObjective,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> ElastoedStatus {
    match err.code() {
        2 => ElastoedStatus::InvalidConfig,
        3 => ElastoedStatus::Geometry,
        4 => ElastoedStatus::Numerical,
        5 => ElastoedStatus::Dimension,
        _ => ElastoedStatus::Io,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard<F: FnOnce() -> Result<(), ElastoedStatus>>(f: F) -> ElastoedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ElastoedStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            ElastoedStatus::Panic
        }
    }
}

fn fail(err: Error) -> ElastoedStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn null(what: &str) -> ElastoedStatus {
    set_error(format!("{what} is null"));
    ElastoedStatus::NullPointer
}

unsafe fn c_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, ElastoedStatus> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        ElastoedStatus::InvalidUtf8
    })
}

unsafe fn design<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], ElastoedStatus> {
    if ptr.is_null() {
        return Err(null("design"));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Copies the last error message of the calling thread into `buffer` as a
/// NUL-terminated string and returns its length including the terminator.
/// Nothing is written when `buffer` is null or `capacity` is too small.
///
/// # Safety
/// `buffer` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn elastoed_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let needed = message.len() + 1;
        if !buffer.is_null() && capacity >= needed {
            ptr::copy_nonoverlapping(message.as_ptr(), buffer.cast::<u8>(), message.len());
            *buffer.add(message.len()) = 0;
        }
        needed
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn elastoed_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration. Never returns null.
#[no_mangle]
pub extern "C" fn elastoed_config_new() -> *mut ElastoedConfig {
    Box::into_raw(Box::new(ElastoedConfig(ExperimentConfig::default())))
}

/// Parses `key = value` lines over the defaults into a new configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elastoed_config_parse(text: *const c_char, out: *mut *mut ElastoedConfig) -> ElastoedStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ExperimentConfig::parse(c_str(text, "text")?).map_err(fail)?;
        *out = Box::into_raw(Box::new(ElastoedConfig(config)));
        Ok(())
    })
}

/// Sets one configuration key.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn elastoed_config_set(
    config: *mut ElastoedConfig,
    key: *const c_char,
    value: *const c_char,
) -> ElastoedStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        config.0.set(c_str(key, "key")?, c_str(value, "value")?).map_err(fail)
    })
}

/// Releases a configuration; null is ignored.
///
/// # Safety
/// `config` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn elastoed_config_free(config: *mut ElastoedConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured experiment and writes its files to the output
/// directory. `out_phi` may be null.
///
/// # Safety
/// `config` must come from this library; `out_phi` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn elastoed_run(config: *const ElastoedConfig, out_phi: *mut f64) -> ElastoedStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let report = experiment::run(&config.0).map_err(fail)?;
        if let Some(phi) = out_phi.as_mut() {
            *phi = report.outcome.phi;
        }
        Ok(())
    })
}

/// Builds the mesh, factorizes the operator and prepares the model.
///
/// # Safety
/// `config` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_new(
    config: *const ElastoedConfig,
    out: *mut *mut ElastoedProblem,
) -> ElastoedStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let objective = build_objective(&config.0).map_err(fail)?;
        *out = Box::into_raw(Box::new(ElastoedProblem { config: config.0.clone(), objective }));
        Ok(())
    })
}

/// Releases a problem; null is ignored.
///
/// # Safety
/// `problem` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_free(problem: *mut ElastoedProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Boundary length `L`, or NaN for a null problem.
///
/// # Safety
/// `problem` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_length(problem: *const ElastoedProblem) -> f64 {
    problem.as_ref().map_or(f64::NAN, |p| p.objective.length())
}

/// Number of activations the configured search places, or 0 for null.
///
/// # Safety
/// `problem` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_activations(problem: *const ElastoedProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.config.activations)
}

/// Number of unknown parameters `2N`, or 0 for null.
///
/// # Safety
/// `problem` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_parameters(problem: *const ElastoedProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.objective.model().num_parameters())
}

/// `Φ_A` at the `len` positions in `design`.
///
/// # Safety
/// `problem` must come from this library, `design_values` be valid for `len`
/// values and `out_phi` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_evaluate(
    problem: *const ElastoedProblem,
    design_values: *const f64,
    len: usize,
    out_phi: *mut f64,
) -> ElastoedStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out_phi = out_phi.as_mut().ok_or_else(|| null("out_phi"))?;
        *out_phi = problem.objective.value(design(design_values, len)?).map_err(fail)?;
        Ok(())
    })
}

/// `Φ_A` and its gradient; `out_gradient` receives `len` values.
///
/// # Safety
/// `problem` must come from this library, `design_values` and `out_gradient` be
/// valid for `len` values and `out_phi` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_gradient(
    problem: *const ElastoedProblem,
    design_values: *const f64,
    len: usize,
    out_phi: *mut f64,
    out_gradient: *mut f64,
) -> ElastoedStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out_phi = out_phi.as_mut().ok_or_else(|| null("out_phi"))?;
        if out_gradient.is_null() {
            return Err(null("out_gradient"));
        }
        let (phi, grad) = problem.objective.value_and_gradient(design(design_values, len)?).map_err(fail)?;
        *out_phi = phi;
        ptr::copy_nonoverlapping(grad.as_ptr(), out_gradient, len);
        Ok(())
    })
}

/// Runs the configured search without writing files. `out_design` receives
/// [`elastoed_problem_activations`] positions; `capacity` is its length.
///
/// # Safety
/// `problem` must come from this library, `out_design` be valid for
/// `capacity` values and `out_phi` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elastoed_problem_optimize(
    problem: *mut ElastoedProblem,
    out_design: *mut f64,
    capacity: usize,
    out_phi: *mut f64,
) -> ElastoedStatus {
    guard(|| {
        let problem = problem.as_mut().ok_or_else(|| null("problem"))?;
        let out_phi = out_phi.as_mut().ok_or_else(|| null("out_phi"))?;
        if out_design.is_null() {
            return Err(null("out_design"));
        }
        if capacity < problem.config.activations {
            set_error(format!("design buffer holds {capacity} values, {} needed", problem.config.activations));
            return Err(ElastoedStatus::BufferTooSmall);
        }
        let outcome = experiment::search(&problem.config, &mut problem.objective).map_err(fail)?;
        ptr::copy_nonoverlapping(outcome.design.as_ptr(), out_design, outcome.design.len());
        *out_phi = outcome.phi;
        Ok(())
    })
}
