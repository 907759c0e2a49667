//! C interface to the asyncnet toolkit.
//!
//! Every function returns an [`AsyncnetStatus`]. On failure a description is
//! kept per thread and can be read with [`asyncnet_last_error_message`].
//! Experiments are opaque handles created from a JSON config or a preset
//! name and released with [`asyncnet_experiment_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use asyncnet::harness::{analyze, preset, run_compare, to_json, ExperimentConfig};
use asyncnet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsyncnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    UnknownPreset = 5,
    Topology = 6,
    Model = 7,
    Numerical = 8,
    Divergence = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque experiment handle.
pub struct AsyncnetExperiment {
    config: ExperimentConfig,
}

/// Steady-state predictions (dB) and convergence quantities.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AsyncnetTheory {
    pub msd_db_dist_sync: f64,
    pub msd_db_dist_async: f64,
    pub msd_db_cent_sync: f64,
    pub msd_db_cent_async: f64,
    pub nu: f64,
    pub rho_mean: f64,
    pub rho_ms_sync: f64,
    pub rho_ms_async: f64,
    pub ms_stable: bool,
    pub fourth_stable: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AsyncnetStatus {
    match err {
        Error::Parse(_) => AsyncnetStatus::Parse,
        Error::Validation { .. } => AsyncnetStatus::Validation,
        Error::UnknownPreset(_) => AsyncnetStatus::UnknownPreset,
        Error::EmptyNetwork | Error::UnconnectedTopology(_) | Error::InvalidTopology(_) => AsyncnetStatus::Topology,
        Error::InvalidModel(_)
        | Error::EnumerationOverflow { .. }
        | Error::NotPrimitive(_)
        | Error::MatchingViolated(_)
        | Error::DimensionGuard { .. } => AsyncnetStatus::Model,
        Error::SingularH(_) | Error::SingularAggregateCovariance | Error::InsufficientIterations { .. } => {
            AsyncnetStatus::Numerical
        }
        Error::NumericalDivergence { .. } => AsyncnetStatus::Divergence,
        Error::Io { .. } => AsyncnetStatus::Io,
    }
}

enum Failure {
    Status(AsyncnetStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AsyncnetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AsyncnetStatus::Ok
        }
        Ok(Err(Failure::Status(status, message))) => {
            set_error(message);
            status
        }
        Ok(Err(Failure::Core(err))) => {
            set_error(err.to_string());
            status_of(&err)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            AsyncnetStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(AsyncnetStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(AsyncnetStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(p: *const AsyncnetExperiment) -> Result<&'a AsyncnetExperiment, Failure> {
    p.as_ref().ok_or_else(|| null("experiment"))
}

unsafe fn store(out: *mut *mut AsyncnetExperiment, config: ExperimentConfig) {
    *out = Box::into_raw(Box::new(AsyncnetExperiment { config }));
}

/// Creates an experiment from a JSON config document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_experiment_from_json(
    json: *const c_char,
    out: *mut *mut AsyncnetExperiment,
) -> AsyncnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config = ExperimentConfig::from_json_str(read_str(json, "json")?)?;
        store(out, config);
        Ok(())
    })
}

/// Creates an experiment from a preset name (`"desk"` or `"paper-fig3"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_experiment_from_preset(
    name: *const c_char,
    out: *mut *mut AsyncnetExperiment,
) -> AsyncnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config = preset(read_str(name, "name")?)?;
        store(out, config);
        Ok(())
    })
}

/// Releases an experiment. Null is ignored.
///
/// # Safety
/// `experiment` must come from one of the constructors and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_experiment_free(experiment: *mut AsyncnetExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}

/// Overrides the simulation base seed. Parameter draws keep their seed.
///
/// # Safety
/// `experiment` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_experiment_set_seed(
    experiment: *mut AsyncnetExperiment,
    seed: u64,
) -> AsyncnetStatus {
    guard(|| {
        let e = experiment.as_mut().ok_or_else(|| null("experiment"))?;
        if e.config.parameter_seed.is_none() {
            e.config.parameter_seed = Some(e.config.seed);
        }
        e.config.seed = seed;
        Ok(())
    })
}

/// Overrides the trial and iteration counts.
///
/// # Safety
/// `experiment` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_experiment_set_simulation(
    experiment: *mut AsyncnetExperiment,
    trials: usize,
    iterations: usize,
) -> AsyncnetStatus {
    guard(|| {
        let e = experiment.as_mut().ok_or_else(|| null("experiment"))?;
        let mut config = e.config.clone();
        config.simulation.trials = trials;
        config.simulation.iterations = iterations;
        config.validate()?;
        e.config = config;
        Ok(())
    })
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `experiment` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_experiment_n_agents(experiment: *const AsyncnetExperiment) -> usize {
    experiment.as_ref().map_or(0, |e| e.config.n_agents())
}

/// Computes the steady-state predictions.
///
/// # Safety
/// `experiment` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_theory(
    experiment: *const AsyncnetExperiment,
    out: *mut AsyncnetTheory,
) -> AsyncnetStatus {
    guard(|| {
        let e = handle(experiment)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let t = analyze(&e.config)?.theory;
        *out = AsyncnetTheory {
            msd_db_dist_sync: t.msd_db.dist_sync,
            msd_db_dist_async: t.msd_db.dist_async,
            msd_db_cent_sync: t.msd_db.cent_sync,
            msd_db_cent_async: t.msd_db.cent_async,
            nu: t.nu,
            rho_mean: t.rho_mean,
            rho_ms_sync: t.rho_ms_sync,
            rho_ms_async: t.rho_ms_async,
            ms_stable: t.stability.ms_stable,
            fourth_stable: t.stability.fourth_stable,
        };
        Ok(())
    })
}

/// Writes the Perron vector `p̄` of the mean combination matrix into `buffer`.
/// `written` receives the number of agents, also when the buffer is too small.
///
/// # Safety
/// `buffer` must hold `len` doubles; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_perron_vector(
    experiment: *const AsyncnetExperiment,
    buffer: *mut f64,
    len: usize,
    written: *mut usize,
) -> AsyncnetStatus {
    guard(|| {
        let e = handle(experiment)?;
        let p = analyze(&e.config)?.moments.p_bar;
        if let Some(w) = written.as_mut() {
            *w = p.len();
        }
        if len < p.len() {
            return Err(Failure::Status(
                AsyncnetStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {}", p.len()),
            ));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        std::slice::from_raw_parts_mut(buffer, p.len()).copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Runs the full comparison and returns the report as a JSON string, to be
/// released with [`asyncnet_string_free`]. A diverging simulation still
/// returns the partial report, with status `Divergence`.
///
/// # Safety
/// `experiment` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_compare_json(
    experiment: *const AsyncnetExperiment,
    out_json: *mut *mut c_char,
) -> AsyncnetStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = ptr::null_mut();
        let e = handle(experiment)?;
        let report = run_compare(&e.config)?.report;
        let text = CString::new(to_json(&report)).expect("JSON has no NUL");
        *out_json = text.into_raw();
        match &report.error {
            Some(msg) => Err(Failure::Status(AsyncnetStatus::Divergence, msg.clone())),
            None => Ok(()),
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn asyncnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn asyncnet_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn asyncnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
