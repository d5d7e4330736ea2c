//! C interface to `safem-core`.
//!
//! Every function returns a [`SafemStatus`]; on failure a description is
//! available from [`safem_last_error`] on the same thread. Runs are opaque
//! handles owned by the caller and released with [`safem_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use safem_core::driver::{run, DriverError, Mode, RunConfig, RunResult, Smoother};
use safem_core::estimate::MarkingConfig;
use safem_core::output::write_csv;
use safem_core::problems::Problem;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A tight solve or smoother broke down.
    SolverFailure = 3,
    /// Marking selected no cell before the last cycle.
    EmptyMarking = 4,
    Io = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafemProblem {
    Peak = 0,
    Corner = 1,
    Drift = 2,
    Sine = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafemMode {
    Afem = 0,
    Safem = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafemSmoother {
    Richardson = 0,
    Cg = 1,
    Gmres = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafemMarking {
    Dorfler = 0,
    FixedFraction = 1,
}

/// Run parameters. Fill with [`safem_config_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SafemConfig {
    pub problem: SafemProblem,
    /// Drift strength, only read for `Drift`.
    pub beta: f64,
    pub degree: u32,
    pub cycles: u32,
    pub mode: SafemMode,
    pub smoother: SafemSmoother,
    pub smoothing_steps: u32,
    pub marking: SafemMarking,
    /// Θ for Dörfler marking, the fraction otherwise.
    pub marking_parameter: f64,
    pub tolerance: f64,
    pub diagnostic: bool,
}

/// One cycle of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SafemRecord {
    pub cycle: u32,
    pub n_cells: u64,
    pub n_dofs: u64,
    pub smoothing_steps: u32,
    pub error_h1: f64,
    pub estimator_j: f64,
    /// NaN unless `has_estimator_j_exact`.
    pub estimator_j_exact: f64,
    pub has_estimator_j_exact: bool,
    pub solver_iterations: u64,
    pub matvec_count: u64,
    pub solve_seconds: f64,
    pub marked_cells: u64,
}

/// Result of [`safem_run`].
pub struct SafemRun {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: SafemStatus, message: impl Into<String>) -> SafemStatus {
    set_error(message);
    status
}

/// Runs `f`, turning panics into `Internal` and clearing the error on success.
fn guard(f: impl FnOnce() -> SafemStatus) -> SafemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(SafemStatus::Ok) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SafemStatus::Ok
        }
        Ok(status) => status,
        Err(_) => fail(SafemStatus::Internal, "panic inside safem"),
    }
}

fn driver_status(e: &DriverError) -> SafemStatus {
    match e {
        DriverError::Config(_) | DriverError::Problem(_) => SafemStatus::InvalidArgument,
        DriverError::Solver { .. } => SafemStatus::SolverFailure,
        DriverError::EmptyMarking(_) => SafemStatus::EmptyMarking,
        _ => SafemStatus::Internal,
    }
}

fn to_problem(config: &SafemConfig) -> Result<Problem, String> {
    Ok(match config.problem {
        SafemProblem::Peak => Problem::Peak,
        SafemProblem::Corner => Problem::Corner,
        SafemProblem::Sine => Problem::Sine,
        SafemProblem::Drift => Problem::drift(config.beta).map_err(|e| e.to_string())?,
    })
}

fn to_run_config(config: &SafemConfig) -> Result<RunConfig, String> {
    let mut run = RunConfig::new(to_problem(config)?, config.degree as usize);
    run.cycles = config.cycles as usize;
    run.mode = match config.mode {
        SafemMode::Afem => Mode::Afem,
        SafemMode::Safem => Mode::Safem,
    };
    run.smoother = match config.smoother {
        SafemSmoother::Richardson => Smoother::Richardson,
        SafemSmoother::Cg => Smoother::Cg,
        SafemSmoother::Gmres => Smoother::Gmres,
    };
    run.smoothing_steps = config.smoothing_steps as usize;
    run.marking = match config.marking {
        SafemMarking::Dorfler => MarkingConfig::Dorfler { theta: config.marking_parameter },
        SafemMarking::FixedFraction => MarkingConfig::FixedFraction { fraction: config.marking_parameter },
    };
    run.tolerance = config.tolerance;
    run.diagnostic = config.diagnostic;
    run.validate().map_err(|e| e.to_string())?;
    Ok(run)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn safem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn safem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the library defaults for `problem` and `degree` into `out`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `SafemConfig`.
#[no_mangle]
pub unsafe extern "C" fn safem_config_default(
    problem: SafemProblem,
    degree: u32,
    out: *mut SafemConfig,
) -> SafemStatus {
    guard(|| {
        if out.is_null() {
            return fail(SafemStatus::NullPointer, "out is NULL");
        }
        let beta = if problem == SafemProblem::Drift { 1.0 } else { 0.0 };
        let base = SafemConfig {
            problem,
            beta,
            degree,
            cycles: 0,
            mode: SafemMode::Afem,
            smoother: SafemSmoother::Richardson,
            smoothing_steps: 0,
            marking: SafemMarking::Dorfler,
            marking_parameter: 0.0,
            tolerance: 0.0,
            diagnostic: false,
        };
        let defaults = RunConfig::new(to_problem(&base).expect("beta 1 is valid"), degree as usize);
        let (marking, marking_parameter) = match defaults.marking {
            MarkingConfig::Dorfler { theta } => (SafemMarking::Dorfler, theta),
            MarkingConfig::FixedFraction { fraction } => (SafemMarking::FixedFraction, fraction),
        };
        let config = SafemConfig {
            cycles: defaults.cycles as u32,
            smoother: match defaults.smoother {
                Smoother::Richardson => SafemSmoother::Richardson,
                Smoother::Cg => SafemSmoother::Cg,
                Smoother::Gmres => SafemSmoother::Gmres,
            },
            smoothing_steps: defaults.smoothing_steps as u32,
            marking,
            marking_parameter,
            tolerance: defaults.tolerance,
            ..base
        };
        // SAFETY: checked non-null above; the caller guarantees validity.
        unsafe { out.write(config) };
        SafemStatus::Ok
    })
}

/// Runs the adaptive loop. On success `*out` receives a new handle.
///
/// # Safety
/// `config` must be NULL or point to a valid `SafemConfig`; `out` must be
/// NULL or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn safem_run(config: *const SafemConfig, out: *mut *mut SafemRun) -> SafemStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return fail(SafemStatus::NullPointer, "config and out must not be NULL");
        }
        // SAFETY: checked non-null above; the caller guarantees validity.
        let config = unsafe { *config };
        let run_config = match to_run_config(&config) {
            Ok(c) => c,
            Err(m) => return fail(SafemStatus::InvalidArgument, m),
        };
        match run(&run_config) {
            Ok(result) => {
                // SAFETY: checked non-null above.
                unsafe { out.write(Box::into_raw(Box::new(SafemRun { result }))) };
                SafemStatus::Ok
            }
            Err(e) => fail(driver_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle from [`safem_run`]. NULL is ignored.
///
/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn safem_run_free(run: *mut SafemRun) {
    if !run.is_null() {
        // SAFETY: the handle came from Box::into_raw in safem_run.
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Number of recorded cycles, or 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn safem_run_cycle_count(run: *const SafemRun) -> usize {
    // SAFETY: the caller guarantees a live handle or NULL.
    unsafe { run.as_ref() }.map_or(0, |r| r.result.records.len())
}

/// Copies the record of cycle `index` (0-based) into `out`.
///
/// # Safety
/// `run` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn safem_run_record(run: *const SafemRun, index: usize, out: *mut SafemRecord) -> SafemStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or NULL.
        let Some(run) = (unsafe { run.as_ref() }) else {
            return fail(SafemStatus::NullPointer, "run is NULL");
        };
        if out.is_null() {
            return fail(SafemStatus::NullPointer, "out is NULL");
        }
        let Some(r) = run.result.records.get(index) else {
            return fail(SafemStatus::OutOfRange, format!("cycle index {index} out of range"));
        };
        let record = SafemRecord {
            cycle: r.cycle as u32,
            n_cells: r.n_cells as u64,
            n_dofs: r.n_dofs as u64,
            smoothing_steps: r.smoothing_steps as u32,
            error_h1: r.error_h1,
            estimator_j: r.estimator_j,
            estimator_j_exact: r.estimator_j_exact.unwrap_or(f64::NAN),
            has_estimator_j_exact: r.estimator_j_exact.is_some(),
            solver_iterations: r.solver_iterations as u64,
            matvec_count: r.matvec_count as u64,
            solve_seconds: r.solve_seconds,
            marked_cells: r.marked_cells as u64,
        };
        // SAFETY: checked non-null above.
        unsafe { out.write(record) };
        SafemStatus::Ok
    })
}

/// Copies the final solution coefficients into `buffer`. `*len` holds the
/// buffer capacity on input and the number of coefficients on output; with
/// a NULL buffer only the length is reported.
///
/// # Safety
/// `run` must be NULL or a live handle; `len` must be NULL or writable;
/// `buffer`, if not NULL, must hold `*len` doubles.
#[no_mangle]
pub unsafe extern "C" fn safem_run_solution(run: *const SafemRun, buffer: *mut f64, len: *mut usize) -> SafemStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or NULL.
        let Some(run) = (unsafe { run.as_ref() }) else {
            return fail(SafemStatus::NullPointer, "run is NULL");
        };
        if len.is_null() {
            return fail(SafemStatus::NullPointer, "len is NULL");
        }
        let u = &run.result.solution;
        // SAFETY: checked non-null above.
        let capacity = unsafe { len.replace(u.len()) };
        if buffer.is_null() {
            return SafemStatus::Ok;
        }
        if capacity < u.len() {
            return fail(SafemStatus::BufferTooSmall, format!("need {} doubles, got {capacity}", u.len()));
        }
        // SAFETY: the buffer holds at least u.len() doubles.
        unsafe { ptr::copy_nonoverlapping(u.as_ptr(), buffer, u.len()) };
        SafemStatus::Ok
    })
}

/// Writes the per-cycle records as CSV to the UTF-8 path `path`.
///
/// # Safety
/// `run` must be NULL or a live handle; `path` must be NULL or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn safem_run_write_csv(run: *const SafemRun, path: *const c_char) -> SafemStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or NULL.
        let Some(run) = (unsafe { run.as_ref() }) else {
            return fail(SafemStatus::NullPointer, "run is NULL");
        };
        if path.is_null() {
            return fail(SafemStatus::NullPointer, "path is NULL");
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail(SafemStatus::InvalidArgument, "path is not valid UTF-8");
        };
        match write_csv(&run.result.records, Path::new(path)) {
            Ok(()) => SafemStatus::Ok,
            Err(e) => fail(SafemStatus::Io, e.to_string()),
        }
    })
}
