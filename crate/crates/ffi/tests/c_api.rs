use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use safem_ffi::*;

fn last_error() -> String {
    let p = safem_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(problem: SafemProblem, degree: u32) -> SafemConfig {
    let mut c = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { safem_config_default(problem, degree, c.as_mut_ptr()) }, SafemStatus::Ok);
    unsafe { c.assume_init() }
}

fn run(c: &SafemConfig) -> Result<*mut SafemRun, SafemStatus> {
    let mut handle = ptr::null_mut();
    match unsafe { safem_run(c, &mut handle) } {
        SafemStatus::Ok => Ok(handle),
        status => Err(status),
    }
}

#[test]
fn defaults_follow_the_degree() {
    let c = config(SafemProblem::Peak, 1);
    assert_eq!((c.cycles, c.marking, c.marking_parameter), (10, SafemMarking::Dorfler, 0.3));
    let c = config(SafemProblem::Drift, 2);
    assert_eq!(c.marking, SafemMarking::FixedFraction);
    assert_eq!(c.smoother, SafemSmoother::Gmres);
    assert_eq!(c.beta, 1.0);
}

#[test]
fn run_and_read_back() {
    let mut c = config(SafemProblem::Corner, 1);
    c.cycles = 4;
    c.mode = SafemMode::Safem;
    c.diagnostic = true;
    let handle = run(&c).unwrap();
    assert_eq!(unsafe { safem_run_cycle_count(handle) }, 4);

    let mut record = SafemRecord::default();
    assert_eq!(unsafe { safem_run_record(handle, 3, &mut record) }, SafemStatus::Ok);
    assert_eq!(record.cycle, 4);
    assert!(record.has_estimator_j_exact && record.estimator_j_exact > 0.0);
    assert_eq!(unsafe { safem_run_record(handle, 4, &mut record) }, SafemStatus::OutOfRange);
    assert!(last_error().contains("out of range"));

    let mut len = 0usize;
    assert_eq!(unsafe { safem_run_solution(handle, ptr::null_mut(), &mut len) }, SafemStatus::Ok);
    let mut u = vec![0.0; len];
    let mut short = len - 1;
    assert_eq!(unsafe { safem_run_solution(handle, u.as_mut_ptr(), &mut short) }, SafemStatus::BufferTooSmall);
    assert_eq!(unsafe { safem_run_solution(handle, u.as_mut_ptr(), &mut len) }, SafemStatus::Ok);
    assert!(u.iter().all(|v| v.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("run.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { safem_run_write_csv(handle, path.as_ptr()) }, SafemStatus::Ok);
    let text = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let bad = CString::new("/nonexistent/dir/run.csv").unwrap();
    assert_eq!(unsafe { safem_run_write_csv(handle, bad.as_ptr()) }, SafemStatus::Io);
    unsafe { safem_run_free(handle) };
}

#[test]
fn invalid_input_is_reported() {
    let mut c = config(SafemProblem::Peak, 1);
    c.degree = 5;
    assert_eq!(run(&c).unwrap_err(), SafemStatus::InvalidArgument);
    assert!(last_error().contains("degree"));

    let mut c = config(SafemProblem::Drift, 1);
    c.beta = -1.0;
    assert_eq!(run(&c).unwrap_err(), SafemStatus::InvalidArgument);

    let mut c = config(SafemProblem::Peak, 1);
    c.marking_parameter = 0.0;
    assert_eq!(run(&c).unwrap_err(), SafemStatus::EmptyMarking);

    assert_eq!(unsafe { safem_run(ptr::null(), ptr::null_mut()) }, SafemStatus::NullPointer);
    assert_eq!(unsafe { safem_config_default(SafemProblem::Peak, 1, ptr::null_mut()) }, SafemStatus::NullPointer);
    assert_eq!(unsafe { safem_run_cycle_count(ptr::null()) }, 0);
    unsafe { safem_run_free(ptr::null_mut()) };
}

#[test]
fn success_clears_the_error() {
    let mut c = config(SafemProblem::Peak, 1);
    c.degree = 0;
    assert!(run(&c).is_err());
    assert!(!safem_last_error().is_null());
    config(SafemProblem::Peak, 1);
    assert!(safem_last_error().is_null());
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(safem_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn artifact_dir() -> PathBuf {
    // tests live in <target>/<profile>/deps; the library next to deps.
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "safem.h"

int main(void) {
    SafemConfig config;
    if (safem_config_default(SAFEM_PROBLEM_PEAK, 1, &config) != SAFEM_STATUS_OK) return 1;
    config.cycles = 3;
    config.mode = SAFEM_MODE_SAFEM;
    SafemRun *run = NULL;
    if (safem_run(&config, &run) != SAFEM_STATUS_OK) return 2;
    SafemRecord record;
    if (safem_run_record(run, 2, &record) != SAFEM_STATUS_OK) return 3;
    printf("%u %llu %.6e\n", record.cycle, (unsigned long long)record.n_dofs, record.error_h1);
    safem_run_free(run);
    config.degree = 9;
    if (safem_run(&config, &run) != SAFEM_STATUS_INVALID_ARGUMENT) return 4;
    return safem_last_error() == NULL ? 5 : 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = artifact_dir().join("libsafem_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("main.c");
    std::fs::write(&source, C_PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror"])
        .arg("-I")
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0], "3");
    assert!(fields[2].parse::<f64>().unwrap() > 0.0);
}
