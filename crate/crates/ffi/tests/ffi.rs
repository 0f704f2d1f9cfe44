use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nballs_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let mut len = 0usize;
    let s = unsafe { nballs_last_error(buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(s, NballsStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn config(masses: &[f64], energy: f64) -> *mut NballsConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { nballs_config_new(masses.as_ptr(), masses.len(), energy, &mut cfg) }, NballsStatus::Ok);
    cfg
}

#[test]
fn invalid_masses_are_reported() {
    let m = [1.0, 2.0];
    let mut cfg = ptr::null_mut();
    let s = unsafe { nballs_config_new(m.as_ptr(), 2, 1.0, &mut cfg) };
    assert_eq!(s, NballsStatus::InvalidArgument);
    assert!(cfg.is_null());
    assert!(last_error().contains("strictly decreasing"));
    assert_eq!(unsafe { nballs_config_new(ptr::null(), 2, 1.0, &mut cfg) }, NballsStatus::NullPointer);
}

#[test]
fn small_error_buffer_reports_length() {
    let m = [1.0, 2.0];
    let mut cfg = ptr::null_mut();
    unsafe { nballs_config_new(m.as_ptr(), 2, 1.0, &mut cfg) };
    let mut len = 0;
    let mut buf = [0 as c_char; 4];
    assert_eq!(unsafe { nballs_last_error(buf.as_mut_ptr(), 4, &mut len) }, NballsStatus::BufferTooSmall);
    assert!(len > 4);
}

#[test]
fn simulator_steps_and_conserves_energy() {
    let masses = [3.0, 2.0, 1.0];
    let cfg = config(&masses, 6.0);
    assert_eq!(unsafe { nballs_config_balls(cfg) }, 3);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { nballs_simulator_new(cfg, 7, &mut sim) }, NballsStatus::Ok);
    // the simulator owns its configuration
    unsafe { nballs_config_free(cfg) };
    let mut ev = NballsEvent { n: 0, t: 0.0, kind: 0 };
    let mut last_t = 0.0;
    for k in 0..2000u64 {
        assert_eq!(unsafe { nballs_simulator_step(sim, &mut ev) }, NballsStatus::Ok);
        assert_eq!(ev.n, k);
        assert!(ev.t >= last_t && ev.kind <= 2);
        last_t = ev.t;
    }
    let (mut t, mut q, mut v) = (0.0, [0.0; 3], [0.0; 3]);
    assert_eq!(unsafe { nballs_simulator_state(sim, &mut t, q.as_mut_ptr(), v.as_mut_ptr(), 3) }, NballsStatus::Ok);
    let h: f64 = (0..3).map(|i| masses[i] * (0.5 * v[i] * v[i] + q[i])).sum();
    assert!((h - 6.0).abs() < 1e-9, "{h}");
    assert_eq!(
        unsafe { nballs_simulator_state(sim, &mut t, q.as_mut_ptr(), v.as_mut_ptr(), 2) },
        NballsStatus::InvalidArgument
    );
    unsafe { nballs_simulator_free(sim) };
}

#[test]
fn explicit_state_matches_hand_computation() {
    // one ball dropped from height 2 with zero velocity lands at t = 2 with speed 2
    let cfg = config(&[2.0, 1.0], 5.0);
    let (q, v) = ([2.0, 3.0], [0.0, 0.0]);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { nballs_simulator_from_state(cfg, 0.0, q.as_ptr(), v.as_ptr(), 2, &mut sim) }, NballsStatus::Ok);
    let mut ev = NballsEvent { n: 9, t: 0.0, kind: 9 };
    assert_eq!(unsafe { nballs_simulator_step(sim, &mut ev) }, NballsStatus::Ok);
    assert_eq!((ev.n, ev.kind), (0, 0));
    assert!((ev.t - 2.0).abs() < 1e-14);
    unsafe {
        nballs_simulator_free(sim);
        nballs_config_free(cfg);
    }
}

#[test]
fn estimators_through_the_c_interface() {
    let cfg = config(&[2.0, 1.0], 1.0);
    let mut l = [0.0; 2];
    assert_eq!(unsafe { nballs_lyapunov(cfg, 1, 5000, 10, l.as_mut_ptr(), 2) }, NballsStatus::Ok);
    assert!(l[0] > 0.0 && (l[0] + l[1]).abs() < 1e-2, "{l:?}");
    assert_eq!(unsafe { nballs_lyapunov(cfg, 1, 10, 10, l.as_mut_ptr(), 1) }, NballsStatus::BufferTooSmall);
    let mut tau = 0.0;
    assert_eq!(unsafe { nballs_tau(cfg, 3, 1.0, 20, 20, 10_000, &mut tau) }, NballsStatus::Ok);
    assert!(tau > 0.0);
    assert_eq!(unsafe { nballs_tau(cfg, 3, 1e300, 2, 2, 5, &mut tau) }, NballsStatus::Ok);
    assert_eq!(tau, -1.0);
    unsafe { nballs_config_free(cfg) };

    let two_id = [2.0, 0.0, 0.0, 2.0];
    let mut sigma = 0.0;
    assert_eq!(unsafe { nballs_sigma(two_id.as_ptr(), 1, 0, &mut sigma) }, NballsStatus::Ok);
    assert!((sigma - 2.0).abs() < 1e-6);
}

#[test]
fn experiments_run_and_report_red_flags() {
    let dir = tempfile_dir();
    let text = format!(
        "kind = tau\nmasses = 2,1\nenergy = 1\ntau.e0 = 1e300\ntau.cutoff = 5\noutput = {}\n",
        dir.display()
    );
    let c = CString::new(text).unwrap();
    assert_eq!(unsafe { nballs_run_experiment(c.as_ptr()) }, NballsStatus::RedFlag);
    assert!(last_error().contains("tau-exceeded"));
    assert!(dir.join("report.json").exists());
    let bad = CString::new("kind = tau\nmasses = 2,1\nbogus = 1\n").unwrap();
    assert_eq!(unsafe { nballs_run_experiment(bad.as_ptr()) }, NballsStatus::Config);
    assert!(last_error().contains("line 3"));
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(nballs_version()) }.to_str().unwrap();
    assert!(v.starts_with("nballs "));
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/nballs.h")).unwrap();
    for sym in ["nballs_config_new", "nballs_simulator_step", "nballs_run_experiment", "NBALLS_STATUS_RED_FLAG"] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
    // the cdylib sits next to the test binary's profile directory
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let lib_dir = tmp.parent().unwrap().join(if cfg!(debug_assertions) { "debug" } else { "release" });
    assert!(lib_dir.join("libnballs_ffi.so").exists(), "cdylib not found in {}", lib_dir.display());
    let exe = tmp.join("ffi_smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lnballs_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("events=100"));
}
