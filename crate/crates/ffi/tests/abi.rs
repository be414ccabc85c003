use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use speclab_ffi::*;

fn c(re: f64, im: f64) -> SpeclabComplex {
    SpeclabComplex { re, im }
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        speclab_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn scalar_functions() {
    let mut x = SpeclabComplex::default();
    let mut y = SpeclabComplex::default();
    unsafe {
        assert_eq!(speclab_chi(c(0.2, 5.0), &mut x), SpeclabStatus::Ok);
        assert_eq!(speclab_chi(c(0.8, -5.0), &mut y), SpeclabStatus::Ok);
    }
    let p = num_complex::Complex64::from(x) * num_complex::Complex64::from(y);
    assert!((p - 1.0).norm() < 1e-10);

    let mut r = 0.0;
    unsafe {
        assert_eq!(speclab_rvm_count(100.0, &mut r), SpeclabStatus::Ok);
    }
    assert!(r > 28.0 && r < 30.0, "{r}");

    let mut g = SpeclabComplex::default();
    unsafe {
        assert_eq!(speclab_gamma_factor(c(2.0, 0.0), &mut g), SpeclabStatus::Ok);
    }
    assert!((g.re - 1.0 / std::f64::consts::PI).abs() < 1e-14 && g.im.abs() < 1e-14);
}

#[test]
fn errors_and_null_pointers() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(speclab_log_det(0.5, 0, 32, &mut v), SpeclabStatus::InvalidArgument);
        assert!(last_error().contains("sign"));
        assert_eq!(speclab_log_det(0.5, 1, 32, ptr::null_mut()), SpeclabStatus::NullPointer);
        assert_eq!(speclab_chi(c(1.0, 0.0), &mut SpeclabComplex::default()), SpeclabStatus::Pole);
        assert_eq!(speclab_spectrum_len(ptr::null(), &mut 0), SpeclabStatus::NullPointer);
        assert_eq!(speclab_last_error(ptr::null_mut(), 0) > 0, true);
        assert_eq!(speclab_rvm_count(50.0, &mut v), SpeclabStatus::Ok);
        assert_eq!(speclab_last_error(ptr::null_mut(), 0), 0);
    }
}

#[test]
fn log_det_pair_is_consistent() {
    let (mut p, mut m) = (0.0, 0.0);
    unsafe {
        assert_eq!(speclab_log_det(0.5, 1, 64, &mut p), SpeclabStatus::Ok);
        assert_eq!(speclab_log_det(0.5, -1, 64, &mut m), SpeclabStatus::Ok);
    }
    let direct = speclab::cosine_kernel::log_det(0.5, speclab::cosine_kernel::Sign::Plus, 64).unwrap()
        + speclab::cosine_kernel::log_det(0.5, speclab::cosine_kernel::Sign::Minus, 64).unwrap();
    assert_eq!(p + m, direct);
}

#[test]
fn evaluator_handle() {
    let mut ev = ptr::null_mut();
    unsafe {
        assert_eq!(speclab_evaluator_new(0.5, 64, &mut ev), SpeclabStatus::Ok);
        let (z, w) = (c(0.6, 2.0), c(0.4, -1.0));
        let (mut kzw, mut kwz) = (SpeclabComplex::default(), SpeclabComplex::default());
        assert_eq!(speclab_evaluator_inner(ev, z, w, &mut kzw), SpeclabStatus::Ok);
        assert_eq!(speclab_evaluator_inner(ev, w, z, &mut kwz), SpeclabStatus::Ok);
        assert!((kzw.re - kwz.re).abs() + (kzw.im - kwz.im).abs() < 1e-9 * (kzw.re.hypot(kzw.im)).max(1.0));
        let mut pt = SpeclabPoint::default();
        assert_eq!(speclab_evaluator_point(ev, c(0.5, 4.0), &mut pt), SpeclabStatus::Ok);
        let w1 = -(pt.j.im * pt.k.re - pt.j.re * pt.k.im);
        assert!((w1 - 1.0).abs() < 1e-6, "{w1}");
        speclab_evaluator_free(ev);
    }
}

#[test]
fn potential_and_m_functions() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(speclab_potential_new(-1.0, -0.5, 50, 64, &mut p), SpeclabStatus::Ok);
        let mut mu = 0.0;
        assert_eq!(speclab_potential_mu(p, -0.75, &mut mu), SpeclabStatus::Ok);
        let direct = speclab::cosine_kernel::mu(-0.75, 64).unwrap();
        assert!((mu - direct).abs() < 1e-5 * direct.abs(), "{mu} {direct}");
        assert_eq!(speclab_potential_mu(p, 3.0, &mut mu), SpeclabStatus::Domain);
        speclab_potential_free(p);

        // Herglotz: Im m > 0 in the upper half plane
        let mut m = SpeclabComplex::default();
        assert_eq!(speclab_m_scattering(0.5, c(3.0, 0.5), &mut m), SpeclabStatus::Ok);
        assert!(m.im > 0.0);
        assert_eq!(speclab_m_bound(0.5, c(3.0, 0.5), &mut m), SpeclabStatus::Ok);
        assert!(m.im > 0.0);
    }
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/speclab.h")).unwrap();
    for sym in ["speclab_chi", "speclab_evaluator_new", "speclab_bound_states", "speclab_last_error", "SPECLAB_STATUS_PANIC", "typedef struct SpeclabEvaluator SpeclabEvaluator"] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
}

/// Compile and run a C program against the static library, if a C compiler
/// and the archive are present.
#[test]
fn c_program_links_and_runs() {
    let profile_dir: PathBuf = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libspeclab_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = env!("CARGO_MANIFEST_DIR");
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("speclab_smoke");
    let st = Command::new("cc")
        .args([&format!("{dir}/tests/c/smoke.c"), "-I", &format!("{dir}/include"), "-o"])
        .arg(&exe)
        .arg(&lib)
        .args(["-lmpfr", "-lgmp", "-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(st.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
