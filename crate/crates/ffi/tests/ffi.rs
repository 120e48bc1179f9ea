use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use wasscc_ffi::*;

fn last_error() -> String {
    let p = wasscc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(wasscc_std_quantile(0.5, &mut out), WassccStatus::Ok);
        assert_eq!(out, 0.0);
        assert_eq!(wasscc_gaussian_cvar(0.15, &mut out), WassccStatus::Ok);
        assert!((out - 1.5543918350245485).abs() < 1e-12);
        assert_eq!(wasscc_coefficient(WassccMode::Pessimistic, 0.15, 0.0, &mut out), WassccStatus::Ok);
        assert!((out - 1.0364333894937898).abs() < 1e-10);
        assert_eq!(wasscc_watershed(0.25, &mut out), WassccStatus::Ok);
        assert!(out > 0.0);
    }
    assert!((wasscc_std_cdf(0.0) - 0.5).abs() < 1e-16);
}

#[test]
fn errors_set_status_and_message() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(wasscc_std_quantile(0.0, &mut out), WassccStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(wasscc_std_quantile(0.5, ptr::null_mut()), WassccStatus::NullPointer);
        assert!(last_error().contains("out"));
        assert_eq!(
            wasscc_coefficient(WassccMode::Pessimistic, 0.7, 0.1, &mut out),
            WassccStatus::InvalidArgument
        );
    }
}

#[test]
fn portfolio_handle_round_trip() {
    let mean = [1.05, 1.1];
    let cov = [0.0026, 0.0001, 0.0001, 0.0101];
    let mut p = ptr::null_mut();
    unsafe {
        let s = wasscc_portfolio_new(2, mean.as_ptr(), cov.as_ptr(), true, 1.0, 1.0, 0.15, 0.01, &mut p);
        assert_eq!(s, WassccStatus::Ok);
        assert_eq!(wasscc_portfolio_n_assets(p), 3);
        let mut alloc = [0.0; 3];
        let mut obj = 0.0;
        assert_eq!(
            wasscc_portfolio_solve(p, WassccMode::Pessimistic, alloc.as_mut_ptr(), 3, &mut obj),
            WassccStatus::Ok
        );
        assert!((alloc.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        let mut short = [0.0; 2];
        assert_eq!(
            wasscc_portfolio_solve(p, WassccMode::Pessimistic, short.as_mut_ptr(), 2, &mut obj),
            WassccStatus::Dimension
        );
        wasscc_portfolio_free(p);
        wasscc_portfolio_free(ptr::null_mut());
        assert_eq!(wasscc_portfolio_n_assets(ptr::null()), 0);
    }
}

#[test]
fn bad_covariance_is_reported() {
    let mean = [1.0, 1.0];
    let cov = [1.0, 2.0, 2.0, 1.0];
    let mut p = ptr::null_mut();
    let s = unsafe { wasscc_portfolio_new(2, mean.as_ptr(), cov.as_ptr(), false, 0.0, 1.0, 0.1, 0.0, &mut p) };
    assert_eq!(s, WassccStatus::NotPositiveDefinite);
    assert!(p.is_null());
}

#[test]
fn production_handle_round_trip() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(wasscc_production_random(3, 4, 3, 50.0, 0.1, 0.5, &mut p), WassccStatus::Ok);
        let n = wasscc_production_n(p);
        assert_eq!(n, 4);
        let mut rho = 0.0;
        let mut x = vec![0.0; n];
        assert_eq!(wasscc_production_rho(p, 1e6, &mut rho, x.as_mut_ptr(), n), WassccStatus::Ok);
        assert!(rho > 0.0);
        let mut cert = std::mem::zeroed::<WassccCertificate>();
        assert_eq!(
            wasscc_production_certify(p, WassccMode::Pessimistic, x.as_ptr(), n, 2000, 1, &mut cert),
            WassccStatus::Ok
        );
        assert_eq!(cert.n_samples, 2000);
        wasscc_production_free(p);
    }
}

fn target_dir() -> PathBuf {
    // CARGO_TARGET_TMPDIR is <target>/tmp.
    Path::new(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("wasscc.h").exists());
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    let lib = target_dir().join(profile).join("libwasscc_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C smoke test: no C compiler or static library");
        return;
    }
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("wasscc_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke test failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
