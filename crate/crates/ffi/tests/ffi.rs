use std::ffi::{CStr, CString};
use std::ptr;

use mblab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mblab_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn block_round_trip() {
    let eps = [0.5f64; 4];
    let mut block = ptr::null_mut();
    unsafe {
        assert_eq!(mblab_block_new(eps.as_ptr(), eps.len(), &mut block), MblabStatus::Ok);
        let mut dim = 0usize;
        assert_eq!(mblab_block_dim(block, &mut dim), MblabStatus::Ok);
        assert_eq!(dim, 4);
        let mut g = 0.0;
        assert_eq!(mblab_block_gram(block, 1, 1, &mut g), MblabStatus::Ok);
        assert_eq!(g, 1.25);
        assert_eq!(mblab_block_gram(block, 1, 2, &mut g), MblabStatus::Ok);
        assert_eq!(g, 0.25);
        let mut d = 0.0;
        assert_eq!(mblab_block_distance(block, &mut d), MblabStatus::Ok);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);

        let mut system = ptr::null_mut();
        assert_eq!(mblab_system_from_block(block, &mut system), MblabStatus::Ok);
        let mut r = 0.0;
        assert_eq!(mblab_system_riesz_distance(system, &mut r), MblabStatus::Ok);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let mut c = 0.0;
        assert_eq!(mblab_system_basis_constant(system, &mut c), MblabStatus::Ok);
        assert!(c >= 1.0);
        mblab_system_free(system);
        mblab_block_free(block);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut block = ptr::null_mut();
        let bad = [0.5, 1.5];
        assert_eq!(mblab_block_new(bad.as_ptr(), 2, &mut block), MblabStatus::Domain);
        assert!(last_error().contains("outside [0, 1]"), "{}", last_error());
        let light = [0.1, 0.1];
        assert_eq!(
            mblab_block_new(light.as_ptr(), 2, &mut block),
            MblabStatus::Precondition
        );
        assert_eq!(mblab_block_new(ptr::null(), 2, &mut block), MblabStatus::NullPointer);
        assert!(block.is_null());

        let singular = [1.0, 2.0, 2.0, 4.0];
        let mut system = ptr::null_mut();
        assert_eq!(
            mblab_system_from_rows(singular.as_ptr(), 2, &mut system),
            MblabStatus::Ok
        );
        let mut r = 0.0;
        assert_eq!(mblab_system_riesz_distance(system, &mut r), MblabStatus::Singular);
        mblab_system_free(system);

        let mut v = 0.0;
        assert_eq!(
            mblab_system_riesz_distance(ptr::null(), &mut v),
            MblabStatus::NullPointer
        );
        mblab_block_free(ptr::null_mut());
        mblab_system_free(ptr::null_mut());
    }
}

#[test]
fn shear_basis_constant() {
    let rows = [1.0, 1.0, 0.0, 1.0];
    unsafe {
        let mut system = ptr::null_mut();
        assert_eq!(mblab_system_from_rows(rows.as_ptr(), 2, &mut system), MblabStatus::Ok);
        let mut c = 0.0;
        assert_eq!(mblab_system_basis_constant(system, &mut c), MblabStatus::Ok);
        assert!((c - 2f64.sqrt()).abs() < 1e-12);
        mblab_system_free(system);
    }
}

#[test]
fn json_run() {
    let config = CString::new(r#"{"mode": "construct", "block_count": 2}"#).unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(mblab_run_json(config.as_ptr(), &mut out), MblabStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(report["passed"], true);
        assert_eq!(report["items"].as_array().unwrap().len(), 2);
        mblab_string_free(out);

        let missing_mode = CString::new("{}").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            mblab_run_json(missing_mode.as_ptr(), &mut out),
            MblabStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(last_error().contains("mode"));

        let broken = CString::new("{\"mode\": \"construct\",\n \"nope\": 1}").unwrap();
        assert_eq!(mblab_run_json(broken.as_ptr(), &mut out), MblabStatus::InvalidArgument);
        assert!(last_error().contains("nope"));
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(mblab_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mblab.h")).unwrap();
    for name in [
        "mblab_last_error",
        "mblab_block_new",
        "mblab_block_free",
        "mblab_block_gram",
        "mblab_system_from_rows",
        "mblab_system_basis_constant",
        "mblab_run_json",
        "mblab_string_free",
        "typedef struct MblabBlock MblabBlock;",
        "MBLAB_STATUS_ASSERTION_FAILED = 8",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
