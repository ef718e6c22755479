//! C ABI for block construction, distances, basis constants and JSON runs.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every call returns an `MblabStatus`;
//! on failure `mblab_last_error` gives a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mblab::blockbasis::{block_vectors, build_block, MBasisBlock, OrderedSystem};
use mblab::cli::{run, RunConfig};
use mblab::conditionality::basis_constant_exact;
use mblab::verify::riesz_distance;
use mblab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MblabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Precondition = 4,
    Singular = 5,
    TooLarge = 6,
    Io = 7,
    /// The run completed but a checked bound failed; the report is still
    /// returned.
    AssertionFailed = 8,
    Panic = 9,
}

/// An almost-Auerbach block.
pub struct MblabBlock {
    inner: MBasisBlock,
}

/// A square system of vectors (the columns of an invertible matrix).
pub struct MblabSystem {
    inner: OrderedSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> MblabStatus {
    match err {
        Error::Domain { .. } | Error::ZeroEpsilon { .. } => MblabStatus::Domain,
        Error::Precondition(_) | Error::NonUnitVector { .. } => MblabStatus::Precondition,
        Error::Singular { .. } => MblabStatus::Singular,
        Error::TooLarge { .. } => MblabStatus::TooLarge,
        Error::Io(_) => MblabStatus::Io,
        _ => MblabStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MblabStatus, String)>) -> MblabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MblabStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside mblab");
            MblabStatus::Panic
        }
    }
}

fn lib(err: Error) -> (MblabStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (MblabStatus, String) {
    (MblabStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn mblab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mblab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a block from `len` epsilon values (each in `[0, 1]`, summing to
/// at least 1).
///
/// # Safety
/// `eps` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_block_new(eps: *const f64, len: usize, out: *mut *mut MblabBlock) -> MblabStatus {
    guard(|| {
        if eps.is_null() {
            return Err(null("eps"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let slice = std::slice::from_raw_parts(eps, len);
        let inner = build_block(slice).map_err(lib)?;
        *out = Box::into_raw(Box::new(MblabBlock { inner }));
        Ok(())
    })
}

/// # Safety
/// `block` must come from `mblab_block_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mblab_block_free(block: *mut MblabBlock) {
    if !block.is_null() {
        drop(Box::from_raw(block));
    }
}

/// # Safety
/// `block` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_block_dim(block: *const MblabBlock, out: *mut usize) -> MblabStatus {
    guard(|| {
        let b = block.as_ref().ok_or_else(|| null("block"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = b.inner.dim();
        Ok(())
    })
}

/// Closed-form Gram entry `<x_i, x_j>`, 1-based local indices.
///
/// # Safety
/// `block` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_block_gram(block: *const MblabBlock, i: usize, j: usize, out: *mut f64) -> MblabStatus {
    guard(|| {
        let b = block.as_ref().ok_or_else(|| null("block"))?;
        let v = b.inner.gram(i, j).map_err(lib)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Distance to the orthonormal basis, `sqrt(sum eps)`.
///
/// # Safety
/// `block` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_block_distance(block: *const MblabBlock, out: *mut f64) -> MblabStatus {
    guard(|| {
        let b = block.as_ref().ok_or_else(|| null("block"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = b.inner.distance();
        Ok(())
    })
}

/// System from an `n x n` row-major matrix whose columns are the vectors.
///
/// # Safety
/// `data` must point to `n * n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_system_from_rows(data: *const f64, n: usize, out: *mut *mut MblabSystem) -> MblabStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(n)
            .ok_or((MblabStatus::InvalidArgument, "n * n overflows".to_string()))?;
        let flat = std::slice::from_raw_parts(data, len);
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let inner = OrderedSystem::from_rows(&rows).map_err(lib)?;
        *out = Box::into_raw(Box::new(MblabSystem { inner }));
        Ok(())
    })
}

/// Explicit vectors of a block.
///
/// # Safety
/// `block` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_system_from_block(block: *const MblabBlock, out: *mut *mut MblabSystem) -> MblabStatus {
    guard(|| {
        let b = block.as_ref().ok_or_else(|| null("block"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = block_vectors(&b.inner).map_err(lib)?;
        *out = Box::into_raw(Box::new(MblabSystem { inner }));
        Ok(())
    })
}

/// # Safety
/// `system` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mblab_system_free(system: *mut MblabSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// `|A| |A^{-1}|`.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_system_riesz_distance(system: *const MblabSystem, out: *mut f64) -> MblabStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        let v = riesz_distance(&s.inner).map_err(lib)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Largest prefix-projection norm in the system's order (dimension <= 64).
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_system_basis_constant(system: *const MblabSystem, out: *mut f64) -> MblabStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        let v = basis_constant_exact(&s.inner).map_err(lib)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Runs a JSON configuration (the same schema as the `--config` file; `mode`
/// is required) and returns the JSON report in `*out`, to be released with
/// `mblab_string_free`. Returns `MBLAB_STATUS_ASSERTION_FAILED` with a
/// report when a checked bound fails.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mblab_run_json(config_json: *const c_char, out: *mut *mut c_char) -> MblabStatus {
    let mut passed = true;
    let status = guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| (MblabStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let config = RunConfig::from_json(text).map_err(lib)?;
        let report = run(&config).map_err(lib)?;
        passed = report.passed;
        let json = report.to_json().map_err(lib)?;
        *out = CString::new(json)
            .map_err(|e| (MblabStatus::InvalidArgument, e.to_string()))?
            .into_raw();
        Ok(())
    });
    if status == MblabStatus::Ok && !passed {
        set_error("a checked bound failed; see the report's failures");
        return MblabStatus::AssertionFailed;
    }
    status
}

/// # Safety
/// `s` must come from `mblab_run_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mblab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
