//! C interface to trained modfield networks and codebooks.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible function returns an
//! [`MfStatus`]; on failure, [`mf_last_error_message`] describes the most
//! recent error on the calling thread. No function unwinds across the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use modfield::format::{Checkpoint, CodebookFile};
use modfield::model::model_forward;
use modfield::tiling::{blended_decode, Codebook};
use modfield::Error;

/// Result codes. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// File missing, unreadable or malformed.
    Io = 2,
    /// Incompatible dimensions, lengths or settings.
    InvalidArgument = 3,
    /// A computation produced a non-finite value.
    Numeric = 4,
    /// Internal error; the library caught a panic.
    Internal = 5,
}

/// A trained network loaded from a checkpoint file.
pub struct MfModel {
    checkpoint: Checkpoint,
}

/// Per-tile latent codes loaded from a codebook file.
pub struct MfCodebook {
    codebook: Codebook<f32>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MfModelDims {
    /// Coordinate dimension.
    pub input_dim: usize,
    /// Output channels.
    pub output_dim: usize,
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MfCodebookDims {
    pub dim: usize,
    pub latent_dim: usize,
    pub tile_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MfStatus, msg: impl Into<String>) -> MfStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> MfStatus {
    let status = match e.exit_code() {
        2 => MfStatus::Io,
        4 => MfStatus::Numeric,
        _ => MfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> MfStatus) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MfStatus::Internal, "internal panic"),
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, MfStatus> {
    if path.is_null() {
        return Err(fail(MfStatus::NullPointer, "path is null"));
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(MfStatus::InvalidArgument, "path is not valid UTF-8")),
    }
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], MfStatus> {
    if p.is_null() {
        return Err(fail(MfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], MfStatus> {
    if p.is_null() {
        return Err(fail(MfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<(), MfStatus> {
    if expected == actual {
        Ok(())
    } else {
        Err(fail(
            MfStatus::InvalidArgument,
            format!("{what}: expected length {expected}, got {actual}"),
        ))
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or null if none. The
/// string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_model_load(path: *const c_char, out: *mut *mut MfModel) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfStatus::NullPointer, "out is null");
        }
        let path = tri!(path_arg(path));
        match Checkpoint::load(&path) {
            Ok(checkpoint) => {
                *out = Box::into_raw(Box::new(MfModel { checkpoint }));
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`mf_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_model_free(model: *mut MfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_model_dims(model: *const MfModel, out: *mut MfModelDims) -> MfStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(MfStatus::NullPointer, "model or out is null");
        };
        let c = m.checkpoint.params.config();
        *out = MfModelDims {
            input_dim: c.input_dim,
            output_dim: c.output_dim,
            latent_dim: c.latent_dim,
            hidden_layers: c.hidden_layers,
            width: c.width,
        };
        MfStatus::Ok
    })
}

/// Evaluates the network at local coordinate `x` (`x_len == input_dim`,
/// entries in `[0, 1]`) with latent `z` (`z_len == latent_dim`), writing
/// `output_dim` values to `out`.
///
/// # Safety
/// Each pointer must reference at least its stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn mf_model_forward(
    model: *const MfModel,
    x: *const f32,
    x_len: usize,
    z: *const f32,
    z_len: usize,
    out: *mut f32,
    out_len: usize,
) -> MfStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(MfStatus::NullPointer, "model is null");
        };
        let c = *m.checkpoint.params.config();
        tri!(check_len("x", c.input_dim, x_len));
        tri!(check_len("z", c.latent_dim, z_len));
        tri!(check_len("out", c.output_dim, out_len));
        let x = tri!(slice_arg(x, x_len, "x"));
        let z = tri!(slice_arg(z, z_len, "z"));
        let out = tri!(slice_out(out, out_len, "out"));
        match model_forward(&m.checkpoint.params, x, z) {
            Ok(y) => {
                out.copy_from_slice(&y);
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a codebook file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_codebook_load(path: *const c_char, out: *mut *mut MfCodebook) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfStatus::NullPointer, "out is null");
        }
        let path = tri!(path_arg(path));
        match CodebookFile::load(&path) {
            Ok(codebook) => {
                *out = Box::into_raw(Box::new(MfCodebook { codebook }));
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a codebook. Null is ignored.
///
/// # Safety
/// `codebook` must come from [`mf_codebook_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_codebook_free(codebook: *mut MfCodebook) {
    if !codebook.is_null() {
        drop(Box::from_raw(codebook));
    }
}

/// # Safety
/// `codebook` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_codebook_dims(codebook: *const MfCodebook, out: *mut MfCodebookDims) -> MfStatus {
    guard(|| {
        let (Some(b), false) = (codebook.as_ref(), out.is_null()) else {
            return fail(MfStatus::NullPointer, "codebook or out is null");
        };
        *out = MfCodebookDims {
            dim: b.codebook.grid().dim(),
            latent_dim: b.codebook.latent_dim(),
            tile_count: b.codebook.len(),
        };
        MfStatus::Ok
    })
}

/// Blended decode at global point `p` (`p_len == input_dim`, inside the
/// codebook's extent), writing `output_dim` values to `out`.
///
/// # Safety
/// Handles must be live; each pointer must reference at least its stated
/// number of elements.
#[no_mangle]
pub unsafe extern "C" fn mf_decode_point(
    model: *const MfModel,
    codebook: *const MfCodebook,
    p: *const f64,
    p_len: usize,
    out: *mut f64,
    out_len: usize,
) -> MfStatus {
    guard(|| {
        let (Some(m), Some(b)) = (model.as_ref(), codebook.as_ref()) else {
            return fail(MfStatus::NullPointer, "model or codebook is null");
        };
        let c = *m.checkpoint.params.config();
        tri!(check_len("p", c.input_dim, p_len));
        tri!(check_len("out", c.output_dim, out_len));
        let p = tri!(slice_arg(p, p_len, "p"));
        let out = tri!(slice_out(out, out_len, "out"));
        match blended_decode(&m.checkpoint.params, &b.codebook, p) {
            Ok(y) => {
                out.copy_from_slice(&y);
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
