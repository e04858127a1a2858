//! C-compatible entry points for language bindings.
//!
//! A handle wraps a [`Generator`]; pairs are copied into caller-owned flat
//! buffers in crate voxel order (x fastest). Every call returns one of the
//! `AF_*` status codes, and the message of the most recent failure on the
//! calling thread is available from [`af_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use crate::dataset::{open_generator, Generator};
use crate::error::Error;

pub const AF_OK: i32 = 0;
pub const AF_USAGE: i32 = 1;
pub const AF_DATA: i32 = 2;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let msg = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(code: i32, msg: impl ToString) -> i32 {
    set_error(msg);
    code
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn path_arg(p: *const c_char) -> Result<Option<PathBuf>, String> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(|s| Some(PathBuf::from(s)))
        .map_err(|e| format!("path is not UTF-8: {e}"))
}

pub struct AfGenerator(Generator);

/// Opens a generator. `graph_path` and `config_json` may be null. Returns
/// null on failure.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn af_open_generator(
    bank_path: *const c_char,
    anchors_path: *const c_char,
    graph_path: *const c_char,
    config_json: *const c_char,
) -> *mut AfGenerator {
    let run = || -> Result<Generator, String> {
        let bank = path_arg(bank_path)?.ok_or("bank path is null")?;
        let anchors = path_arg(anchors_path)?.ok_or("anchors path is null")?;
        let graph = path_arg(graph_path)?;
        let overrides = match path_arg(config_json)? {
            Some(text) => Some(
                serde_json::from_str::<serde_json::Value>(text.to_str().unwrap_or_default())
                    .map_err(|e| Error::from(e).to_string())?,
            ),
            None => None,
        };
        open_generator(&bank, &anchors, graph.as_deref(), overrides.as_ref()).map_err(|e| e.to_string())
    };
    match run() {
        Ok(g) => Box::into_raw(Box::new(AfGenerator(g))),
        Err(msg) => {
            set_error(msg);
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `handle` must come from [`af_open_generator`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn af_close_generator(handle: *mut AfGenerator) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Scene dimensions of the generator.
///
/// # Safety
/// `handle` must be live; `dims_out` must point to three writable `usize`.
#[no_mangle]
pub unsafe extern "C" fn af_dims(handle: *const AfGenerator, dims_out: *mut usize) -> i32 {
    if handle.is_null() || dims_out.is_null() {
        return fail(AF_USAGE, "null argument");
    }
    let d = (*handle).0.config.dims;
    ptr::copy_nonoverlapping(d.as_ptr(), dims_out, 3);
    AF_OK
}

/// Generates pair `index` into `image_out` / `labels_out` (each `len` voxels).
/// When `manifest_out` is non-null it receives a JSON string to release with
/// [`af_free_string`].
///
/// # Safety
/// `handle` must be live; buffers must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn af_next_pair(
    handle: *const AfGenerator,
    index: i64,
    image_out: *mut f32,
    labels_out: *mut u8,
    len: usize,
    manifest_out: *mut *mut c_char,
) -> i32 {
    if handle.is_null() || image_out.is_null() || labels_out.is_null() {
        return fail(AF_USAGE, "null argument");
    }
    if index < 0 {
        return fail(AF_USAGE, format!("negative scene index {index}"));
    }
    let g = &(*handle).0;
    let need = crate::volume::voxel_count(g.config.dims);
    if len != need {
        return fail(AF_USAGE, format!("buffers hold {len} voxels, scene has {need}"));
    }
    let pair = match g.pair(index as u64) {
        Ok(p) => p,
        Err(e) => return fail(AF_DATA, e),
    };
    ptr::copy_nonoverlapping(pair.image.data().as_ptr(), image_out, need);
    ptr::copy_nonoverlapping(pair.labels.data().as_ptr(), labels_out, need);
    if !manifest_out.is_null() {
        match g.manifest(&pair).to_json() {
            Ok(s) => *manifest_out = CString::new(s).unwrap_or_default().into_raw(),
            Err(e) => return fail(AF_DATA, e),
        }
    }
    AF_OK
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn af_free_string(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn af_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
