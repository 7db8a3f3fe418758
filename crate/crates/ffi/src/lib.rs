//! C interface to the donn toolkit.
//!
//! Every function returns a [`DonnStatus`]. On failure a description is kept
//! per thread and can be read with [`donn_last_error_message`]. Handles are
//! opaque; release them with [`donn_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use donn::model::{load_model, quantize_phases, save_model, DonnModel, ModelError};
use donn::optics::OpticalGeometry;
use donn::rl::cartpole::{state_to_image_sized, CartPoleState};
use donn::rl::RlError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DonnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Malformed = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque model handle.
pub struct DonnModelHandle {
    model: DonnModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(DonnStatus, String);

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io(_) => DonnStatus::Io,
            ModelError::Malformed(_) | ModelError::UnsupportedVersion(_) => DonnStatus::Malformed,
            _ => DonnStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<RlError> for Failure {
    fn from(e: RlError) -> Self {
        Failure(DonnStatus::InvalidArgument, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(DonnStatus::InvalidArgument, msg.to_string())
}

fn null(what: &str) -> Failure {
    Failure(DonnStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DonnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DonnStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DonnStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn handle<'a>(h: *const DonnModelHandle) -> Result<&'a DonnModel, Failure> {
    h.as_ref().map(|h| &h.model).ok_or_else(|| null("model"))
}

fn emit(out: *mut *mut DonnModelHandle, model: DonnModel) {
    // SAFETY: callers have checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(DonnModelHandle { model })) };
}

/// Copies the calling thread's last error into `buf` (NUL-terminated, truncated
/// to `len`). Returns the full message length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn donn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn donn_model_load(path: *const c_char, out: *mut *mut DonnModelHandle) -> DonnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        emit(out, load_model(path)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn donn_model_save(model: *const DonnModelHandle, path: *const c_char) -> DonnStatus {
    guard(|| {
        let m = handle(model)?;
        save_model(m, path_arg(path)?)?;
        Ok(())
    })
}

/// Random phase masks with evenly spaced planes and default detector regions.
/// Lengths are in metres.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn donn_model_new_random(
    wavelength: f64,
    pitch: f64,
    grid_n: usize,
    active_n: usize,
    class_count: usize,
    layer_count: usize,
    distance: f64,
    seed: u64,
    out: *mut *mut DonnModelHandle,
) -> DonnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = OpticalGeometry::new(wavelength, pitch, grid_n, active_n).map_err(|e| invalid(&e.to_string()))?;
        let labels = (0..class_count).map(|k| format!("class{k}")).collect();
        emit(out, DonnModel::random(g, labels, layer_count, distance, seed)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn donn_model_free(model: *mut DonnModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn donn_model_class_count(model: *const DonnModelHandle, out: *mut usize) -> DonnStatus {
    guard(|| {
        let m = handle(model)?;
        out.as_mut().ok_or_else(|| null("out")).map(|o| *o = m.class_count())
    })
}

/// Side length of the input bit image the model expects.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn donn_model_input_side(model: *const DonnModelHandle, out: *mut usize) -> DonnStatus {
    guard(|| {
        let m = handle(model)?;
        out.as_mut().ok_or_else(|| null("out")).map(|o| *o = m.geometry().active_n())
    })
}

/// Runs one input (`side * side` bytes, each 0 or 1) through the model.
/// Writes `class_count` detector sums to `region_sums` and the winning class
/// to `predicted`.
///
/// # Safety
/// `bits` must point to `bits_len` bytes and `region_sums` to `sums_len`
/// writable doubles; `predicted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn donn_model_forward(
    model: *const DonnModelHandle,
    bits: *const u8,
    bits_len: usize,
    region_sums: *mut f64,
    sums_len: usize,
    predicted: *mut usize,
) -> DonnStatus {
    guard(|| {
        let m = handle(model)?;
        if bits.is_null() {
            return Err(null("bits"));
        }
        if region_sums.is_null() {
            return Err(null("region_sums"));
        }
        if predicted.is_null() {
            return Err(null("predicted"));
        }
        if sums_len < m.class_count() {
            return Err(Failure(
                DonnStatus::BufferTooSmall,
                format!("region_sums holds {sums_len}, model has {} classes", m.class_count()),
            ));
        }
        let input = std::slice::from_raw_parts(bits, bits_len);
        let cam = m.forward(input)?;
        ptr::copy_nonoverlapping(cam.region_sums.as_ptr(), region_sums, cam.region_sums.len());
        *predicted = cam.predicted;
        Ok(())
    })
}

/// New handle with phases rounded to `levels` evenly spaced values.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn donn_model_quantize(
    model: *const DonnModelHandle,
    levels: usize,
    out: *mut *mut DonnModelHandle,
) -> DonnStatus {
    guard(|| {
        let m = handle(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit(out, quantize_phases(m, levels)?);
        Ok(())
    })
}

/// Cart-pole state as a `side * side` bit image.
///
/// # Safety
/// `out_bits` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn donn_cartpole_state_to_image(
    x: f64,
    theta: f64,
    x_dot: f64,
    theta_dot: f64,
    side: usize,
    out_bits: *mut u8,
    len: usize,
) -> DonnStatus {
    guard(|| {
        if out_bits.is_null() {
            return Err(null("out_bits"));
        }
        let state = CartPoleState { x, theta, x_dot, theta_dot };
        let img = state_to_image_sized(&state, side)?;
        if len < img.len() {
            return Err(Failure(DonnStatus::BufferTooSmall, format!("need {} bytes, got {len}", img.len())));
        }
        ptr::copy_nonoverlapping(img.as_ptr(), out_bits, img.len());
        Ok(())
    })
}
