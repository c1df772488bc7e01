//! C interface to the `tsom` detector.
//!
//! Objects are opaque handles created by `*_new` / `*_load` functions and
//! released by the matching `*_free`. Every fallible call returns a
//! [`TsomStatus`]; on failure [`tsom_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tsom::{Detection, Detector, Error, Frame, PipelineConfig, Raster, Sequence};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Validation = 4,
    PropertyViolation = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// One detection: pixel position, frame index and score.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsomDetection {
    pub x: usize,
    pub y: usize,
    pub frame: usize,
    pub score: f64,
}

pub struct TsomDetector {
    inner: Detector,
}

pub struct TsomSequence {
    width: usize,
    height: usize,
    fps: f64,
    frames: Vec<Frame>,
}

pub struct TsomDetections {
    items: Vec<TsomDetection>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> TsomStatus {
    match e {
        Error::PropertyViolation(_) => TsomStatus::PropertyViolation,
        Error::FrameOutOfRange { .. } => TsomStatus::OutOfRange,
        e if e.is_io() => TsomStatus::Io,
        _ => TsomStatus::Validation,
    }
}

struct Fail(TsomStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TsomStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TsomStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsomStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TsomStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(TsomStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn tsom_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tsom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default pipeline configuration as JSON. Free with [`tsom_string_free`].
#[no_mangle]
pub extern "C" fn tsom_default_config_json() -> *mut c_char {
    CString::new(PipelineConfig::default().to_json()).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tsom_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a detector for `width` x `height` frames. `config_json` may be
/// NULL for defaults; missing fields take defaults.
///
/// # Safety
/// `config_json` must be NULL or a nul-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tsom_detector_new(
    config_json: *const c_char,
    width: usize,
    height: usize,
    out: *mut *mut TsomDetector,
) -> TsomStatus {
    guard(|| {
        let config = if config_json.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::from_json(text(config_json, "config_json")?)?
        };
        let inner = Detector::new(&config, width, height)?;
        emit(out, TsomDetector { inner })
    })
}

/// # Safety
/// `detector` must be NULL or a live handle from [`tsom_detector_new`].
#[no_mangle]
pub unsafe extern "C" fn tsom_detector_free(detector: *mut TsomDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Creates an empty sequence of `width` x `height` frames.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsom_sequence_new(
    width: usize,
    height: usize,
    fps: f64,
    out: *mut *mut TsomSequence,
) -> TsomStatus {
    guard(|| {
        if width == 0 || height == 0 {
            return Err(Fail(TsomStatus::InvalidArgument, "frame dimensions must be positive".into()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Fail(TsomStatus::InvalidArgument, format!("fps must be positive, got {fps}")));
        }
        emit(out, TsomSequence { width, height, fps, frames: Vec::new() })
    })
}

/// Loads a frame directory or (animated) PNG.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsom_sequence_load(path: *const c_char, fps: f64, out: *mut *mut TsomSequence) -> TsomStatus {
    guard(|| {
        let seq = tsom::io::load_sequence(Path::new(text(path, "path")?), fps)?;
        let (width, height) = seq.dims().expect("loaded sequences are non-empty");
        emit(out, TsomSequence { width, height, fps: seq.fps(), frames: seq.into_frames() })
    })
}

unsafe fn push(seq: *mut TsomSequence, len: usize, values: impl FnOnce() -> Vec<f64>) -> Result<(), Fail> {
    let seq = seq.as_mut().ok_or_else(|| null("sequence"))?;
    if len != seq.width * seq.height {
        return Err(Fail(
            TsomStatus::InvalidArgument,
            format!("frame has {len} values, expected {}", seq.width * seq.height),
        ));
    }
    seq.frames.push(Raster::new(seq.width, seq.height, values())?);
    Ok(())
}

/// Appends a row-major frame of `len == width * height` luminances in
/// `[0, 1]`.
///
/// # Safety
/// `data` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsom_sequence_push_frame(seq: *mut TsomSequence, data: *const f64, len: usize) -> TsomStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        push(seq, len, || std::slice::from_raw_parts(data, len).to_vec())
    })
}

/// Appends a row-major 8-bit frame; values map to `v / 255`.
///
/// # Safety
/// `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn tsom_sequence_push_frame_u8(seq: *mut TsomSequence, data: *const u8, len: usize) -> TsomStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        push(seq, len, || std::slice::from_raw_parts(data, len).iter().map(|&v| v as f64 / 255.0).collect())
    })
}

/// Number of frames, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsom_sequence_len(seq: *const TsomSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.frames.len())
}

/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsom_sequence_free(seq: *mut TsomSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Runs the detector over the whole sequence.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsom_detect(
    detector: *const TsomDetector,
    seq: *const TsomSequence,
    out: *mut *mut TsomDetections,
) -> TsomStatus {
    guard(|| {
        let det = detector.as_ref().ok_or_else(|| null("detector"))?;
        let s = seq.as_ref().ok_or_else(|| null("sequence"))?;
        let sequence = Sequence::new(s.frames.clone(), s.fps)?;
        let items = det
            .inner
            .detect(&sequence)?
            .into_iter()
            .map(|d: Detection| TsomDetection { x: d.x, y: d.y, frame: d.t, score: d.score })
            .collect();
        emit(out, TsomDetections { items })
    })
}

/// # Safety
/// `dets` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsom_detections_len(dets: *const TsomDetections) -> usize {
    dets.as_ref().map_or(0, |d| d.items.len())
}

/// Copies detection `index` into `out`.
///
/// # Safety
/// `dets` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsom_detections_get(
    dets: *const TsomDetections,
    index: usize,
    out: *mut TsomDetection,
) -> TsomStatus {
    guard(|| {
        let d = dets.as_ref().ok_or_else(|| null("detections"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let item = d.items.get(index).ok_or_else(|| {
            Fail(TsomStatus::OutOfRange, format!("index {index} out of range for {} detections", d.items.len()))
        })?;
        *out = *item;
        Ok(())
    })
}

/// # Safety
/// `dets` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsom_detections_free(dets: *mut TsomDetections) {
    if !dets.is_null() {
        drop(Box::from_raw(dets));
    }
}

/// Monte Carlo check of the two-stage accumulation bound. Writes the number
/// of violating instances to `violations` (may be NULL) and returns
/// `PropertyViolation` when there is at least one.
///
/// # Safety
/// `violations` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tsom_circuit_verify(
    trials: u64,
    min_subsets: usize,
    max_subsets: usize,
    seed: u64,
    violations: *mut u64,
) -> TsomStatus {
    guard(|| {
        let report = tsom::circuit::verify_proposition(trials, min_subsets..=max_subsets, seed)?;
        if !violations.is_null() {
            *violations = report.violations;
        }
        if report.passed() {
            Ok(())
        } else {
            Err(Fail(TsomStatus::PropertyViolation, format!("{} violating instance(s)", report.violations)))
        }
    })
}
