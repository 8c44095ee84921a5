//! C interface to `tm-composite`.
//!
//! Handles are opaque pointers created by `tmc_*_load`/`tmc_*_new` and
//! released by the matching `tmc_*_free`. Every fallible call returns a
//! [`TmcStatus`]; on failure [`tmc_last_error`] describes what went wrong on
//! the calling thread.
//!
//! Images are passed as row-major `height * width * channels` bytes, several
//! images back to back.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use tm_composite::composite::{compose_predict, Composite, ClassSumMatrix, Normalization};
use tm_composite::datasets::ImageView;
use tm_composite::persist::{load_model, member_name};
use tm_composite::{Error, LabeledImageSet, TmModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Integrity = 5,
    Version = 6,
    Consistency = 7,
    Composition = 8,
    Panic = 9,
}

/// A loaded model.
pub struct TmcModel {
    name: String,
    model: Arc<TmModel>,
}

/// A composite under construction or ready to predict.
pub struct TmcComposite {
    members: Vec<(String, Arc<TmModel>)>,
    alphas: Option<Vec<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TmcStatus {
    match e {
        Error::Usage(_) => TmcStatus::InvalidArgument,
        Error::Format(_) => TmcStatus::Format,
        Error::Consistency(_) => TmcStatus::Consistency,
        Error::Integrity(_) => TmcStatus::Integrity,
        Error::Version { .. } => TmcStatus::Version,
        Error::Composition(_) => TmcStatus::Composition,
        Error::Io(_) => TmcStatus::Io,
    }
}

struct Fail(TmcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TmcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TmcStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(TmcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(TmcStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn image_bytes(model: &TmModel) -> usize {
    let (h, w, c) = model.image_shape();
    h * w * c
}

fn image<'a>(model: &TmModel, pixels: &'a [u8]) -> Result<ImageView<'a>, Fail> {
    let (height, width, channels) = model.image_shape();
    if pixels.len() != height * width * channels {
        return Err(invalid(format!(
            "expected {} pixel bytes ({height}x{width}x{channels}), got {}",
            height * width * channels,
            pixels.len()
        )));
    }
    Ok(ImageView { height, width, channels, pixels })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `tmc_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a `.tmmodel` file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tmc_model_load(path: *const c_char, out: *mut *mut TmcModel) -> TmcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let path = Path::new(path);
        let model = load_model(path)?;
        *out = Box::into_raw(Box::new(TmcModel {
            name: member_name(path),
            model: Arc::new(model),
        }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `tmc_model_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tmc_model_free(model: *mut TmcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmc_model_num_classes(model: *const TmcModel, out: *mut usize) -> TmcStatus {
    guard(|| {
        let m = deref(model, "model")?;
        *deref_mut(out, "out")? = m.model.classes();
        Ok(())
    })
}

/// Input image shape expected by the model.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmc_model_input_shape(
    model: *const TmcModel,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> TmcStatus {
    guard(|| {
        let (h, w, c) = deref(model, "model")?.model.image_shape();
        *deref_mut(height, "height")? = h;
        *deref_mut(width, "width")? = w;
        *deref_mut(channels, "channels")? = c;
        Ok(())
    })
}

/// Writes the class sums of one image into `sums[0..sums_len]`;
/// `sums_len` must equal the class count.
///
/// # Safety
/// `pixels` must hold `pixels_len` bytes and `sums` `sums_len` integers.
#[no_mangle]
pub unsafe extern "C" fn tmc_model_class_sums(
    model: *const TmcModel,
    pixels: *const u8,
    pixels_len: usize,
    sums: *mut i32,
    sums_len: usize,
) -> TmcStatus {
    guard(|| {
        let m = &deref(model, "model")?.model;
        let img = image(m, slice(pixels, pixels_len, "pixels")?)?;
        if sums_len != m.classes() {
            return Err(invalid(format!("sums_len is {sums_len}, model has {} classes", m.classes())));
        }
        let out = slice_mut(sums, sums_len, "sums")?;
        out.copy_from_slice(&m.class_sums_image(img)?);
        Ok(())
    })
}

/// Predicted label and its class sum for one image.
///
/// # Safety
/// `pixels` must hold `pixels_len` bytes; `label` and `confidence` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tmc_model_classify(
    model: *const TmcModel,
    pixels: *const u8,
    pixels_len: usize,
    label: *mut usize,
    confidence: *mut i32,
) -> TmcStatus {
    guard(|| {
        let m = &deref(model, "model")?.model;
        let img = image(m, slice(pixels, pixels_len, "pixels")?)?;
        let label = deref_mut(label, "label")?;
        let confidence = deref_mut(confidence, "confidence")?;
        let p = m.classify_image(img)?;
        *label = p.label;
        *confidence = p.confidence;
        Ok(())
    })
}

/// Creates an empty composite using batch normalization.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmc_composite_new(out: *mut *mut TmcComposite) -> TmcStatus {
    guard(|| {
        *deref_mut(out, "out")? = Box::into_raw(Box::new(TmcComposite {
            members: Vec::new(),
            alphas: None,
        }));
        Ok(())
    })
}

/// Releases a composite handle. Null is ignored.
///
/// # Safety
/// `composite` must come from `tmc_composite_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tmc_composite_free(composite: *mut TmcComposite) {
    if !composite.is_null() {
        drop(Box::from_raw(composite));
    }
}

/// Adds a member. The composite keeps its own reference, so the model handle
/// may be freed afterwards. Clears any frozen alphas.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn tmc_composite_add(composite: *mut TmcComposite, model: *const TmcModel) -> TmcStatus {
    guard(|| {
        let c = deref_mut(composite, "composite")?;
        let m = deref(model, "model")?;
        if let Some((_, first)) = c.members.first() {
            if first.classes() != m.model.classes() || first.image_shape() != m.model.image_shape() {
                return Err(Fail(
                    TmcStatus::Composition,
                    format!("member {:?} does not match the composite's classes or input shape", m.name),
                ));
            }
        }
        c.members.push((m.name.clone(), Arc::clone(&m.model)));
        c.alphas = None;
        Ok(())
    })
}

/// Freezes the per-member alphas (one per member, each > 0). Passing null
/// returns to batch normalization.
///
/// # Safety
/// `alphas` must hold `len` doubles unless null.
#[no_mangle]
pub unsafe extern "C" fn tmc_composite_set_alphas(
    composite: *mut TmcComposite,
    alphas: *const f64,
    len: usize,
) -> TmcStatus {
    guard(|| {
        let c = deref_mut(composite, "composite")?;
        if alphas.is_null() {
            c.alphas = None;
            return Ok(());
        }
        let a = slice(alphas, len, "alphas")?;
        if a.len() != c.members.len() || a.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Fail(
                TmcStatus::Composition,
                format!("need {} finite positive alphas", c.members.len()),
            ));
        }
        c.alphas = Some(a.to_vec());
        Ok(())
    })
}

/// Classifies `count` images. With batch normalization the alphas come from
/// this batch. `scores` may be null; otherwise it receives `count * classes`
/// fused scores, row-major.
///
/// # Safety
/// `pixels` must hold `pixels_len` bytes, `labels` `count` entries and
/// `scores` (if non-null) `count * classes` doubles.
#[no_mangle]
pub unsafe extern "C" fn tmc_composite_predict(
    composite: *const TmcComposite,
    pixels: *const u8,
    pixels_len: usize,
    count: usize,
    labels: *mut usize,
    scores: *mut f64,
) -> TmcStatus {
    guard(|| {
        let c = deref(composite, "composite")?;
        let normalization = match &c.alphas {
            Some(a) => Normalization::Frozen(a.clone()),
            None => Normalization::Batch,
        };
        let composite = Composite::new(c.members.clone(), normalization)?;
        let first = &composite.members[0].1;
        if count == 0 {
            return Err(invalid("count is 0"));
        }
        let px = slice(pixels, pixels_len, "pixels")?;
        if px.len() != count * image_bytes(first) {
            return Err(invalid(format!(
                "expected {} pixel bytes for {count} images, got {}",
                count * image_bytes(first),
                px.len()
            )));
        }
        let labels = slice_mut(labels, count, "labels")?;
        let set = LabeledImageSet::new("ffi", first.image_shape(), first.classes(), px.to_vec(), vec![0; count])?;
        let p = composite.predict(&set)?;
        labels.copy_from_slice(&p.labels);
        if !scores.is_null() {
            slice_mut(scores, count * p.classes, "scores")?.copy_from_slice(&p.scores);
        }
        Ok(())
    })
}

/// Fuses precomputed class sums laid out as `[member][input][class]` with
/// batch normalization. `alphas` may be null; otherwise it receives one
/// alpha per member.
///
/// # Safety
/// `sums` must hold `members * inputs * classes` integers, `labels` `inputs`
/// entries and `alphas` (if non-null) `members` doubles.
#[no_mangle]
pub unsafe extern "C" fn tmc_fuse_class_sums(
    sums: *const i32,
    members: usize,
    inputs: usize,
    classes: usize,
    labels: *mut usize,
    alphas: *mut f64,
) -> TmcStatus {
    guard(|| {
        if members == 0 || classes == 0 {
            return Err(Fail(TmcStatus::Composition, "need at least one member and one class".into()));
        }
        let all = slice(sums, members * inputs * classes, "sums")?;
        let per = inputs * classes;
        let mats = (0..members)
            .map(|j| ClassSumMatrix::new(format!("member{j}"), classes, all[j * per..(j + 1) * per].to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let p = compose_predict(&mats, &Normalization::Batch)?;
        slice_mut(labels, inputs, "labels")?.copy_from_slice(&p.labels);
        if !alphas.is_null() {
            slice_mut(alphas, members, "alphas")?.copy_from_slice(&p.alphas);
        }
        Ok(())
    })
}
