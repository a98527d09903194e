//! C ABI over `cuneilid`.
//!
//! Every fallible function returns a [`CuneilidStatus`]. On failure the
//! message is available from [`cuneilid_last_error`] on the same thread until
//! the next call. Strings handed out by the library are freed with
//! [`cuneilid_string_free`]; handles with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cuneilid::classify::ClassifyError;
use cuneilid::corpus::{self, normalize_text, CorpusError};
use cuneilid::models::{self, ModelError};
use cuneilid::signmap::{self, SignError};
use cuneilid::{ConversionMode, EnsembleConfig, Method, MethodConfig, MysteryLine, NGramRange, Predictor};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuneilidStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    UnknownReading = 5,
    RangeMismatch = 6,
    InvalidArgument = 7,
    Panic = 8,
}

/// A trained set of per-language models.
pub struct CuneilidModelSet(models::ModelSet);

/// A reading-to-sign list.
pub struct CuneilidSignList(signmap::SignList);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CuneilidStatus, String);

impl Failure {
    fn new(status: CuneilidStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io { .. } => CuneilidStatus::Io,
            ModelError::InvalidRange(_) | ModelError::EmptyCorpus => CuneilidStatus::InvalidArgument,
            _ => CuneilidStatus::Format,
        };
        Failure::new(status, e)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let status = match e {
            CorpusError::Io { .. } => CuneilidStatus::Io,
            _ => CuneilidStatus::Format,
        };
        Failure::new(status, e)
    }
}

impl From<SignError> for Failure {
    fn from(e: SignError) -> Self {
        let status = match e {
            SignError::Io { .. } => CuneilidStatus::Io,
            SignError::UnknownReading { .. } => CuneilidStatus::UnknownReading,
            _ => CuneilidStatus::Format,
        };
        Failure::new(status, e)
    }
}

impl From<ClassifyError> for Failure {
    fn from(e: ClassifyError) -> Self {
        let status = match e {
            ClassifyError::RangeMismatch { .. } => CuneilidStatus::RangeMismatch,
            _ => CuneilidStatus::InvalidArgument,
        };
        Failure::new(status, e)
    }
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("interior NUL removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CuneilidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            CuneilidStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            CuneilidStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CuneilidStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(CuneilidStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(CuneilidStatus::NullArgument, format!("{name} is NULL")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(CuneilidStatus::NullArgument, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

fn to_c_string(s: &str) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(CuneilidStatus::Format, "string contains NUL"))
}

fn parse_range(s: &str) -> Result<NGramRange, Failure> {
    s.parse::<NGramRange>().map_err(Failure::from)
}

/// Message for the most recent failure on this thread, or NULL after a
/// success. The pointer stays valid until the next library call on the thread.
#[no_mangle]
pub extern "C" fn cuneilid_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a model set from a JSON model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_models_load(path: *const c_char, out: *mut *mut CuneilidModelSet) -> CuneilidStatus {
    guard(|| {
        out_arg(out, "out")?;
        let m = models::load_models(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(CuneilidModelSet(m)));
        Ok(())
    })
}

/// Trains a model set from a `<text>\t<label>` file. `range` is written
/// `L-H` or `L-H+lines`.
///
/// # Safety
/// `path` and `range` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_models_train_tsv(
    path: *const c_char,
    range: *const c_char,
    out: *mut *mut CuneilidModelSet,
) -> CuneilidStatus {
    guard(|| {
        out_arg(out, "out")?;
        let range = parse_range(str_arg(range, "range")?)?;
        let data = corpus::load_labeled(Path::new(str_arg(path, "path")?))?;
        let m = models::train(&data, range)?;
        *out = Box::into_raw(Box::new(CuneilidModelSet(m)));
        Ok(())
    })
}

/// Writes a model set as JSON.
///
/// # Safety
/// `models` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_models_save(models: *const CuneilidModelSet, path: *const c_char) -> CuneilidStatus {
    guard(|| {
        let m = ref_arg(models, "models")?;
        models::save_models(&m.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Releases a model set. NULL is ignored.
///
/// # Safety
/// `models` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_models_free(models: *mut CuneilidModelSet) {
    if !models.is_null() {
        drop(Box::from_raw(models));
    }
}

/// Number of languages in the set, or 0 for NULL.
///
/// # Safety
/// `models` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_models_label_count(models: *const CuneilidModelSet) -> usize {
    models.as_ref().map_or(0, |m| m.0.models().len())
}

/// Label at `index` in sorted order, as a newly allocated string.
///
/// # Safety
/// `models` must be a live handle; `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_models_label(
    models: *const CuneilidModelSet,
    index: usize,
    out_label: *mut *mut c_char,
) -> CuneilidStatus {
    guard(|| {
        out_arg(out_label, "out_label")?;
        let m = ref_arg(models, "models")?;
        let label = m
            .0
            .labels()
            .nth(index)
            .ok_or_else(|| Failure::new(CuneilidStatus::InvalidArgument, format!("label index {index} out of range")))?;
        *out_label = to_c_string(label.as_str())?;
        Ok(())
    })
}

fn build_predictor(method: Method, penalty: f64, range: Option<NGramRange>, model_range: NGramRange) -> Result<Predictor, Failure> {
    let pick = |p: f64, m: Method| if p == 0.0 { m.default_penalty() } else { p };
    Ok(match method {
        Method::Ensemble => {
            let r = |default: &str| range.map_or_else(|| parse_range(default), Ok);
            Predictor::Ensemble(EnsembleConfig {
                simple: MethodConfig::new(Method::Simple, r("1-10")?, Method::Simple.default_penalty())?,
                sum: MethodConfig::new(Method::Sum, r("3-15")?, Method::Sum.default_penalty())?,
                product: MethodConfig::new(Method::Product, r("1-4")?, pick(penalty, Method::Product))?,
            })
        }
        m => Predictor::Single(MethodConfig::new(m, range.unwrap_or(model_range), pick(penalty, m))?),
    })
}

/// Identifies the language of one line of cuneiform text.
///
/// `method` is one of `simple`, `sum`, `product`, `heli`, `ensemble`.
/// A `penalty` of 0 selects the method default. `range` may be NULL to use
/// the model range (or the standard ensemble ranges). The label is written
/// to `out_label` as a newly allocated string.
///
/// # Safety
/// `models` must be a live handle; `line` and `method` NUL-terminated
/// strings; `range` NULL or a NUL-terminated string; `out_label` writable.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_identify(
    models: *const CuneilidModelSet,
    line: *const c_char,
    method: *const c_char,
    penalty: c_double,
    range: *const c_char,
    out_label: *mut *mut c_char,
) -> CuneilidStatus {
    guard(|| {
        out_arg(out_label, "out_label")?;
        let m = ref_arg(models, "models")?;
        let line = str_arg(line, "line")?;
        let method: Method = str_arg(method, "method")?.parse()?;
        let range = if range.is_null() { None } else { Some(parse_range(str_arg(range, "range")?)?) };
        let p = build_predictor(method, penalty, range, m.0.range())?;
        p.validate(&m.0)?;
        let label = p.predict(&MysteryLine::new(normalize_text(line)), &m.0)?;
        *out_label = to_c_string(label.as_str())?;
        Ok(())
    })
}

/// Loads a `<reading>\t<signs>` sign list.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_signs_load(path: *const c_char, out: *mut *mut CuneilidSignList) -> CuneilidStatus {
    guard(|| {
        out_arg(out, "out")?;
        let s = signmap::SignList::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(CuneilidSignList(s)));
        Ok(())
    })
}

/// Releases a sign list. NULL is ignored.
///
/// # Safety
/// `signs` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_signs_free(signs: *mut CuneilidSignList) {
    if !signs.is_null() {
        drop(Box::from_raw(signs));
    }
}

/// Converts one ATF transliteration line to cuneiform.
///
/// With `strict` non-zero an unknown reading fails with
/// `CUNEILID_STATUS_UNKNOWN_READING`; otherwise it is dropped and counted in
/// `out_dropped`, which may be NULL.
///
/// # Safety
/// `signs` must be a live handle; `atf` a NUL-terminated string; `out`
/// writable; `out_dropped` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cuneilid_convert(
    signs: *const CuneilidSignList,
    atf: *const c_char,
    strict: i32,
    out: *mut *mut c_char,
    out_dropped: *mut usize,
) -> CuneilidStatus {
    guard(|| {
        out_arg(out, "out")?;
        let s = ref_arg(signs, "signs")?;
        let mode = if strict != 0 { ConversionMode::Strict } else { ConversionMode::Lenient };
        let conv = signmap::convert_atf(str_arg(atf, "atf")?, &s.0, mode)?;
        *out = to_c_string(&conv.line.to_string())?;
        if !out_dropped.is_null() {
            *out_dropped = conv.dropped_count();
        }
        Ok(())
    })
}
