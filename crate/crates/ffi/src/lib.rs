//! C ABI over the rulxai library.
//!
//! Datasets and models cross the boundary as opaque handles. Every fallible
//! function returns a [`RulxaiStatus`]; on failure the message is available
//! from [`rulxai_last_error`] on the same thread. Panics are caught and
//! reported as `RULXAI_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rulxai::explain;
use rulxai::ingest::{self, RecordFormat, SplitSpec, TabularDataset};
use rulxai::models::{self, FittedModel, ModelKind, ModelSpec, Predictor};
use rulxai::{Error, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RulxaiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Computation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque dataset handle.
pub struct RulxaiDataset {
    inner: TabularDataset,
}

/// Opaque fitted-model handle.
pub struct RulxaiModel {
    inner: FittedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(RulxaiStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => RulxaiStatus::Io,
            Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => RulxaiStatus::Parse,
            Error::Divergence { .. } | Error::SingularDesign(_) => RulxaiStatus::Computation,
            _ => RulxaiStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RulxaiStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RulxaiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RulxaiStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RulxaiStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RulxaiStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next rulxai call on the same thread.
#[no_mangle]
pub extern "C" fn rulxai_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rulxai_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a 26-column trajectory file, derives RUL, splits and (optionally)
/// min-max scales it. `unit < 0` keeps every engine; `csv` selects the
/// header-CSV format instead of whitespace-delimited text.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_load(
    path: *const c_char,
    csv: bool,
    unit: i64,
    test_ratio: f64,
    seed: u64,
    normalize: bool,
    out: *mut *mut RulxaiDataset,
) -> RulxaiStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let format = if csv { RecordFormat::Csv } else { RecordFormat::Whitespace };
        let table = ingest::load_records(path, format)?;
        let unit = if unit < 0 {
            None
        } else {
            Some(u32::try_from(unit).map_err(|_| Fail(RulxaiStatus::InvalidArgument, format!("unit {unit} out of range")))?)
        };
        let inner = ingest::build_dataset(&table, unit, normalize, SplitSpec { test_ratio, seed })?;
        *out = Box::into_raw(Box::new(RulxaiDataset { inner }));
        Ok(())
    })
}

/// New dataset restricted to the named feature columns, in the given order.
///
/// # Safety
/// `ds` must be a live dataset handle, `names` an array of `n_names`
/// NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_select(
    ds: *const RulxaiDataset,
    names: *const *const c_char,
    n_names: usize,
    out: *mut *mut RulxaiDataset,
) -> RulxaiStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_arg(out, "out")?;
        if names.is_null() && n_names > 0 {
            return Err(null("names"));
        }
        let mut list = Vec::with_capacity(n_names);
        for k in 0..n_names {
            list.push(str_arg(*names.add(k), "feature name")?.to_string());
        }
        let inner = ds.inner.with_features(&list)?;
        *out = Box::into_raw(Box::new(RulxaiDataset { inner }));
        Ok(())
    })
}

/// Rows in the dataset; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_n_rows(ds: *const RulxaiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_n_features(ds: *const RulxaiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_features())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_n_train(ds: *const RulxaiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_train())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_n_test(ds: *const RulxaiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_test())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rulxai_dataset_free(ds: *mut RulxaiDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains a model of `kind` (`tree`, `figs`, `ebm`, `relu_dnn`) on the
/// training split. `spec_json` may be null or a JSON object overriding
/// individual hyperparameters.
///
/// # Safety
/// `ds` must be a live dataset handle, `kind` a NUL-terminated string,
/// `spec_json` null or NUL-terminated, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_train(
    ds: *const RulxaiDataset,
    kind: *const c_char,
    spec_json: *const c_char,
    out: *mut *mut RulxaiModel,
) -> RulxaiStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let kind: ModelKind = str_arg(kind, "kind")?.parse()?;
        let out = out_arg(out, "out")?;
        let spec = if spec_json.is_null() {
            ModelSpec::default_for(kind)
        } else {
            let mut v: serde_json::Value = serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(Error::from)?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| Fail(RulxaiStatus::InvalidArgument, "spec_json must be a JSON object".into()))?;
            obj.insert("kind".into(), kind.as_str().into());
            serde_json::from_value(v).map_err(Error::from)?
        };
        let inner = models::fit(&spec, &ds.inner)?;
        *out = Box::into_raw(Box::new(RulxaiModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_load(path: *const c_char, out: *mut *mut RulxaiModel) -> RulxaiStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let inner = FittedModel::load(path)?;
        *out = Box::into_raw(Box::new(RulxaiModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_save(model: *const RulxaiModel, path: *const c_char) -> RulxaiStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        model.inner.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Serialized model as a newly allocated string; release it with
/// [`rulxai_string_free`].
///
/// # Safety
/// `model` must be a live model handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_to_json(model: *const RulxaiModel, out: *mut *mut c_char) -> RulxaiStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out_arg(out, "out")?;
        let json = model.inner.to_json()?;
        *out = CString::new(json)
            .map_err(|_| Fail(RulxaiStatus::Computation, "model JSON contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rulxai_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Feature count the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_n_features(model: *const RulxaiModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_features())
}

/// Predicts `n_rows` rows of a row-major `n_rows x n_cols` matrix into
/// `out` (length `n_rows`).
///
/// # Safety
/// `x` must point to `n_rows * n_cols` doubles and `out` to `n_rows`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_predict(
    model: *const RulxaiModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> RulxaiStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if n_rows == 0 {
            return Ok(());
        }
        if x.is_null() {
            return Err(null("x"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Fail(RulxaiStatus::InvalidArgument, "matrix size overflows".into()))?;
        let data = std::slice::from_raw_parts(x, len).to_vec();
        let m = Matrix::new(n_rows, n_cols, data)?;
        let pred = model.inner.predict(&m)?;
        ptr::copy_nonoverlapping(pred.as_ptr(), out, n_rows);
        Ok(())
    })
}

/// Exact Shapley values of dataset row `sample` against a seeded background
/// of up to 100 training rows. `phi` receives one value per model feature
/// (`phi_len` must be at least that) and `base` the background mean.
///
/// # Safety
/// `model` and `ds` must be live handles, `phi` must point to `phi_len`
/// writable doubles and `base` to one.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_shapley(
    model: *const RulxaiModel,
    ds: *const RulxaiDataset,
    sample: usize,
    seed: u64,
    phi: *mut f64,
    phi_len: usize,
    base: *mut f64,
) -> RulxaiStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let base = out_arg(base, "base")?;
        if phi.is_null() {
            return Err(null("phi"));
        }
        let d = model.inner.n_features();
        if phi_len < d {
            return Err(Fail(
                RulxaiStatus::BufferTooSmall,
                format!("phi holds {phi_len} values, model has {d} features"),
            ));
        }
        let dsm = ds.inner.with_features(&model.inner.feature_names)?;
        let background = explain::default_background(&dsm, explain::DEFAULT_BACKGROUND_SIZE, seed);
        let a = explain::shapley_exact(&model.inner, &dsm, sample, &background, explain::DEFAULT_MAX_SHAPLEY_FEATURES)?;
        for (k, f) in a.features.iter().enumerate() {
            *phi.add(k) = f.value;
        }
        *base = a.base_value;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rulxai_model_free(model: *mut RulxaiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
