//! C ABI over the `ggfa` library.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`GgfaStatus`];
//! on failure the message is available from [`ggfa_last_error_message`] on
//! the same thread. Arrays are caller-allocated; matrices are row-major.
//! Binary values are passed as bytes holding 0 or 1.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::DVector;

use ggfa::canon::canonicalize;
use ggfa::fit::{fit, log_likelihood, FitConfig};
use ggfa::io::{load_csv, FitMetadata, ModelFile};
use ggfa::{BitState, Dataset, Error, Model, Schema};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GgfaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Numerical = 5,
    Capacity = 6,
    Panic = 7,
}

/// A model together with the column schema its parameters refer to.
pub struct GgfaModel {
    schema: Schema,
    model: Model,
    canonical: bool,
    fit: Option<FitMetadata>,
}

pub struct GgfaDataset {
    data: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(GgfaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Capacity { .. } => GgfaStatus::Capacity,
            Error::Io(_) => GgfaStatus::Io,
            Error::InvalidParams(_) | Error::InvalidInput(_) | Error::LatentDimOutOfRange { .. } => {
                GgfaStatus::InvalidArgument
            }
            Error::Numerical(_) | Error::AllRestartsFailed { .. } | Error::DegenerateCorrelation { .. } => {
                GgfaStatus::Numerical
            }
            _ => GgfaStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GgfaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GgfaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GgfaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            GgfaStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GgfaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn model_ref<'a>(m: *const GgfaModel) -> Result<&'a GgfaModel, Failure> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn row_arg(model: &GgfaModel, x: *const f64, y: *const u8) -> Result<(DVector<f64>, BitState), Failure> {
    let p = model.model.params();
    let (p_x, q) = (p.p_x(), p.q());
    if p_x > 0 && x.is_null() {
        return Err(null("x"));
    }
    if q > 0 && y.is_null() {
        return Err(null("y"));
    }
    let xs = if p_x > 0 { std::slice::from_raw_parts(x, p_x).to_vec() } else { Vec::new() };
    let ys = if q > 0 { std::slice::from_raw_parts(y, q) } else { &[] };
    Ok((DVector::from_vec(xs), BitState::from_u8(ys)?))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length in bytes.
/// Pass a null `buf` to query the length.
#[no_mangle]
pub unsafe extern "C" fn ggfa_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Reads a model document written by the command-line tool or `ggfa_model_save`.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_load(path: *const c_char, out: *mut *mut GgfaModel) -> GgfaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let file = ModelFile::load(&path_arg(path, "path")?)?;
        let handle = GgfaModel {
            schema: file.schema()?,
            model: Model::new(file.params()?)?,
            canonical: file.canonical,
            fit: file.fit.clone(),
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ggfa_model_save(model: *const GgfaModel, path: *const c_char) -> GgfaStatus {
    guard(|| {
        let m = model_ref(model)?;
        let file = ModelFile::new(&m.schema, m.model.params(), m.canonical, m.fit.clone())?;
        file.save(&path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Releases a model; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_free(model: *mut GgfaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of continuous variables, binary variables and latent dimensions.
/// Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_dims(
    model: *const GgfaModel,
    p_x: *mut usize,
    q: *mut usize,
    p_z: *mut usize,
) -> GgfaStatus {
    guard(|| {
        let p = model_ref(model)?.model.params();
        for (dst, v) in [(p_x, p.p_x()), (q, p.q()), (p_z, p.p_z())] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// `log p(x, y)` of a complete row; `x` has `p_x` entries, `y` has `q`.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_log_joint(
    model: *const GgfaModel,
    x: *const f64,
    y: *const u8,
    out: *mut f64,
) -> GgfaStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (xv, yv) = row_arg(m, x, y)?;
        *out = m.model.log_joint_observed(&xv, &yv)?;
        Ok(())
    })
}

/// Posterior mean (`p_z` entries) and, if `cov_out` is non-null, covariance
/// (`p_z * p_z` entries) of the latent vector given a complete row.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_posterior(
    model: *const GgfaModel,
    x: *const f64,
    y: *const u8,
    mean_out: *mut f64,
    cov_out: *mut f64,
) -> GgfaStatus {
    guard(|| {
        let m = model_ref(model)?;
        if mean_out.is_null() {
            return Err(null("mean_out"));
        }
        let (xv, yv) = row_arg(m, x, y)?;
        let post = m.model.posterior(&xv, &yv)?;
        let p_z = post.m.len();
        std::slice::from_raw_parts_mut(mean_out, p_z).copy_from_slice(post.m.as_slice());
        if !cov_out.is_null() {
            let dst = std::slice::from_raw_parts_mut(cov_out, p_z * p_z);
            for r in 0..p_z {
                for c in 0..p_z {
                    dst[r * p_z + c] = post.cov[(r, c)];
                }
            }
        }
        Ok(())
    })
}

/// Creates the canonical form of `model` as a new handle. If non-null,
/// `ratios_out` receives the `p_z` contribution ratios.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_canonicalize(
    model: *const GgfaModel,
    out: *mut *mut GgfaModel,
    ratios_out: *mut f64,
) -> GgfaStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let canon = canonicalize(m.model.params())?;
        if !ratios_out.is_null() {
            std::slice::from_raw_parts_mut(ratios_out, canon.p.len()).copy_from_slice(canon.p.as_slice());
        }
        let handle = GgfaModel {
            schema: m.schema.clone(),
            model: Model::new(canon.params)?,
            canonical: true,
            fit: m.fit.clone(),
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// Log mixing weights of all `2^q` binary states; state `k` has variable `s`
/// equal to bit `s` of `k`. `len` must equal `2^q`.
#[no_mangle]
pub unsafe extern "C" fn ggfa_model_mixing_table(model: *const GgfaModel, log_pi_out: *mut f64, len: usize) -> GgfaStatus {
    guard(|| {
        let m = model_ref(model)?;
        if log_pi_out.is_null() {
            return Err(null("log_pi_out"));
        }
        let table = &m.model.mixing_table().log_pi;
        if len != table.len() {
            return Err(Failure(
                GgfaStatus::InvalidArgument,
                format!("buffer holds {len} values, table has {}", table.len()),
            ));
        }
        std::slice::from_raw_parts_mut(log_pi_out, len).copy_from_slice(table);
        Ok(())
    })
}

/// Reads a CSV data file described by a `name,kind` schema file.
#[no_mangle]
pub unsafe extern "C" fn ggfa_dataset_load_csv(
    data_path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut GgfaDataset,
) -> GgfaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = load_csv(&path_arg(data_path, "data_path")?, &path_arg(schema_path, "schema_path")?)?;
        *out = Box::into_raw(Box::new(GgfaDataset { data }));
        Ok(())
    })
}

/// Releases a dataset; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ggfa_dataset_free(dataset: *mut GgfaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ggfa_dataset_rows(dataset: *const GgfaDataset, out: *mut usize) -> GgfaStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.data.len();
        Ok(())
    })
}

unsafe fn matching<'a>(model: *const GgfaModel, dataset: *const GgfaDataset) -> Result<(&'a GgfaModel, &'a Dataset), Failure> {
    let m = model_ref(model)?;
    let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.data;
    if d.schema.internal_order() != m.schema.internal_order() {
        return Err(Failure(GgfaStatus::Data, "dataset columns do not match the model".into()));
    }
    Ok((m, d))
}

/// Log-likelihood of a dataset, marginalizing missing cells.
#[no_mangle]
pub unsafe extern "C" fn ggfa_log_likelihood(model: *const GgfaModel, dataset: *const GgfaDataset, out: *mut f64) -> GgfaStatus {
    guard(|| {
        let (m, d) = matching(model, dataset)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = log_likelihood(d, m.model.params())?;
        Ok(())
    })
}

/// Multi-start maximum-likelihood fit, returned in canonical form.
/// `log_lik_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ggfa_fit(
    dataset: *const GgfaDataset,
    p_z: usize,
    n_restarts: usize,
    seed: u64,
    out: *mut *mut GgfaModel,
    log_lik_out: *mut f64,
) -> GgfaStatus {
    guard(|| {
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.data;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = FitConfig {
            n_restarts,
            seed,
            ..FitConfig::default()
        };
        let res = fit(d, p_z, &cfg)?;
        let canon = canonicalize(&res.params)?;
        if !log_lik_out.is_null() {
            *log_lik_out = res.log_lik;
        }
        let handle = GgfaModel {
            schema: d.schema.clone(),
            model: Model::new(canon.params)?,
            canonical: true,
            fit: Some(FitMetadata {
                log_lik: res.log_lik,
                bic: res.bic,
                n_params: res.n_params,
                seed,
                restarts: n_restarts,
            }),
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}
