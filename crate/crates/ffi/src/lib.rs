//! C ABI for `vitali-tf`.
//!
//! Tensors and fits are opaque handles created and released by this library.
//! Every fallible function returns a [`VtfStatus`]; on failure the message is
//! available through [`vtf_last_error_message`] on the calling thread.
//! Shapes and data are row-major (last axis fastest).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vitali_tf::diff::vitali_tv;
use vitali_tf::dictionary::ProductDictionary;
use vitali_tf::error::Error;
use vitali_tf::io::{load_vtf, save_vtf};
use vitali_tf::solver::{
    fit_all_margins, fit_margin, lambda_max, universal_lambda, AnovaFitConfig, FitConfig, LambdaRule, SolverKind,
};
use vitali_tf::tensor::Tensor;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VtfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Numerical = 4,
    NotConverged = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

/// Solver used by [`vtf_fit_margin`] and [`vtf_fit_anova`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VtfSolver {
    ActiveSet = 0,
    AcceleratedProximalGradient = 1,
    CoordinateDescent = 2,
}

impl From<VtfSolver> for SolverKind {
    fn from(s: VtfSolver) -> Self {
        match s {
            VtfSolver::ActiveSet => SolverKind::ActiveSet,
            VtfSolver::AcceleratedProximalGradient => SolverKind::AcceleratedProximalGradient,
            VtfSolver::CoordinateDescent => SolverKind::CoordinateDescent,
        }
    }
}

/// Opaque dense tensor.
pub struct VtfTensor(Tensor);

/// Opaque fit: the estimate and its diagnostics.
pub struct VtfFit {
    fitted: Tensor,
    lambda: f64,
    objective: f64,
    kkt_residual: f64,
    iterations: usize,
    support: usize,
    converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> VtfStatus {
    match e {
        Error::Shape(_) | Error::Order { .. } | Error::Index(_) => VtfStatus::Shape,
        Error::Domain(_) | Error::Invalid(_) | Error::Config(_) => VtfStatus::InvalidArgument,
        Error::Numerical(_) | Error::Certification(_) => VtfStatus::Numerical,
        Error::Convergence { .. } => VtfStatus::NotConverged,
        Error::Format(_) => VtfStatus::Format,
        Error::Io(_) => VtfStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VtfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            VtfStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            VtfStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            VtfStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VtfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Invalid("path is not valid UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the message of the last failed call on this thread into `buf`
/// (NUL-terminated, truncated to `cap - 1` bytes) and returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vtf_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vtf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a tensor of shape `shape[0..ndim]` from `data[0..len]`, where `len`
/// must equal the product of the extents.
///
/// # Safety
/// `shape` and `data` must point to `ndim` and `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_new(
    shape: *const usize,
    ndim: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut VtfTensor,
) -> VtfStatus {
    guard(|| {
        let shape = slice(shape, ndim, "shape")?.to_vec();
        let data = slice(data, len, "data")?.to_vec();
        put(out, VtfTensor(Tensor::new(shape, data)?))
    })
}

/// Releases a tensor; null is ignored.
///
/// # Safety
/// `t` must be null or a handle returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_free(t: *mut VtfTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of axes, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_ndim(t: *const VtfTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.ndim())
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_len(t: *const VtfTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Writes the extents into `shape[0..cap]`; `cap` must be at least the number of axes.
///
/// # Safety
/// `t` must be a live tensor handle and `shape` must point to `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_shape(t: *const VtfTensor, shape: *mut usize, cap: usize) -> VtfStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        copy_out(t.0.shape(), shape, cap)
    })
}

/// Writes the entries into `data[0..cap]`; `cap` must be at least the number of entries.
///
/// # Safety
/// `t` must be a live tensor handle and `data` must point to `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_data(t: *const VtfTensor, data: *mut f64, cap: usize) -> VtfStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        copy_out(t.0.data(), data, cap)
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, cap: usize) -> Result<(), Failure> {
    if cap < src.len() {
        return Err(Failure::Invalid(format!("buffer holds {cap} elements, {} needed", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(Failure::Null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Reads a `VTF1` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_load(path: *const c_char, out: *mut *mut VtfTensor) -> VtfStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, VtfTensor(load_vtf(path)?))
    })
}

/// Writes a `VTF1` file.
///
/// # Safety
/// `t` must be a live tensor handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vtf_tensor_save(t: *const VtfTensor, path: *const c_char) -> VtfStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        save_vtf(&t.0, path_arg(path)?)?;
        Ok(())
    })
}

/// `TV_k(t) = ||D^k t||_1`.
///
/// # Safety
/// `t` must be a live tensor handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_vitali_tv(t: *const VtfTensor, k: usize, out: *mut f64) -> VtfStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        let v = vitali_tv(&t.0, k)?;
        *out.as_mut().ok_or(Failure::Null("out"))? = v;
        Ok(())
    })
}

/// Smallest penalty level at which the full-margin fit of `y` is zero.
///
/// # Safety
/// `y` must be a live tensor handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_lambda_max(y: *const VtfTensor, k: usize, out: *mut f64) -> VtfStatus {
    guard(|| {
        let y = deref(y, "y")?;
        let v = lambda_max(&y.0, k)?;
        *out.as_mut().ok_or(Failure::Null("out"))? = v;
        Ok(())
    })
}

/// Universal penalty level for noise level `sigma` and `n` entries.
#[no_mangle]
pub extern "C" fn vtf_universal_lambda(sigma: f64, n: usize) -> f64 {
    universal_lambda(sigma, n)
}

/// Fits the full margin of `y` at penalty `lambda` and returns the estimate
/// `fitted + (y - y_perp)`, which adds back the polynomial null-space part.
/// A run that stops before convergence still returns its fit with status
/// `NotConverged`.
///
/// # Safety
/// `y` must be a live tensor handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_margin(
    y: *const VtfTensor,
    k: usize,
    lambda: f64,
    solver: VtfSolver,
    out: *mut *mut VtfFit,
) -> VtfStatus {
    let mut partial = None;
    let status = guard(|| {
        let y = &deref(y, "y")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let cfg = FitConfig::new(lambda).with_solver(solver.into());
        let (fit, err) = match fit_margin(y, k, &cfg) {
            Ok(fit) => (fit, None),
            Err(Error::Convergence { iterations, kkt_residual, partial }) => {
                (*partial.clone(), Some(Error::Convergence { iterations, kkt_residual, partial }))
            }
            Err(e) => return Err(e.into()),
        };
        let perp = ProductDictionary::new(y.shape(), k)?.project(y)?;
        let mut fitted = y.sub(&perp)?;
        fitted.add_assign(&fit.fitted)?;
        partial = Some(VtfFit {
            fitted,
            lambda: fit.lambda,
            objective: fit.objective,
            kkt_residual: fit.kkt_residual,
            iterations: fit.iterations,
            support: fit.support_size(),
            converged: fit.converged,
        });
        err.map_or(Ok(()), |e| Err(e.into()))
    });
    if let Some(fit) = partial {
        *out = Box::into_raw(Box::new(fit));
    }
    status
}

/// Fits every ANOVA margin of `y`, each at `scale` times its universal level
/// for noise level `sigma`.
///
/// # Safety
/// `y` must be a live tensor handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_anova(
    y: *const VtfTensor,
    k: usize,
    sigma: f64,
    scale: f64,
    solver: VtfSolver,
    out: *mut *mut VtfFit,
) -> VtfStatus {
    guard(|| {
        let y = &deref(y, "y")?.0;
        if !(sigma >= 0.0 && sigma.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Failure::Invalid(format!("need sigma >= 0 and scale > 0, got {sigma} and {scale}")));
        }
        let mut cfg = AnovaFitConfig::new(k, LambdaRule::Universal { sigma, scale });
        cfg.solver = solver.into();
        let fit = fit_all_margins(y, &cfg)?;
        let fits: Vec<_> = fit.margins.iter().filter_map(|m| m.fit.as_ref()).collect();
        let full = fit.margins.iter().find(|m| m.key.axes.len() == y.ndim());
        let result = VtfFit {
            lambda: full.map_or(f64::NAN, |m| m.lambda),
            objective: f64::NAN,
            kkt_residual: fits.iter().map(|f| f.kkt_residual).fold(0.0, f64::max),
            iterations: fits.iter().map(|f| f.iterations).max().unwrap_or(0),
            support: fits.iter().map(|f| f.support_size()).sum(),
            converged: fits.iter().all(|f| f.converged),
            fitted: fit.fitted,
        };
        put(out, result)
    })
}

/// Releases a fit; null is ignored.
///
/// # Safety
/// `f` must be null or a handle returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_free(f: *mut VtfFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Copies the estimate into a new tensor owned by the caller.
///
/// # Safety
/// `f` must be a live fit handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_fitted(f: *const VtfFit, out: *mut *mut VtfTensor) -> VtfStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        put(out, VtfTensor(f.fitted.clone()))
    })
}

/// Penalty level of the full margin.
///
/// # Safety
/// `f` must be null or a live fit handle; null yields NaN.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_lambda(f: *const VtfFit) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.lambda)
}

/// Objective value of a full-margin fit; NaN for ANOVA fits.
///
/// # Safety
/// `f` must be null or a live fit handle; null yields NaN.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_objective(f: *const VtfFit) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.objective)
}

/// Largest KKT residual over the fitted margins.
///
/// # Safety
/// `f` must be null or a live fit handle; null yields NaN.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_kkt_residual(f: *const VtfFit) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.kkt_residual)
}

/// Solver iterations (the maximum over margins for ANOVA fits).
///
/// # Safety
/// `f` must be null or a live fit handle; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_iterations(f: *const VtfFit) -> usize {
    f.as_ref().map_or(0, |f| f.iterations)
}

/// Number of nonzero coefficients (summed over margins for ANOVA fits).
///
/// # Safety
/// `f` must be null or a live fit handle; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_support(f: *const VtfFit) -> usize {
    f.as_ref().map_or(0, |f| f.support)
}

/// Whether every solve met its KKT tolerance.
///
/// # Safety
/// `f` must be null or a live fit handle; null yields false.
#[no_mangle]
pub unsafe extern "C" fn vtf_fit_converged(f: *const VtfFit) -> bool {
    f.as_ref().is_some_and(|f| f.converged)
}
