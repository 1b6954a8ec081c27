use std::ffi::{c_char, CStr, CString};
use std::ptr;

use vitali_tf_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        vtf_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn tensor(shape: &[usize], data: &[f64]) -> *mut VtfTensor {
    let mut t = ptr::null_mut();
    let s = unsafe { vtf_tensor_new(shape.as_ptr(), shape.len(), data.as_ptr(), data.len(), &mut t) };
    assert_eq!(s, VtfStatus::Ok, "{}", last_error());
    t
}

fn read(t: *const VtfTensor) -> (Vec<usize>, Vec<f64>) {
    unsafe {
        let mut shape = vec![0; vtf_tensor_ndim(t)];
        let mut data = vec![0.0; vtf_tensor_len(t)];
        assert_eq!(vtf_tensor_shape(t, shape.as_mut_ptr(), shape.len()), VtfStatus::Ok);
        assert_eq!(vtf_tensor_data(t, data.as_mut_ptr(), data.len()), VtfStatus::Ok);
        (shape, data)
    }
}

fn step(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect()
}

#[test]
fn tensor_round_trip_and_tv() {
    let data: Vec<f64> = (0..12).map(|i| (i * i) as f64).collect();
    let t = tensor(&[3, 4], &data);
    assert_eq!(read(t), (vec![3, 4], data));
    let mut tv = 0.0;
    unsafe {
        assert_eq!(vtf_vitali_tv(t, 1, &mut tv), VtfStatus::Ok);
        vtf_tensor_free(t);
    }
    assert!(tv > 0.0);
}

#[test]
fn status_codes_and_messages() {
    let mut t = ptr::null_mut();
    let shape = [2usize, 3];
    let data = [0.0; 5];
    let s = unsafe { vtf_tensor_new(shape.as_ptr(), 2, data.as_ptr(), 5, &mut t) };
    assert_eq!(s, VtfStatus::Shape);
    assert!(t.is_null());
    assert!(!last_error().is_empty());
    let s = unsafe { vtf_tensor_new(ptr::null(), 2, data.as_ptr(), 5, &mut t) };
    assert_eq!(s, VtfStatus::NullPointer);
    assert!(last_error().contains("shape"));
    let y = tensor(&[4], &[0.0, 1.0, 2.0, 3.0]);
    let mut small = [0usize; 0];
    assert_eq!(unsafe { vtf_tensor_shape(y, small.as_mut_ptr(), 0) }, VtfStatus::InvalidArgument);
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { vtf_fit_margin(y, 4, 0.1, VtfSolver::ActiveSet, &mut fit) }, VtfStatus::Shape);
    assert!(fit.is_null());
    let missing = CString::new("/nonexistent/dir/x.vtf").unwrap();
    assert_eq!(unsafe { vtf_tensor_load(missing.as_ptr(), &mut t) }, VtfStatus::Io);
    unsafe {
        vtf_tensor_free(y);
        vtf_tensor_free(ptr::null_mut());
        vtf_fit_free(ptr::null_mut());
    }
    assert!(unsafe { vtf_fit_lambda(ptr::null()) }.is_nan());
}

#[test]
fn error_message_truncates_and_reports_length() {
    let mut t = ptr::null_mut();
    unsafe { vtf_tensor_new(ptr::null(), 1, ptr::null(), 0, &mut t) };
    let full = unsafe { vtf_last_error_message(ptr::null_mut(), 0) };
    let mut buf = [1 as c_char; 5];
    let n = unsafe { vtf_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full);
    assert_eq!(buf[4], 0);
}

#[test]
fn margin_fit_limits() {
    let n = 64;
    let y = tensor(&[n], &step(n));
    let mut lmax = 0.0;
    unsafe { assert_eq!(vtf_lambda_max(y, 1, &mut lmax), VtfStatus::Ok) };
    let mut fit = ptr::null_mut();
    unsafe { assert_eq!(vtf_fit_margin(y, 1, 1.01 * lmax, VtfSolver::ActiveSet, &mut fit), VtfStatus::Ok) };
    unsafe {
        assert_eq!(vtf_fit_support(fit), 0);
        assert!(vtf_fit_converged(fit));
        let mut f = ptr::null_mut();
        assert_eq!(vtf_fit_fitted(fit, &mut f), VtfStatus::Ok);
        let (_, v) = read(f);
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-12));
        vtf_tensor_free(f);
        vtf_fit_free(fit);
    }
    for solver in [VtfSolver::ActiveSet, VtfSolver::AcceleratedProximalGradient, VtfSolver::CoordinateDescent] {
        let mut fit = ptr::null_mut();
        unsafe {
            assert_eq!(vtf_fit_margin(y, 1, 0.0, solver, &mut fit), VtfStatus::Ok, "{}", last_error());
            let mut f = ptr::null_mut();
            vtf_fit_fitted(fit, &mut f);
            let (_, v) = read(f);
            let err = v.iter().zip(step(n)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{solver:?}: {err}");
            assert!(vtf_fit_kkt_residual(fit) <= 1e-6);
            vtf_tensor_free(f);
            vtf_fit_free(fit);
        }
    }
    unsafe { vtf_tensor_free(y) };
}

#[test]
fn anova_fit_and_file_round_trip() {
    let n = 16;
    let data: Vec<f64> = (0..n * n).map(|i| if i / n >= n / 2 && i % n >= n / 2 { 1.0 } else { 0.0 }).collect();
    let y = tensor(&[n, n], &data);
    let mut fit = ptr::null_mut();
    unsafe {
        assert_eq!(vtf_fit_anova(y, 1, 0.1, 1.0, VtfSolver::ActiveSet, &mut fit), VtfStatus::Ok, "{}", last_error());
        assert!(vtf_fit_converged(fit));
        assert!(vtf_fit_objective(fit).is_nan());
        let mut f = ptr::null_mut();
        vtf_fit_fitted(fit, &mut f);
        let (_, v) = read(f);
        let mse = v.iter().zip(&data).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (n * n) as f64;
        assert!(mse < 0.05, "{mse}");
        assert_eq!(vtf_fit_anova(y, 1, -1.0, 1.0, VtfSolver::ActiveSet, &mut fit), VtfStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("f.vtf").to_str().unwrap()).unwrap();
        assert_eq!(vtf_tensor_save(f, path.as_ptr()), VtfStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(vtf_tensor_load(path.as_ptr(), &mut g), VtfStatus::Ok);
        assert_eq!(read(g), read(f));
        vtf_tensor_free(g);
        vtf_tensor_free(f);
        vtf_tensor_free(y);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(vtf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    assert!(vtf_universal_lambda(1.0, 100) > 0.0);
}
