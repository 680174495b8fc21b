use std::ffi::CStr;
use std::ptr;

use mirror_kde_ffi::*;

fn sample_data(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Deterministic, positively dependent, no ties.
    let x: Vec<f64> = (0..n)
        .map(|i| ((i * 37) % n) as f64 + 0.1 * (i as f64).sin())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &a)| a + 25.0 * ((i * 7919) % 13) as f64)
        .collect();
    (x, y)
}

fn new_sample(n: usize) -> *mut MkdeSample {
    let (x, y) = sample_data(n);
    let mut s = ptr::null_mut();
    let st = unsafe { mkde_sample_new(x.as_ptr(), y.as_ptr(), n, MkdeScaling::OverNPlus1, &mut s) };
    assert_eq!(st, MkdeStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let len = unsafe { mkde_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(len > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn round_trip_matches_core() {
    let n = 120;
    let (x, y) = sample_data(n);
    let s = new_sample(n);
    let mut len = 0;
    assert_eq!(unsafe { mkde_sample_len(s, &mut len) }, MkdeStatus::Ok);
    assert_eq!(len, n);

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    assert_eq!(
        unsafe { mkde_sample_pseudo(s, u.as_mut_ptr(), v.as_mut_ptr(), n) },
        MkdeStatus::Ok
    );
    let pseudo = mirror_kde::ecdf_transform(&x, &y, mirror_kde::Scaling::OverNPlus1).unwrap();
    assert_eq!(u, pseudo.u());
    assert_eq!(v, pseudo.v());

    let mut est = ptr::null_mut();
    assert_eq!(
        unsafe { mkde_estimator_new(s, 0.2, MkdeKernel::Epanechnikov, &mut est) },
        MkdeStatus::Ok
    );
    let core = mirror_kde::MirrorEstimator::new(
        &pseudo,
        mirror_kde::EstimatorConfig::mirror(0.2, mirror_kde::Kernel::Epanechnikov).unwrap(),
    );
    let pu = [0.0, 0.3, 0.5, 1.0, 1.5];
    let pv = [0.0, 0.7, 0.5, 1.0, 0.5];
    let mut out = [f64::NAN; 5];
    assert_eq!(
        unsafe { mkde_estimator_eval(est, pu.as_ptr(), pv.as_ptr(), 5, out.as_mut_ptr()) },
        MkdeStatus::Ok
    );
    for k in 0..5 {
        assert_eq!(out[k], core.eval(pu[k], pv[k]));
    }
    assert_eq!(out[4], 0.0);

    let mut h = 0.0;
    assert_eq!(
        unsafe { mkde_estimator_bandwidth(est, &mut h) },
        MkdeStatus::Ok
    );
    assert_eq!(h, 0.2);

    let m = 11;
    let mut grid = vec![0.0; m * m];
    assert_eq!(
        unsafe { mkde_estimator_grid(est, m, grid.as_mut_ptr(), grid.len()) },
        MkdeStatus::Ok
    );
    assert_eq!(grid, core.grid(m).unwrap().values);

    unsafe {
        mkde_estimator_free(est);
        mkde_sample_free(s);
    }
}

#[test]
fn bandwidth_selection_matches_core() {
    let n = 150;
    let s = new_sample(n);
    let (x, y) = sample_data(n);
    let pseudo = mirror_kde::ecdf_transform(&x, &y, mirror_kde::Scaling::OverNPlus1).unwrap();
    let grid: Vec<f64> = (1..=40).map(|k| 0.01 * k as f64).collect();
    let mut h = 0.0;
    let st = unsafe {
        mkde_select_bandwidth(
            s,
            MkdeMethod::Lscv,
            MkdeKernel::Epanechnikov,
            grid.as_ptr(),
            grid.len(),
            &mut h,
        )
    };
    assert_eq!(st, MkdeStatus::Ok);
    let expect = mirror_kde::bandwidth::minimize_criterion(
        &pseudo,
        mirror_kde::bandwidth::Criterion::lscv(mirror_kde::Kernel::Epanechnikov),
        &grid,
    )
    .unwrap();
    assert_eq!(h, expect.h);

    let st = unsafe {
        mkde_select_bandwidth(
            s,
            MkdeMethod::RuleOfThumb,
            MkdeKernel::Epanechnikov,
            ptr::null(),
            0,
            &mut h,
        )
    };
    assert_eq!(st, MkdeStatus::Ok);
    assert!(h > 0.0 && h <= 0.5);

    for method in [
        MkdeMethod::LscvOriginal,
        MkdeMethod::LscvGamma,
        MkdeMethod::Bcv,
    ] {
        let st = unsafe {
            mkde_select_bandwidth(
                s,
                method,
                MkdeKernel::Epanechnikov,
                grid.as_ptr(),
                grid.len(),
                &mut h,
            )
        };
        assert_eq!(st, MkdeStatus::Ok, "{method:?}");
        assert!(grid.contains(&h));
    }
    unsafe { mkde_sample_free(s) };
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    let mut s = ptr::null_mut();
    let st = unsafe { mkde_sample_new(ptr::null(), ptr::null(), 10, MkdeScaling::OverN, &mut s) };
    assert_eq!(st, MkdeStatus::NullPointer);
    assert!(s.is_null());
    assert!(last_error().contains("null"));

    let x = [1.0, 2.0, f64::NAN];
    let st = unsafe { mkde_sample_new(x.as_ptr(), x.as_ptr(), 3, MkdeScaling::OverN, &mut s) };
    assert_ne!(st, MkdeStatus::Ok);

    let s = new_sample(50);
    let mut est = ptr::null_mut();
    let st = unsafe { mkde_estimator_new(s, -0.1, MkdeKernel::Gaussian, &mut est) };
    assert_eq!(st, MkdeStatus::InvalidArgument);
    assert!(est.is_null());
    assert!(!last_error().is_empty());

    let mut h = 0.0;
    let short = [0.1, 0.2];
    let st = unsafe {
        mkde_select_bandwidth(
            s,
            MkdeMethod::Lscv,
            MkdeKernel::Epanechnikov,
            short.as_ptr(),
            2,
            &mut h,
        )
    };
    assert_eq!(st, MkdeStatus::InvalidArgument);

    let mut u = [0.0; 10];
    let mut v = [0.0; 10];
    let st = unsafe { mkde_sample_pseudo(s, u.as_mut_ptr(), v.as_mut_ptr(), 10) };
    assert_eq!(st, MkdeStatus::BufferTooSmall);

    assert_eq!(
        unsafe { mkde_estimator_new(s, 0.1, MkdeKernel::Uniform, &mut est) },
        MkdeStatus::Ok
    );
    let mut small = [0.0; 3];
    assert_eq!(
        unsafe { mkde_estimator_grid(est, 5, small.as_mut_ptr(), 3) },
        MkdeStatus::BufferTooSmall
    );
    let bad = [f64::INFINITY];
    let st = unsafe { mkde_estimator_eval(est, bad.as_ptr(), bad.as_ptr(), 1, small.as_mut_ptr()) };
    assert_eq!(st, MkdeStatus::NonFinite);

    unsafe {
        mkde_estimator_free(est);
        mkde_sample_free(s);
        mkde_estimator_free(ptr::null_mut());
        mkde_sample_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(mkde_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_exported_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mirror_kde.h"))
            .unwrap();
    for sym in [
        "mkde_version",
        "mkde_last_error",
        "mkde_sample_new",
        "mkde_sample_free",
        "mkde_sample_len",
        "mkde_sample_pseudo",
        "mkde_select_bandwidth",
        "mkde_estimator_new",
        "mkde_estimator_free",
        "mkde_estimator_bandwidth",
        "mkde_estimator_eval",
        "mkde_estimator_grid",
        "typedef struct MkdeSample MkdeSample",
        "MKDE_STATUS_OK = 0",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}
