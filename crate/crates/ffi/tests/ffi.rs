use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use crvx_ffi::*;

struct Data {
    ids: Vec<CString>,
    lengths: Vec<usize>,
    coords: Vec<f64>,
}

impl Data {
    fn id_ptrs(&self) -> Vec<*const c_char> {
        self.ids.iter().map(|s| s.as_ptr()).collect()
    }
}

// three curves in the plane: a horizontal segment, a vertical one, a point
fn data() -> Data {
    Data {
        ids: ["h", "v", "pt"].iter().map(|s| CString::new(*s).unwrap()).collect(),
        lengths: vec![2, 2, 1],
        coords: vec![0.0, 0.0, 4.0, 0.0, 10.0, 0.0, 10.0, 4.0, -5.0, -5.0],
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(crvx_last_error()) }.to_str().unwrap().to_string()
}

fn build(d: &Data, params: &CrvxParams) -> (CrvxStatus, *mut CrvxIndex) {
    let ids = d.id_ptrs();
    let mut out = ptr::null_mut();
    let status = unsafe {
        crvx_index_build(
            ids.as_ptr(),
            d.lengths.as_ptr(),
            ids.len(),
            2,
            d.coords.as_ptr(),
            params,
            &mut out,
        )
    };
    (status, out)
}

fn id_of(index: *const CrvxIndex, i: usize) -> String {
    unsafe { CStr::from_ptr(crvx_index_curve_id(index, i)) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn build_query_save_load() {
    let d = data();
    let mut params = crvx_params_default(2.0, 0.5);
    params.k_override = 6;
    params.seed = 9;
    let (status, index) = build(&d, &params);
    assert_eq!(status, CrvxStatus::Ok, "{}", last_error());
    assert_eq!(last_error(), "");
    unsafe {
        assert_eq!(crvx_index_len(index), 3);
        assert_eq!(crvx_index_dim(index), 2);
        assert_eq!(crvx_index_max_len(index), 2);
        assert_eq!(id_of(index, 2), "pt");
        assert!(crvx_index_curve_id(index, 3).is_null());

        let q = [10.0, 0.5, 10.0, 3.5];
        let mut r = CrvxQueryResult {
            curve_index: 99,
            distance: -1.0,
            candidates: 0,
            probes: 0,
            fallback: false,
        };
        assert_eq!(
            crvx_index_query(index, q.as_ptr(), 2, 2, CrvxMetric::Native, &mut r),
            CrvxStatus::Ok
        );
        assert_eq!(id_of(index, r.curve_index), "v");
        assert!((r.distance - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(r.probes > 0);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("i.crvx").to_str().unwrap()).unwrap();
        assert_eq!(crvx_index_save(index, path.as_ptr()), CrvxStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(crvx_index_load(path.as_ptr(), &mut loaded), CrvxStatus::Ok);
        let mut r2 = r;
        assert_eq!(
            crvx_index_query(loaded, q.as_ptr(), 2, 2, CrvxMetric::Native, &mut r2),
            CrvxStatus::Ok
        );
        assert_eq!(r2, r);
        for metric in [CrvxMetric::Dfd, CrvxMetric::Dtw] {
            assert_eq!(crvx_index_query(loaded, q.as_ptr(), 2, 2, metric, &mut r2), CrvxStatus::Ok);
            assert_eq!(id_of(loaded, r2.curve_index), "v");
        }
        crvx_index_free(loaded);
        crvx_index_free(index);
        crvx_index_free(ptr::null_mut());
    }
}

#[test]
fn grid_backend_and_dfd() {
    let d = data();
    let mut params = crvx_params_default(f64::INFINITY, 0.5);
    params.backend = CrvxBackend::Grid;
    params.repetitions = 2;
    params.k_override = 2;
    let (status, index) = build(&d, &params);
    assert_eq!(status, CrvxStatus::Ok, "{}", last_error());
    let q = [-5.0, -5.0];
    let mut r = CrvxQueryResult {
        curve_index: 0,
        distance: 1.0,
        candidates: 0,
        probes: 0,
        fallback: true,
    };
    unsafe {
        assert_eq!(
            crvx_index_query(index, q.as_ptr(), 1, 2, CrvxMetric::Native, &mut r),
            CrvxStatus::Ok
        );
        assert_eq!(id_of(index, r.curve_index), "pt");
        assert_eq!(r.distance, 0.0);
        crvx_index_free(index);
    }
}

#[test]
fn error_codes() {
    let d = data();
    let params = crvx_params_default(1.0, 0.5);
    let mut bad = params;
    bad.epsilon = 0.9;
    let (status, index) = build(&d, &bad);
    assert_eq!(status, CrvxStatus::InvalidArgument);
    assert!(index.is_null());
    assert!(!last_error().is_empty());

    bad = params;
    bad.p = 0.5;
    assert_eq!(build(&d, &bad).0, CrvxStatus::InvalidArgument);

    let mut dup = data();
    dup.ids[1] = CString::new("h").unwrap();
    assert_eq!(build(&dup, &params).0, CrvxStatus::DataError);

    let mut nan = data();
    nan.coords[3] = f64::NAN;
    assert_eq!(build(&nan, &params).0, CrvxStatus::DataError);

    let mut empty = data();
    empty.lengths[2] = 0;
    assert_eq!(build(&empty, &params).0, CrvxStatus::DataError);

    let mut out = ptr::null_mut();
    let status = unsafe { crvx_index_build(ptr::null(), ptr::null(), 0, 2, ptr::null(), &params, &mut out) };
    assert_eq!(status, CrvxStatus::DataError);

    let status = unsafe { crvx_index_build(ptr::null(), ptr::null(), 3, 2, d.coords.as_ptr(), &params, &mut out) };
    assert_eq!(status, CrvxStatus::InvalidArgument);

    let (status, index) = build(&d, &params);
    assert_eq!(status, CrvxStatus::Ok);
    let mut r = CrvxQueryResult {
        curve_index: 0,
        distance: 0.0,
        candidates: 0,
        probes: 0,
        fallback: false,
    };
    unsafe {
        let q = [0.0; 6];
        assert_eq!(
            crvx_index_query(index, q.as_ptr(), 3, 2, CrvxMetric::Native, &mut r),
            CrvxStatus::DataError
        );
        assert_eq!(
            crvx_index_query(index, q.as_ptr(), 2, 3, CrvxMetric::Native, &mut r),
            CrvxStatus::DataError
        );
        assert!(last_error().contains("dimension"), "{}", last_error());
        assert_eq!(
            crvx_index_query(ptr::null(), q.as_ptr(), 1, 2, CrvxMetric::Native, &mut r),
            CrvxStatus::InvalidArgument
        );
        assert_eq!(
            crvx_index_query(index, q.as_ptr(), 1, 2, CrvxMetric::Native, ptr::null_mut()),
            CrvxStatus::InvalidArgument
        );
        crvx_index_free(index);

        let dir = tempfile::tempdir().unwrap();
        let missing = CString::new(dir.path().join("missing").to_str().unwrap()).unwrap();
        assert_eq!(crvx_index_load(missing.as_ptr(), &mut out), CrvxStatus::IoError);
        assert!(out.is_null());
        let junk_path = dir.path().join("junk");
        std::fs::write(&junk_path, b"CRVX1 nonsense").unwrap();
        let junk = CString::new(junk_path.to_str().unwrap()).unwrap();
        assert_eq!(crvx_index_load(junk.as_ptr(), &mut out), CrvxStatus::CorruptIndex);
        std::fs::write(&junk_path, b"CRVX9\0\0\0\0").unwrap();
        assert_eq!(crvx_index_load(junk.as_ptr(), &mut out), CrvxStatus::VersionMismatch);
        assert!(last_error().contains("CRVX9"), "{}", last_error());
    }
}

#[test]
fn curve_distance_matches_core() {
    let a = [0.0, 0.0, 1.0, 0.0, 2.0, 0.0];
    let b = [0.0, 1.0, 2.0, 1.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            crvx_curve_distance(a.as_ptr(), 3, b.as_ptr(), 2, 2, f64::INFINITY, &mut out),
            CrvxStatus::Ok
        );
        assert!((out - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            crvx_curve_distance(a.as_ptr(), 3, b.as_ptr(), 2, 2, 1.0, &mut out),
            CrvxStatus::Ok
        );
        assert!((out - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(
            crvx_curve_distance(a.as_ptr(), 3, b.as_ptr(), 2, 2, 0.0, &mut out),
            CrvxStatus::InvalidArgument
        );
        assert_eq!(
            crvx_curve_distance(a.as_ptr(), 0, b.as_ptr(), 2, 2, 1.0, &mut out),
            CrvxStatus::DataError
        );
    }
    let v = unsafe { CStr::from_ptr(crvx_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let lib = target_dir().join("libcrvx_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "crvx.h"

int main(void) {
    const char *ids[] = {"a", "b"};
    uintptr_t lengths[] = {2, 1};
    double coords[] = {0, 0, 1, 0, 5, 5};
    CrvxParams params = crvx_params_default(INFINITY, 0.5);
    params.k_override = 4;
    CrvxIndex *index = NULL;
    if (crvx_index_build(ids, lengths, 2, 2, coords, &params, &index) != CRVX_STATUS_OK) return 1;
    double q[] = {5, 4};
    CrvxQueryResult r;
    if (crvx_index_query(index, q, 1, 2, CRVX_METRIC_NATIVE, &r) != CRVX_STATUS_OK) return 2;
    if (strcmp(crvx_index_curve_id(index, r.curve_index), "b") != 0 || r.distance != 1.0) return 3;
    params.epsilon = 2.0;
    CrvxIndex *bad = NULL;
    if (crvx_index_build(ids, lengths, 2, 2, coords, &params, &bad) != CRVX_STATUS_INVALID_ARGUMENT) return 4;
    if (bad != NULL || strlen(crvx_last_error()) == 0) return 5;
    crvx_index_free(index);
    printf("ok %s\n", crvx_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("ok "));
}
