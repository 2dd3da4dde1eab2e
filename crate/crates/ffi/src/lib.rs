//! C ABI over the `crvx` curve index.
//!
//! Every fallible function returns a [`CrvxStatus`]; on failure a message is
//! available from [`crvx_last_error`] on the same thread. Indices are opaque
//! [`CrvxIndex`] handles released with [`crvx_index_free`]. Curves cross the
//! boundary as flat row-major `double` arrays of `len * dim` coordinates.
//! Panics never unwind into C; they surface as `CRVX_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use crvx::io::{load_index, save_index};
use crvx::{build, curve_distance, Backend, Curve, CurveIndex, Error, PNorm, Point, SearchParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrvxStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range parameter.
    InvalidArgument = 1,
    /// The curves themselves are unusable (empty, non-finite, mismatched
    /// dimensions, duplicate ids, query too long).
    DataError = 2,
    IoError = 3,
    CorruptIndex = 4,
    VersionMismatch = 5,
    /// A size cap was hit (target dimension, build budget, grid dimension).
    LimitExceeded = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrvxBackend {
    Scan = 0,
    Grid = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrvxMetric {
    /// The metric the index was built for.
    Native = 0,
    Dfd = 1,
    Dtw = 2,
}

/// Build parameters. `p = INFINITY` selects the discrete Frechet distance;
/// `k_override = 0` derives the projection dimension from `p`, `epsilon`
/// and `k_scale`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrvxParams {
    pub p: f64,
    pub epsilon: f64,
    pub repetitions: u32,
    pub backend: CrvxBackend,
    pub seed: u64,
    pub k_override: u32,
    pub k_scale: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrvxQueryResult {
    /// Position of the answer in the indexed dataset.
    pub curve_index: usize,
    /// Exact distance from the query to the answer.
    pub distance: f64,
    pub candidates: usize,
    pub probes: usize,
    /// True when no probe returned a candidate and the answer came from an
    /// exact scan.
    pub fallback: bool,
}

/// Opaque index handle.
pub struct CrvxIndex {
    inner: CurveIndex,
    ids: Vec<CString>,
    positions: HashMap<String, usize>,
}

impl CrvxIndex {
    fn new(inner: CurveIndex) -> Result<Self, Failure> {
        let ids = inner
            .curves()
            .iter()
            .map(|c| CString::new(c.id()).map_err(|_| Failure::arg("curve id contains a NUL byte")))
            .collect::<Result<Vec<_>, _>>()?;
        let positions = inner
            .curves()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id().to_string(), i))
            .collect();
        Ok(CrvxIndex { inner, ids, positions })
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure {
    status: CrvxStatus,
    message: String,
}

impl Failure {
    fn arg(msg: &str) -> Self {
        Failure {
            status: CrvxStatus::InvalidArgument,
            message: msg.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidP(_) | Error::InvalidParameter(_) => CrvxStatus::InvalidArgument,
            Error::Io(_) => CrvxStatus::IoError,
            Error::CorruptIndex(_) => CrvxStatus::CorruptIndex,
            Error::VersionMismatch { .. } => CrvxStatus::VersionMismatch,
            Error::LimitExceeded(_)
            | Error::Overflow { .. }
            | Error::BuildBudgetExceeded { .. }
            | Error::DimensionTooLargeForGrid { .. }
            | Error::TooLargeForBruteForce { .. } => CrvxStatus::LimitExceeded,
            _ => CrvxStatus::DataError,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CrvxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            CrvxStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            CrvxStatus::Internal
        }
    }
}

unsafe fn points(coords: *const f64, len: usize, dim: usize) -> Result<Vec<Point>, Failure> {
    if dim == 0 {
        return Err(Failure::arg("dimension must be positive"));
    }
    if len == 0 {
        return Ok(Vec::new());
    }
    if coords.is_null() {
        return Err(Failure::arg("null coordinate pointer"));
    }
    let total = len.checked_mul(dim).ok_or_else(|| Failure::arg("curve too large"))?;
    let flat: &[f64] = slice::from_raw_parts(coords, total);
    Ok(flat.chunks_exact(dim).map(|c| Point::new(c.to_vec())).collect())
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, Failure> {
    if path.is_null() {
        return Err(Failure::arg("null path"));
    }
    CStr::from_ptr(path).to_str().map_err(|_| Failure::arg("path is not UTF-8"))
}

fn pnorm(p: f64) -> PNorm {
    if p == f64::INFINITY {
        PNorm::Infinity
    } else {
        PNorm::Finite(p)
    }
}

/// Parameters with the library defaults: scan backend, seed 0,
/// `ceil(4 / epsilon)` repetitions and a derived projection dimension.
#[no_mangle]
pub extern "C" fn crvx_params_default(p: f64, epsilon: f64) -> CrvxParams {
    let d = SearchParams::new(pnorm(p), epsilon);
    CrvxParams {
        p,
        epsilon,
        repetitions: d.repetitions as u32,
        backend: CrvxBackend::Scan,
        seed: 0,
        k_override: 0,
        k_scale: d.k_scale,
    }
}

/// Message describing the last failure on this thread; empty after a
/// success. Valid until the next `crvx_*` call on the same thread.
#[no_mangle]
pub extern "C" fn crvx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds an index over `n_curves` curves. Curve `i` has id `ids[i]` and
/// `lengths[i]` points; `coords` holds all points of all curves back to
/// back, `dim` values per point.
///
/// # Safety
/// `ids` and `lengths` must point to `n_curves` readable entries, every id
/// must be a NUL-terminated string, `coords` must hold
/// `sum(lengths) * dim` doubles, `params` must be readable and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_build(
    ids: *const *const c_char,
    lengths: *const usize,
    n_curves: usize,
    dim: usize,
    coords: *const f64,
    params: *const CrvxParams,
    out: *mut *mut CrvxIndex,
) -> CrvxStatus {
    guard(|| {
        if out.is_null() || params.is_null() || (n_curves > 0 && (ids.is_null() || lengths.is_null())) {
            return Err(Failure::arg("null pointer argument"));
        }
        *out = ptr::null_mut();
        let cp = *params;
        let search = SearchParams {
            p: pnorm(cp.p),
            epsilon: cp.epsilon,
            repetitions: cp.repetitions as usize,
            backend: match cp.backend {
                CrvxBackend::Scan => Backend::Scan,
                CrvxBackend::Grid => Backend::Grid,
            },
            seed: cp.seed,
            k_override: (cp.k_override > 0).then_some(cp.k_override as usize),
            k_scale: cp.k_scale,
        };
        search.validate()?;
        let ids = if n_curves == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(ids, n_curves)
        };
        let lengths = if n_curves == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(lengths, n_curves)
        };
        let mut curves = Vec::with_capacity(n_curves);
        let mut offset = 0usize;
        for (&id, &len) in ids.iter().zip(lengths) {
            if id.is_null() {
                return Err(Failure::arg("null curve id"));
            }
            let id = CStr::from_ptr(id)
                .to_str()
                .map_err(|_| Failure::arg("curve id is not UTF-8"))?;
            let start = if len == 0 { coords } else { coords.add(offset * dim) };
            curves.push(Curve::new(id, points(start, len, dim)?)?);
            offset += len;
        }
        let index = CrvxIndex::new(build(curves, search)?)?;
        *out = Box::into_raw(Box::new(index));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_load(path: *const c_char, out: *mut *mut CrvxIndex) -> CrvxStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::arg("null output pointer"));
        }
        *out = ptr::null_mut();
        let index = CrvxIndex::new(load_index(path_arg(path)?)?)?;
        *out = Box::into_raw(Box::new(index));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_save(index: *const CrvxIndex, path: *const c_char) -> CrvxStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| Failure::arg("null index"))?;
        save_index(&index.inner, path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `index` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_free(index: *mut CrvxIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of indexed curves; 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_len(index: *const CrvxIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.curves().len())
}

/// Point dimension of the indexed curves; 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_dim(index: *const CrvxIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.meta().d)
}

/// Longest indexed curve, which is also the longest accepted query.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_max_len(index: *const CrvxIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.meta().m)
}

/// Id of curve `i`, owned by the handle; null when out of range.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_curve_id(index: *const CrvxIndex, i: usize) -> *const c_char {
    index
        .as_ref()
        .and_then(|idx| idx.ids.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Approximate nearest curve to the query of `len` points.
///
/// # Safety
/// `index` must be a live handle, `coords` must hold `len * dim` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crvx_index_query(
    index: *const CrvxIndex,
    coords: *const f64,
    len: usize,
    dim: usize,
    metric: CrvxMetric,
    out: *mut CrvxQueryResult,
) -> CrvxStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| Failure::arg("null index"))?;
        if out.is_null() {
            return Err(Failure::arg("null output pointer"));
        }
        let q = Curve::new("query", points(coords, len, dim)?)?;
        let r = match metric {
            CrvxMetric::Native => index.inner.query(&q),
            CrvxMetric::Dfd => index.inner.query_dfd(&q),
            CrvxMetric::Dtw => index.inner.query_dtw(&q),
        }?;
        *out = CrvxQueryResult {
            curve_index: index.positions[&r.curve_id],
            distance: r.reported_distance,
            candidates: r.candidates_examined,
            probes: r.signatures_probed,
            fallback: r.fallback,
        };
        Ok(())
    })
}

/// Exact lp-distance of two curves; `p = INFINITY` gives the discrete
/// Frechet distance and `p = 1` dynamic time warping.
///
/// # Safety
/// `a` and `b` must hold `len_a * dim` and `len_b * dim` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn crvx_curve_distance(
    a: *const f64,
    len_a: usize,
    b: *const f64,
    len_b: usize,
    dim: usize,
    p: f64,
    out: *mut f64,
) -> CrvxStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::arg("null output pointer"));
        }
        let v = Curve::new("a", points(a, len_a, dim)?)?;
        let u = Curve::new("b", points(b, len_b, dim)?)?;
        *out = curve_distance(&v, &u, pnorm(p).validate()?)?;
        Ok(())
    })
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn crvx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
