//! Exact lp-distances between curves.
//!
//! The lp-distance of two curves is the minimum, over all traversals, of the
//! lp norm of the vector of paired Euclidean distances. `p = 1` is dynamic
//! time warping and `p = inf` the discrete Frechet distance.
//!
//! The dynamic program for finite `p` accumulates p-th powers relative to the
//! running maximum of each partial path, so large exponents never overflow.

use crate::error::{Error, Result};
use crate::geometry::{euclid_unchecked, PNorm, Point};

/// Brute-force enumeration is refused above this combined length.
pub const BRUTE_FORCE_MAX_TOTAL_LEN: usize = 16;
/// `count_traversals` is refused above this combined length.
pub const COUNT_MAX_TOTAL_LEN: usize = 24;

/// A monotone joint walk over the indices of two curves. Pairs are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Traversal {
    pairs: Vec<(usize, usize)>,
}

impl Traversal {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.first() != Some(&(1, 1)) {
            return Err(Error::InvalidTraversal("must start at (1, 1)".into()));
        }
        for (k, w) in pairs.windows(2).enumerate() {
            let di = w[1].0.checked_sub(w[0].0);
            let dj = w[1].1.checked_sub(w[0].1);
            match (di, dj) {
                (Some(0), Some(1)) | (Some(1), Some(0)) | (Some(1), Some(1)) => {}
                _ => {
                    return Err(Error::InvalidTraversal(format!(
                        "step {} from {:?} to {:?} is not monotone by one",
                        k + 1,
                        w[0],
                        w[1]
                    )))
                }
            }
        }
        Ok(Traversal { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Lengths `(m1, m2)` of the curves this traversal pairs.
    pub fn end(&self) -> (usize, usize) {
        *self.pairs.last().expect("traversal is non-empty")
    }
}

/// Distance selector used by re-ranking and evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMetric {
    Lp(f64),
    Dfd,
    Dtw,
}

impl CurveMetric {
    pub fn distance<V, U>(self, v: &V, u: &U) -> Result<f64>
    where
        V: AsRef<[Point]> + ?Sized,
        U: AsRef<[Point]> + ?Sized,
    {
        match self {
            CurveMetric::Lp(p) => lp_curve_distance(v, u, p),
            CurveMetric::Dfd => dfd(v, u),
            CurveMetric::Dtw => dtw(v, u),
        }
    }
}

impl From<PNorm> for CurveMetric {
    fn from(p: PNorm) -> Self {
        match p {
            PNorm::Finite(p) => CurveMetric::Lp(p),
            PNorm::Infinity => CurveMetric::Dfd,
        }
    }
}

/// A sum of p-th powers stored as `scale^p * rel`, where `scale` is the
/// largest term seen so far.
#[derive(Debug, Clone, Copy)]
struct ScaledPowerSum {
    scale: f64,
    rel: f64,
}

impl ScaledPowerSum {
    const ZERO: Self = ScaledPowerSum { scale: 0.0, rel: 0.0 };

    #[inline]
    fn add(self, a: f64, p: f64) -> Self {
        if a > self.scale {
            let carried = if self.scale > 0.0 {
                self.rel * (self.scale / a).powf(p)
            } else {
                0.0
            };
            ScaledPowerSum {
                scale: a,
                rel: carried + 1.0,
            }
        } else if a > 0.0 {
            ScaledPowerSum {
                scale: self.scale,
                rel: self.rel + (a / self.scale).powf(p),
            }
        } else {
            self
        }
    }

    #[inline]
    fn lt(self, other: Self, p: f64) -> bool {
        if self.scale >= other.scale {
            if other.scale == 0.0 {
                return false;
            }
            self.rel < other.rel * (other.scale / self.scale).powf(p)
        } else {
            if self.scale == 0.0 {
                return true;
            }
            self.rel * (self.scale / other.scale).powf(p) < other.rel
        }
    }

    #[inline]
    fn root(self, p: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale * self.rel.powf(1.0 / p)
        }
    }
}

fn check_dims(v: &[Point], u: &[Point]) -> Result<()> {
    let d = match v.first().or(u.first()) {
        Some(p) => p.dim(),
        None => return Ok(()),
    };
    for p in v.iter().chain(u) {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
    }
    if v.is_empty() || u.is_empty() {
        return Err(Error::InvalidParameter("curves must be non-empty".into()));
    }
    Ok(())
}

fn check_finite_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidP(p))
    }
}

/// lp-distance of two curves for finite `p >= 1`.
pub fn lp_curve_distance<V, U>(v: &V, u: &U, p: f64) -> Result<f64>
where
    V: AsRef<[Point]> + ?Sized,
    U: AsRef<[Point]> + ?Sized,
{
    let (v, u) = (v.as_ref(), u.as_ref());
    check_finite_p(p)?;
    check_dims(v, u)?;
    Ok(lp_dp(v, u, p))
}

fn lp_dp(v: &[Point], u: &[Point], p: f64) -> f64 {
    let m2 = u.len();
    let mut prev: Vec<ScaledPowerSum> = Vec::with_capacity(m2);
    let mut cur: Vec<ScaledPowerSum> = Vec::with_capacity(m2);
    for (i, vi) in v.iter().enumerate() {
        cur.clear();
        for (j, uj) in u.iter().enumerate() {
            let a = euclid_unchecked(vi.coords(), uj.coords());
            let best = match (i, j) {
                (0, 0) => ScaledPowerSum::ZERO,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => {
                    let mut best = prev[j - 1];
                    for c in [prev[j], cur[j - 1]] {
                        if c.lt(best, p) {
                            best = c;
                        }
                    }
                    best
                }
            };
            cur.push(best.add(a, p));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m2 - 1].root(p)
}

/// Dynamic time warping: the l1-distance of curves.
pub fn dtw<V, U>(v: &V, u: &U) -> Result<f64>
where
    V: AsRef<[Point]> + ?Sized,
    U: AsRef<[Point]> + ?Sized,
{
    let (v, u) = (v.as_ref(), u.as_ref());
    check_dims(v, u)?;
    let m2 = u.len();
    let mut prev = vec![0.0f64; m2];
    let mut cur = vec![0.0; m2];
    for (i, vi) in v.iter().enumerate() {
        for (j, uj) in u.iter().enumerate() {
            let a = euclid_unchecked(vi.coords(), uj.coords());
            cur[j] = a + match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(cur[j - 1]),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m2 - 1])
}

/// Discrete Frechet distance: the l-infinity distance of curves.
pub fn dfd<V, U>(v: &V, u: &U) -> Result<f64>
where
    V: AsRef<[Point]> + ?Sized,
    U: AsRef<[Point]> + ?Sized,
{
    let (v, u) = (v.as_ref(), u.as_ref());
    check_dims(v, u)?;
    let m2 = u.len();
    let mut prev = vec![0.0f64; m2];
    let mut cur = vec![0.0f64; m2];
    for (i, vi) in v.iter().enumerate() {
        for (j, uj) in u.iter().enumerate() {
            let a = euclid_unchecked(vi.coords(), uj.coords());
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(cur[j - 1]),
            };
            cur[j] = a.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m2 - 1])
}

/// lp-distance for any `PNorm`; infinity routes to [`dfd`].
pub fn curve_distance<V, U>(v: &V, u: &U, p: PNorm) -> Result<f64>
where
    V: AsRef<[Point]> + ?Sized,
    U: AsRef<[Point]> + ?Sized,
{
    match p.validate()? {
        PNorm::Finite(p) => lp_curve_distance(v, u, p),
        PNorm::Infinity => dfd(v, u),
    }
}

/// Every traversal of curves of lengths `m1` and `m2`, in depth-first order
/// (diagonal step first, then first-curve step, then second-curve step).
pub fn all_traversals(m1: usize, m2: usize) -> Result<Vec<Traversal>> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidParameter("curve lengths must be positive".into()));
    }
    if m1 + m2 > BRUTE_FORCE_MAX_TOTAL_LEN {
        return Err(Error::TooLargeForBruteForce { m1, m2 });
    }
    let mut out = Vec::new();
    let mut path = vec![(1, 1)];
    walk(m1, m2, &mut path, &mut |pairs| out.push(Traversal { pairs: pairs.to_vec() }));
    Ok(out)
}

type Cells = [(usize, usize)];

fn walk(m1: usize, m2: usize, path: &mut Vec<(usize, usize)>, visit: &mut dyn FnMut(&Cells)) {
    let (i, j) = *path.last().unwrap();
    if (i, j) == (m1, m2) {
        visit(path);
        return;
    }
    for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
        if i + di <= m1 && j + dj <= m2 {
            path.push((i + di, j + dj));
            walk(m1, m2, path, visit);
            path.pop();
        }
    }
}

/// Exact lp-distance by exhaustive enumeration of traversals. Test oracle.
pub fn brute_force_lp_distance<V, U>(v: &V, u: &U, p: PNorm) -> Result<f64>
where
    V: AsRef<[Point]> + ?Sized,
    U: AsRef<[Point]> + ?Sized,
{
    let (v, u) = (v.as_ref(), u.as_ref());
    let p = p.validate()?;
    check_dims(v, u)?;
    let (m1, m2) = (v.len(), u.len());
    if m1 + m2 > BRUTE_FORCE_MAX_TOTAL_LEN {
        return Err(Error::TooLargeForBruteForce { m1, m2 });
    }
    let mut best = f64::INFINITY;
    let mut path = vec![(1, 1)];
    walk(m1, m2, &mut path, &mut |pairs| {
        let dists: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| euclid_unchecked(v[i - 1].coords(), u[j - 1].coords()))
            .collect();
        best = best.min(vector_norm(&dists, p));
    });
    Ok(best)
}

/// lp norm of a vector of non-negative values.
fn vector_norm(x: &[f64], p: PNorm) -> f64 {
    let max = x.iter().fold(0.0f64, |a, &b| a.max(b));
    match p {
        PNorm::Infinity => max,
        PNorm::Finite(_) if max == 0.0 => 0.0,
        PNorm::Finite(p) => max * x.iter().map(|&a| (a / max).powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// Number of traversals of curves of lengths `m1` and `m2` (the Delannoy
/// number `D(m1 - 1, m2 - 1)`).
pub fn count_traversals(m1: usize, m2: usize) -> Result<u64> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidParameter("curve lengths must be positive".into()));
    }
    if m1 + m2 > COUNT_MAX_TOTAL_LEN {
        return Err(Error::LimitExceeded(format!(
            "count_traversals({m1}, {m2}) exceeds m1 + m2 <= {COUNT_MAX_TOTAL_LEN}"
        )));
    }
    let mut row = vec![1u64; m2];
    for _ in 1..m1 {
        let mut diag = row[0];
        for j in 1..m2 {
            let up = row[j];
            row[j] = row[j]
                .checked_add(row[j - 1])
                .and_then(|s| s.checked_add(diag))
                .ok_or_else(|| Error::LimitExceeded("traversal count overflow".into()))?;
            diag = up;
        }
    }
    Ok(row[m2 - 1])
}
