//! Nearest-neighbor search over fixed-length point sequences under the
//! lp-product of l2.
//!
//! Sequences are vectorized by projecting every point with one shared
//! [`EmbeddingMatrix`] and concatenating the results, which turns the
//! lp-product distance into a plain lp distance in `k * l` dimensions. Two
//! backends answer queries in that space: [`ScanIndex`] (exact linear scan)
//! and [`GridIndex`] (radius ladder of grid-bucket tables).

mod grid;
mod scan;

pub use grid::{build_grid, cells_per_ball_bound, radius_ladder, CellTable, GridHit, GridIndex, DEFAULT_GRID_DIM_CAP};
pub use scan::{build_scan, ScanIndex};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// A vectorized point sequence tagged with its owner (an index into the
/// caller's dataset).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedSequence {
    pub owner: u32,
    pub vec: Vec<f64>,
}

/// Concatenation of `G p` over the points; length `k * points.len()`.
pub fn vectorize(points: &[Point], m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let k = m.k();
    let mut out = vec![0.0; k * points.len()];
    for (p, chunk) in points.iter().zip(out.chunks_exact_mut(k)) {
        m.project_into(p.coords(), chunk)?;
    }
    Ok(out)
}

/// lp distance between two equal-length vectors. Terms are scaled by the
/// largest coordinate gap for `p > 2` so large exponents do not overflow.
pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if p == 1.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    }
    if p == 2.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    }
    let max = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if max == 0.0 {
        return 0.0;
    }
    if p <= 2.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>().powf(1.0 / p);
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| ((x - y).abs() / max).powf(p)).sum();
    max * s.powf(1.0 / p)
}

/// A per-signature sub-index.
#[derive(Debug, Clone, PartialEq)]
pub enum ProductIndex {
    Scan(ScanIndex),
    Grid(GridIndex),
}

impl ProductIndex {
    pub fn dim(&self) -> usize {
        match self {
            ProductIndex::Scan(s) => s.dim(),
            ProductIndex::Grid(g) => g.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ProductIndex::Scan(s) => s.len(),
            ProductIndex::Grid(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Owner of an (approximate) nearest stored vector. The scan backend
    /// measures with `scan_p`; the grid backend always uses its own `p`.
    pub fn probe(&self, q: &[f64], scan_p: f64) -> Result<Option<u32>> {
        match self {
            ProductIndex::Scan(s) => Ok(s.query_with_p(q, scan_p)?.map(|(o, _)| o)),
            ProductIndex::Grid(g) => Ok(g.query(q)?.map(|h| h.owner)),
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
