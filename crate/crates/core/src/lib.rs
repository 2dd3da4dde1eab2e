//! Approximate nearest-neighbor search for polygonal curves under the
//! lp-distance of curves, including dynamic time warping (`p = 1`) and the
//! discrete Frechet distance (`p = inf`).
//!
//! Curves are indexed by expanding them along every traversal signature,
//! projecting the expanded sequences with a Gaussian matrix into an lp space
//! and storing them in per-signature product-metric sub-indices. See
//! [`curve_index`] for the query procedure and [`io`] for the file formats.

pub mod curve_index;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod product;
pub mod traversal;

pub use curve_index::{build, build_with_limits, p_for_dfd, CurveIndex, IndexMeta, Limits, QueryResult};
pub use error::{Error, Result};
pub use geometry::{Backend, Curve, PNorm, Point, SearchParams};
pub use metrics::{curve_distance, dfd, dtw, lp_curve_distance, CurveMetric};
