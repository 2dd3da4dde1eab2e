//! Points, curves and search parameters.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A point in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point(coords)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(coords: [f64; N]) -> Self {
        Point(coords.to_vec())
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn euclid(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(euclid_unchecked(a.coords(), b.coords()))
}

#[inline]
pub(crate) fn euclid_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A polygonal curve: an identifier and a non-empty sequence of points of
/// one common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    id: String,
    points: Vec<Point>,
}

impl Curve {
    pub fn new(id: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        let id = id.into();
        let first = points.first().ok_or_else(|| Error::EmptyCurve(id.clone()))?;
        let dim = first.dim();
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFiniteCoordinate(id));
            }
        }
        Ok(Curve { id, points })
    }

    /// Builds a curve from rows of coordinates.
    pub fn from_rows<R: AsRef<[f64]>>(id: impl Into<String>, rows: &[R]) -> Result<Self> {
        Curve::new(id, rows.iter().map(|r| Point::new(r.as_ref().to_vec())).collect())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed curve; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

impl AsRef<[Point]> for Curve {
    fn as_ref(&self) -> &[Point] {
        &self.points
    }
}

/// Checks the dataset-wide invariants and returns `(d, m)`: the common
/// dimension and the maximum curve length.
pub fn validate_dataset(curves: &[Curve]) -> Result<(usize, usize)> {
    let first = curves.first().ok_or(Error::EmptyDataset)?;
    let d = first.dim();
    let mut m = 0;
    let mut seen = HashSet::with_capacity(curves.len());
    for c in curves {
        // Curves built through `Curve::new` already satisfy these, but the
        // fields may have been produced by other means (e.g. deserialization).
        if c.points.is_empty() {
            return Err(Error::EmptyCurve(c.id.clone()));
        }
        for p in &c.points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFiniteCoordinate(c.id.clone()));
            }
        }
        if !seen.insert(c.id.as_str()) {
            return Err(Error::DuplicateId(c.id.clone()));
        }
        m = m.max(c.len());
    }
    Ok((d, m))
}

/// The exponent of an lp-distance: a finite `p >= 1` or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub fn validate(self) -> Result<Self> {
        match self {
            PNorm::Finite(p) if !(p.is_finite() && p >= 1.0) => Err(Error::InvalidP(p)),
            other => Ok(other),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PNorm::Infinity)
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "dfd" => Ok(PNorm::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse p from `{s}`")))?;
                if p.is_infinite() && p > 0.0 {
                    return Ok(PNorm::Infinity);
                }
                PNorm::Finite(p).validate()
            }
        }
    }
}

/// Sub-index backend for the product-metric search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Radius ladder of grid-bucket tables. Exponential in the vector
    /// dimension; only usable with a tiny target dimension.
    Grid,
    /// Exact linear scan over projected vectors.
    Scan,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Grid => "grid",
            Backend::Scan => "scan",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grid" => Ok(Backend::Grid),
            "scan" => Ok(Backend::Scan),
            _ => Err(Error::InvalidParameter(format!("unknown backend `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub p: PNorm,
    pub epsilon: f64,
    /// Number of independent copies (each with its own projection).
    pub repetitions: usize,
    pub backend: Backend,
    pub seed: u64,
    pub k_override: Option<usize>,
    pub k_scale: f64,
}

impl SearchParams {
    /// Defaults to `ceil(4 / epsilon)` repetitions on the scan backend.
    pub fn new(p: PNorm, epsilon: f64) -> Self {
        let repetitions = if epsilon > 0.0 && epsilon.is_finite() {
            (4.0 / epsilon).ceil() as usize
        } else {
            1
        };
        SearchParams {
            p,
            epsilon,
            repetitions,
            backend: Backend::Scan,
            seed: 0,
            k_override: None,
            k_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.p.validate()?;
        validate_epsilon(self.epsilon)?;
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be positive".into()));
        }
        if self.k_override == Some(0) {
            return Err(Error::InvalidParameter("k override must be positive".into()));
        }
        if !(self.k_scale.is_finite() && self.k_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "k scale must be a positive real, got {}",
                self.k_scale
            )));
        }
        Ok(())
    }
}

pub(crate) fn validate_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2], got {epsilon}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(id: &str, rows: &[&[f64]]) -> Curve {
        Curve::from_rows(id, rows).unwrap()
    }

    #[test]
    fn dataset_dimension_and_max_length() {
        let a = curve("a", &[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let b = curve("b", &[&[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(validate_dataset(&[a, b]).unwrap(), (2, 3));
    }

    #[test]
    fn dataset_rejects_mixed_dimensions() {
        let a = curve("a", &[&[0.0, 0.0]]);
        let b = curve("b", &[&[0.0, 0.0, 0.0]]);
        assert!(matches!(
            validate_dataset(&[a, b]),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn dataset_rejects_empty_and_duplicates() {
        assert!(matches!(validate_dataset(&[]), Err(Error::EmptyDataset)));
        let a = curve("a", &[&[0.0]]);
        assert!(matches!(
            validate_dataset(&[a.clone(), a]),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
    }

    #[test]
    fn curve_rejects_bad_points() {
        assert!(matches!(Curve::new("e", vec![]), Err(Error::EmptyCurve(_))));
        assert!(matches!(
            Curve::from_rows("n", &[[0.0, f64::NAN]]),
            Err(Error::NonFiniteCoordinate(_))
        ));
        assert!(matches!(
            Curve::new("m", vec![Point::from([0.0]), Point::from([0.0, 1.0])]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn euclid_examples() {
        assert_eq!(euclid(&[0.0, 0.0].into(), &[3.0, 4.0].into()).unwrap(), 5.0);
        assert_eq!(euclid(&[1.0, 1.0].into(), &[1.0, 1.0].into()).unwrap(), 0.0);
        assert_eq!(euclid(&[0.0].into(), &[2.0].into()).unwrap(), 2.0);
        assert!(euclid(&[0.0].into(), &[2.0, 1.0].into()).is_err());
    }

    #[test]
    fn parse_p_and_backend() {
        assert_eq!("inf".parse::<PNorm>().unwrap(), PNorm::Infinity);
        assert_eq!("1.5".parse::<PNorm>().unwrap(), PNorm::Finite(1.5));
        assert!("0.5".parse::<PNorm>().is_err());
        assert!("nan".parse::<PNorm>().is_err());
        assert_eq!("GRID".parse::<Backend>().unwrap(), Backend::Grid);
        assert!("tree".parse::<Backend>().is_err());
    }

    #[test]
    fn params_epsilon_range() {
        let mut params = SearchParams::new(PNorm::Finite(1.0), 0.5);
        assert_eq!(params.repetitions, 8);
        assert!(params.validate().is_ok());
        params.epsilon = 0.9;
        assert!(params.validate().is_err());
        params.epsilon = 0.0;
        assert!(params.validate().is_err());
    }

    fn point3() -> impl Strategy<Value = Point> {
        prop::collection::vec(-100.0..100.0f64, 3).prop_map(Point::new)
    }

    proptest! {
        #[test]
        fn euclid_is_a_metric(a in point3(), b in point3(), c in point3()) {
            let ab = euclid(&a, &b).unwrap();
            let ba = euclid(&b, &a).unwrap();
            let ac = euclid(&a, &c).unwrap();
            let cb = euclid(&c, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(euclid(&a, &a).unwrap(), 0.0);
            prop_assert!(ab <= ac + cb + 1e-9);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }
    }
}
