//! Grid-bucket approximate nearest neighbor in lp^{d'}.
//!
//! For every radius `r` of a geometric ladder `r_min * (1 + eps)^i` the space
//! is cut into cubic cells of side `eps * r / d'^(1/p)`, whose lp diameter is
//! `eps * r`. Each stored vector is registered in every cell that meets its
//! lp ball of radius `r`. A query walks the ladder upwards and answers with
//! the first owner found in its own cell, which lies within `(1 + eps) r` of
//! the query while every vector was farther than `r / (1 + eps)`.
//!
//! Cell keys are the cell coordinates, each zigzag-encoded as an LEB128
//! varint, concatenated in dimension order.

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::{check_len, lp_distance, VectorizedSequence};
use crate::error::{Error, Result};
use crate::geometry::validate_epsilon;

pub const DEFAULT_GRID_DIM_CAP: usize = 14;
/// Pairwise-distance sampling cap used by [`radius_ladder`].
const LADDER_SAMPLE: usize = 256;
const BOUNDARY_SLACK: f64 = 1e-12;

pub type CellTable = FxHashMap<Box<[u8]>, Vec<u32>>;

#[derive(Debug, Clone, PartialEq)]
pub struct GridIndex {
    p: f64,
    epsilon: f64,
    dim: usize,
    len: usize,
    radii: Vec<f64>,
    tables: Vec<CellTable>,
    /// Set when every stored vector is identical (or there is only one):
    /// such an index answers every query with this owner.
    single_owner: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHit {
    pub owner: u32,
    /// Ladder radius at which the query's cell was first non-empty; zero for
    /// a single-answer index.
    pub radius: f64,
}

/// Upper bound on the number of cells that can meet one ball.
pub fn cells_per_ball_bound(dim: usize, p: f64, epsilon: f64) -> f64 {
    let per_axis = 2.0 * ((dim as f64).powf(1.0 / p) / epsilon).ceil() + 2.0;
    per_axis.powi(dim as i32)
}

fn cell_side(r: f64, epsilon: f64, dim: usize, p: f64) -> f64 {
    epsilon * r / (dim as f64).powf(1.0 / p)
}

pub(crate) fn encode_cell(coords: &[i64], out: &mut Vec<u8>) {
    out.clear();
    for &c in coords {
        let mut z = ((c << 1) ^ (c >> 63)) as u64;
        loop {
            let byte = (z & 0x7f) as u8;
            z >>= 7;
            if z == 0 {
                out.push(byte);
                break;
            }
            out.push(byte | 0x80);
        }
    }
}

#[cfg(test)]
pub(crate) fn decode_cell(mut bytes: &[u8]) -> Vec<i64> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let mut z = 0u64;
        let mut shift = 0;
        loop {
            let b = bytes[0];
            bytes = &bytes[1..];
            z |= ((b & 0x7f) as u64) << shift;
            shift += 7;
            if b & 0x80 == 0 {
                break;
            }
        }
        out.push((z >> 1) as i64 ^ -((z & 1) as i64));
    }
    out
}

/// Calls `visit` with the coordinates of every cell of side `side` whose lp
/// distance to `v` is at most `r`.
pub(crate) fn for_each_ball_cell(v: &[f64], r: f64, side: f64, p: f64, visit: &mut dyn FnMut(&[i64])) {
    #[allow(clippy::too_many_arguments)]
    fn rec(v: &[f64], j: usize, used: f64, r: f64, side: f64, p: f64, coords: &mut Vec<i64>, visit: &mut dyn FnMut(&[i64])) {
        if j == v.len() {
            visit(coords);
            return;
        }
        let x = v[j];
        let home = (x / side).floor() as i64;
        let budget = 1.0 + BOUNDARY_SLACK;
        let mut try_cell = |c: i64, gap: f64, coords: &mut Vec<i64>| -> bool {
            let cost = used + (gap / r).powf(p);
            if cost > budget {
                return false;
            }
            coords.push(c);
            rec(v, j + 1, cost, r, side, p, coords, visit);
            coords.pop();
            true
        };
        try_cell(home, 0.0, coords);
        let mut c = home - 1;
        while try_cell(c, (x - (c + 1) as f64 * side).max(0.0), coords) {
            c -= 1;
        }
        let mut c = home + 1;
        while try_cell(c, (c as f64 * side - x).max(0.0), coords) {
            c += 1;
        }
    }
    let mut coords = Vec::with_capacity(v.len());
    rec(v, 0, 0.0, r, side, p, &mut coords, visit);
}

/// `(r_min, r_max)`: half the smallest positive pairwise distance and twice
/// the largest, over the vectors (or an evenly strided sample of 256).
pub fn radius_ladder(vectors: &[VectorizedSequence], p: f64) -> Result<(f64, f64)> {
    if vectors.len() < 2 {
        return Err(Error::InvalidParameter("radius ladder needs at least two vectors".into()));
    }
    let sample: Vec<&VectorizedSequence> = if vectors.len() <= LADDER_SAMPLE {
        vectors.iter().collect()
    } else {
        (0..LADDER_SAMPLE)
            .map(|i| &vectors[i * vectors.len() / LADDER_SAMPLE])
            .collect()
    };
    let mut min_pos = f64::INFINITY;
    let mut max = 0.0f64;
    for (i, a) in sample.iter().enumerate() {
        for b in &sample[i + 1..] {
            check_len(a.vec.len(), b.vec.len())?;
            let d = lp_distance(&a.vec, &b.vec, p);
            if d > 0.0 {
                min_pos = min_pos.min(d);
            }
            max = max.max(d);
        }
    }
    if max == 0.0 {
        return Err(Error::DegenerateDataset);
    }
    Ok((min_pos / 2.0, 2.0 * max))
}

pub fn build_grid(vectors: &[VectorizedSequence], p: f64, epsilon: f64, r_min: f64, r_max: f64) -> Result<GridIndex> {
    GridIndex::build(vectors, p, epsilon, r_min, r_max, DEFAULT_GRID_DIM_CAP)
}

impl GridIndex {
    pub fn build(vectors: &[VectorizedSequence], p: f64, epsilon: f64, r_min: f64, r_max: f64, dim_cap: usize) -> Result<Self> {
        let dim = Self::check_inputs(vectors, p, epsilon, dim_cap)?;
        if !(r_min > 0.0 && r_min <= r_max && r_max.is_finite()) {
            return Err(Error::InvalidRadiusRange { r_min, r_max });
        }
        let mut radii = vec![r_min];
        while *radii.last().unwrap() < r_max * (1.0 - BOUNDARY_SLACK) {
            radii.push(r_min * (1.0 + epsilon).powi(radii.len() as i32));
        }
        let tables = radii
            .par_iter()
            .map(|&r| {
                let side = cell_side(r, epsilon, dim, p);
                let mut table = CellTable::default();
                let mut key = Vec::new();
                for v in vectors {
                    for_each_ball_cell(&v.vec, r, side, p, &mut |cell| {
                        encode_cell(cell, &mut key);
                        match table.get_mut(key.as_slice()) {
                            Some(bucket) => {
                                if bucket.last() != Some(&v.owner) {
                                    bucket.push(v.owner);
                                }
                            }
                            None => {
                                table.insert(key.as_slice().into(), vec![v.owner]);
                            }
                        }
                    });
                }
                table
            })
            .collect();
        Ok(GridIndex {
            p,
            epsilon,
            dim,
            len: vectors.len(),
            radii,
            tables,
            single_owner: None,
        })
    }

    /// Builds over the ladder from [`radius_ladder`]. A single vector, or a
    /// set of identical vectors, yields a single-answer index.
    pub fn build_auto(vectors: &[VectorizedSequence], p: f64, epsilon: f64, dim_cap: usize) -> Result<Self> {
        let dim = Self::check_inputs(vectors, p, epsilon, dim_cap)?;
        let ladder = if vectors.len() < 2 {
            Err(Error::DegenerateDataset)
        } else {
            radius_ladder(vectors, p)
        };
        match ladder {
            Ok((r_min, r_max)) => Self::build(vectors, p, epsilon, r_min, r_max, dim_cap),
            Err(Error::DegenerateDataset) => Ok(GridIndex {
                p,
                epsilon,
                dim,
                len: vectors.len(),
                radii: Vec::new(),
                tables: Vec::new(),
                single_owner: vectors.first().map(|v| v.owner),
            }),
            Err(e) => Err(e),
        }
    }

    fn check_inputs(vectors: &[VectorizedSequence], p: f64, epsilon: f64, dim_cap: usize) -> Result<usize> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidP(p));
        }
        validate_epsilon(epsilon)?;
        let dim = vectors.first().map_or(0, |v| v.vec.len());
        for v in vectors {
            check_len(dim, v.vec.len())?;
        }
        if dim > dim_cap {
            return Err(Error::DimensionTooLargeForGrid { dim, cap: dim_cap });
        }
        Ok(dim)
    }

    pub(crate) fn from_parts(
        p: f64,
        epsilon: f64,
        dim: usize,
        len: usize,
        radii: Vec<f64>,
        tables: Vec<CellTable>,
        single_owner: Option<u32>,
    ) -> Result<Self> {
        check_len(radii.len(), tables.len())?;
        Ok(GridIndex {
            p,
            epsilon,
            dim,
            len,
            radii,
            tables,
            single_owner,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn tables(&self) -> &[CellTable] {
        &self.tables
    }

    pub fn single_owner(&self) -> Option<u32> {
        self.single_owner
    }

    /// Total number of (cell, owner) registrations.
    pub fn bucket_entries(&self) -> usize {
        self.tables.iter().flat_map(|t| t.values()).map(Vec::len).sum()
    }

    pub fn query(&self, q: &[f64]) -> Result<Option<GridHit>> {
        check_len(self.dim, q.len())?;
        if let Some(owner) = self.single_owner {
            return Ok(Some(GridHit { owner, radius: 0.0 }));
        }
        let mut coords = vec![0i64; self.dim];
        let mut key = Vec::new();
        for (&r, table) in self.radii.iter().zip(&self.tables) {
            let side = cell_side(r, self.epsilon, self.dim, self.p);
            for (c, &x) in coords.iter_mut().zip(q) {
                *c = (x / side).floor() as i64;
            }
            encode_cell(&coords, &mut key);
            if let Some(bucket) = table.get(key.as_slice()) {
                return Ok(Some(GridHit {
                    owner: bucket[0],
                    radius: r,
                }));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::GaussianSource;
    use crate::product::build_scan;

    fn vs(vectors: &[&[f64]]) -> Vec<VectorizedSequence> {
        vectors
            .iter()
            .enumerate()
            .map(|(i, v)| VectorizedSequence {
                owner: i as u32,
                vec: v.to_vec(),
            })
            .collect()
    }

    fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<VectorizedSequence> {
        let mut g = GaussianSource::new(seed);
        (0..n)
            .map(|i| VectorizedSequence {
                owner: i as u32,
                vec: (0..dim).map(|_| g.next_unit()).collect(),
            })
            .collect()
    }

    fn box_distance(v: &[f64], cell: &[i64], side: f64, p: f64) -> f64 {
        v.iter()
            .zip(cell)
            .map(|(&x, &c)| {
                let lo = c as f64 * side;
                (lo - x).max(x - (lo + side)).max(0.0).powf(p)
            })
            .sum::<f64>()
            .powf(1.0 / p)
    }

    #[test]
    fn cell_keys_round_trip() {
        let cells = [vec![0, -1, 1, 63, -64, 64, i64::MAX, i64::MIN], vec![], vec![-300]];
        let mut buf = Vec::new();
        for c in cells {
            encode_cell(&c, &mut buf);
            assert_eq!(decode_cell(&buf), c);
        }
        encode_cell(&[1, -1], &mut buf);
        assert_eq!(buf, vec![2, 1]);
    }

    #[test]
    fn ball_cells_cover_exactly_the_ball() {
        // brute force over a window of cells around the vector
        for p in [1.0, 2.0, 3.0] {
            let v = [0.37, -1.21];
            let (r, eps) = (1.0, 0.5);
            let side = cell_side(r, eps, 2, p);
            let mut listed = Vec::new();
            for_each_ball_cell(&v, r, side, p, &mut |c| listed.push(c.to_vec()));
            let mut expected = Vec::new();
            for a in -20..=20i64 {
                for b in -20..=20i64 {
                    if box_distance(&v, &[a, b], side, p) <= r {
                        expected.push(vec![a, b]);
                    }
                }
            }
            listed.sort();
            expected.sort();
            assert_eq!(listed, expected, "p={p}");
            assert!(listed.len() as f64 <= cells_per_ball_bound(2, p, eps));
        }
    }

    #[test]
    fn single_radius_single_vector() {
        let v = vs(&[&[0.2, 0.3]]);
        let g = build_grid(&v, 2.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(g.radii(), &[1.0]);
        assert!(!g.tables()[0].is_empty());
        let side = cell_side(1.0, 0.5, 2, 2.0);
        for_each_ball_cell(&v[0].vec, 1.0, side, 2.0, &mut |c| {
            let mut key = Vec::new();
            encode_cell(c, &mut key);
            assert!(g.tables()[0].contains_key(key.as_slice()));
        });
    }

    #[test]
    fn ladder_ratio_is_one_plus_eps() {
        let v = vs(&[&[0.0], &[1.0]]);
        let g = build_grid(&v, 1.0, 0.25, 0.5, 4.0).unwrap();
        let r = g.radii();
        assert_eq!(r[0], 0.5);
        assert!(*r.last().unwrap() >= 4.0 * (1.0 - 1e-12));
        assert!(r[r.len() - 2] < 4.0);
        for w in r.windows(2) {
            assert!((w[1] / w[0] - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn radius_ladder_rules() {
        assert_eq!(radius_ladder(&vs(&[&[0.0, 0.0], &[2.0, 0.0]]), 2.0).unwrap(), (1.0, 4.0));
        let d = 1.5;
        let colinear = vs(&[&[0.0], &[d], &[2.0 * d]]);
        assert_eq!(radius_ladder(&colinear, 1.0).unwrap(), (d / 2.0, 4.0 * d));
        assert!(matches!(
            radius_ladder(&vs(&[&[1.0], &[1.0]]), 1.0),
            Err(Error::DegenerateDataset)
        ));
    }

    #[test]
    fn degenerate_sets_answer_with_their_owner() {
        let g = GridIndex::build_auto(&vs(&[&[1.0, 1.0], &[1.0, 1.0]]), 1.0, 0.5, 14).unwrap();
        assert_eq!(g.query(&[50.0, -3.0]).unwrap().unwrap().owner, 0);
        let g = GridIndex::build_auto(&vs(&[&[1.0, 1.0]]), 1.0, 0.5, 14).unwrap();
        assert_eq!(g.query(&[0.0, 0.0]).unwrap().unwrap().owner, 0);
    }

    #[test]
    fn errors() {
        let v = random_vectors(3, 15, 1);
        assert!(matches!(
            build_grid(&v, 1.0, 0.5, 1.0, 2.0),
            Err(Error::DimensionTooLargeForGrid { dim: 15, cap: 14 })
        ));
        let v = random_vectors(3, 2, 1);
        assert!(matches!(
            build_grid(&v, 1.0, 0.5, 2.0, 1.0),
            Err(Error::InvalidRadiusRange { .. })
        ));
        assert!(matches!(
            build_grid(&v, 1.0, 0.5, 0.0, 1.0),
            Err(Error::InvalidRadiusRange { .. })
        ));
        let g = build_grid(&v, 1.0, 0.5, 0.1, 1.0).unwrap();
        assert!(matches!(g.query(&[0.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn stored_vector_hits_and_far_query_misses() {
        let v = random_vectors(10, 3, 7);
        let g = GridIndex::build_auto(&v, 2.0, 0.5, 14).unwrap();
        for s in &v {
            let hit = g.query(&s.vec).unwrap().unwrap();
            assert_eq!(hit.radius, g.radii()[0]);
            assert!(lp_distance(&v[hit.owner as usize].vec, &s.vec, 2.0) <= (1.0 + 0.5) * hit.radius);
        }
        let r_max = *g.radii().last().unwrap();
        assert!(g.query(&[10.0 + 3.0 * r_max, 0.0, 0.0]).unwrap().is_none());
    }

    #[test]
    fn agrees_with_scan_within_factor() {
        for (p, eps) in [(1.0, 0.5), (2.0, 0.25), (2.0, 0.5)] {
            let v = random_vectors(20, 4, 21);
            let g = GridIndex::build_auto(&v, p, eps, 14).unwrap();
            let scan = build_scan(&v, p).unwrap();
            let (r_min, r_max) = radius_ladder(&v, p).unwrap();
            for q in random_vectors(30, 4, 22) {
                let (_, exact) = scan.query(&q.vec).unwrap().unwrap();
                match g.query(&q.vec).unwrap() {
                    Some(hit) => {
                        let got = lp_distance(&v[hit.owner as usize].vec, &q.vec, p);
                        if exact >= r_min {
                            assert!(got <= (1.0 + 3.0 * eps) * exact + 1e-12, "p={p} got={got} exact={exact}");
                        }
                    }
                    None => assert!(exact > r_max, "missed with exact={exact}"),
                }
            }
        }
    }
}
