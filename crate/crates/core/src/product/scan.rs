use super::{check_len, lp_distance, VectorizedSequence};
use crate::error::{Error, Result};

/// Exact nearest neighbor by linear scan over the stored vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanIndex {
    p: f64,
    dim: usize,
    owners: Vec<u32>,
    data: Vec<f64>,
}

pub fn build_scan(vectors: &[VectorizedSequence], p: f64) -> Result<ScanIndex> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidP(p));
    }
    let dim = vectors.first().map_or(0, |v| v.vec.len());
    let mut data = Vec::with_capacity(dim * vectors.len());
    let mut owners = Vec::with_capacity(vectors.len());
    for v in vectors {
        check_len(dim, v.vec.len())?;
        data.extend_from_slice(&v.vec);
        owners.push(v.owner);
    }
    Ok(ScanIndex { p, dim, owners, data })
}

impl ScanIndex {
    pub(crate) fn from_parts(p: f64, dim: usize, owners: Vec<u32>, data: Vec<f64>) -> Result<Self> {
        check_len(owners.len() * dim, data.len())?;
        Ok(ScanIndex { p, dim, owners, data })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    pub fn owners(&self) -> &[u32] {
        &self.owners
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Owner and distance of the nearest stored vector; the earliest
    /// stored vector wins ties.
    pub fn query(&self, q: &[f64]) -> Result<Option<(u32, f64)>> {
        self.query_with_p(q, self.p)
    }

    pub fn query_with_p(&self, q: &[f64], p: f64) -> Result<Option<(u32, f64)>> {
        if self.is_empty() {
            return Ok(None);
        }
        check_len(self.dim, q.len())?;
        let mut best: Option<(u32, f64)> = None;
        for (i, &owner) in self.owners.iter().enumerate() {
            let d = lp_distance(self.vector(i), q, p);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((owner, d));
            }
        }
        Ok(best)
    }
}
