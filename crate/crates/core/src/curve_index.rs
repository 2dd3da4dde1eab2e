//! Approximate nearest-neighbor index for curves under the lp-distance.
//!
//! Every traversal of a data curve `V` and a query `Q` is described by a
//! signature `(l, A, B)`; expanding both curves along it turns the traversal
//! cost into an lp-product distance between two sequences of `l` points. The
//! index holds one product-metric sub-index per signature, filled with the
//! expansions of the data curves compatible with it. A query probes every
//! signature compatible with its own length, collects one candidate per
//! probe and re-ranks the candidates by their exact curve distance.
//!
//! `L` repetitions, each with an independent projection shared by all of its
//! sub-indices, amplify the success probability. The discrete Frechet
//! distance is served through a finite `p` large enough that the lp-distance
//! is within `1 + eps` of it.

use std::collections::{BTreeMap, BTreeSet};
use std::time::SystemTime;

use rayon::prelude::*;

use crate::embedding::{choose_k, EmbeddingConfig, EmbeddingMatrix, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::geometry::{validate_dataset, Backend, Curve, PNorm, SearchParams};
use crate::metrics::CurveMetric;
use crate::product::{build_scan, GridIndex, ProductIndex, VectorizedSequence, DEFAULT_GRID_DIM_CAP};
use crate::traversal::{signatures_for, TraversalSignature, DEFAULT_MAX_CURVE_LEN};

/// Cap on the total number of stored vectors over all repetitions.
pub const DEFAULT_BUILD_BUDGET: usize = 20_000_000;

/// `max(1, ln(2m) / ln(1 + eps))`: an exponent at which the lp-distance of
/// curves of length at most `m` is within `1 + eps` of their discrete
/// Frechet distance.
pub fn p_for_dfd(m: usize, epsilon: f64) -> f64 {
    let m = m.max(1) as f64;
    ((2.0 * m).ln() / (1.0 + epsilon).ln()).max(1.0)
}

/// Build-time limits; not persisted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_curve_len: usize,
    pub grid_dim_cap: usize,
    pub build_budget: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_curve_len: DEFAULT_MAX_CURVE_LEN,
            grid_dim_cap: DEFAULT_GRID_DIM_CAP,
            build_budget: DEFAULT_BUILD_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexMeta {
    /// `p` as requested; `Infinity` for the discrete Frechet distance.
    pub requested_p: PNorm,
    /// The finite `p` the sub-indices were built for.
    pub effective_p: f64,
    /// Projection target dimension.
    pub k: usize,
    pub d: usize,
    /// Longest data curve; also the longest query accepted.
    pub m: usize,
    pub n: usize,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub(crate) matrix: EmbeddingMatrix,
    pub(crate) sub_indices: BTreeMap<TraversalSignature, ProductIndex>,
}

impl Repetition {
    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn sub_indices(&self) -> &BTreeMap<TraversalSignature, ProductIndex> {
        &self.sub_indices
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub curve_id: String,
    /// Exact distance from the query to the returned curve.
    pub reported_distance: f64,
    /// Distinct candidates re-ranked.
    pub candidates_examined: usize,
    /// Sub-index probes over all repetitions.
    pub signatures_probed: usize,
    /// True when no probe produced a candidate and the answer came from an
    /// exact scan of the dataset.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct CurveIndex {
    pub(crate) params: SearchParams,
    pub(crate) meta: IndexMeta,
    pub(crate) curves: Vec<Curve>,
    pub(crate) repetitions: Vec<Repetition>,
    pub(crate) built_at: Option<SystemTime>,
}

/// Seed of the projection used by repetition `r`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

pub fn build(dataset: Vec<Curve>, params: SearchParams) -> Result<CurveIndex> {
    build_with_limits(dataset, params, Limits::default())
}

pub fn build_with_limits(dataset: Vec<Curve>, params: SearchParams, limits: Limits) -> Result<CurveIndex> {
    params.validate()?;
    let (d, m) = validate_dataset(&dataset)?;
    if m > limits.max_curve_len {
        return Err(Error::LimitExceeded(format!(
            "curves of length {m} exceed the cap {}",
            limits.max_curve_len
        )));
    }
    if dataset.len() > u32::MAX as usize {
        return Err(Error::LimitExceeded("too many curves".into()));
    }
    let effective_p = match params.p {
        PNorm::Finite(p) => p,
        PNorm::Infinity => p_for_dfd(m, params.epsilon),
    };
    let k = choose_k(
        d,
        &EmbeddingConfig {
            p: effective_p,
            epsilon: params.epsilon,
            k_scale: params.k_scale,
            k_override: params.k_override,
        },
    )?;

    // Data curves grouped by length; signature s holds the curves of length
    // s.first_len(), for every query length up to m.
    let mut by_len: Vec<Vec<u32>> = vec![Vec::new(); m + 1];
    for (i, c) in dataset.iter().enumerate() {
        by_len[c.len()].push(i as u32);
    }
    let signatures: Vec<TraversalSignature> = (1..=m)
        .filter(|&m1| !by_len[m1].is_empty())
        .flat_map(|m1| (1..=m).flat_map(move |m2| signatures_for(m1, m2)))
        .collect();
    let stored: usize = signatures.iter().map(|s| by_len[s.first_len()].len()).sum::<usize>() * params.repetitions;
    if stored > limits.build_budget {
        return Err(Error::BuildBudgetExceeded {
            stored,
            cap: limits.build_budget,
        });
    }
    if params.backend == Backend::Grid {
        let widest = signatures.iter().map(|s| s.len()).max().unwrap_or(1) * k;
        if widest > limits.grid_dim_cap {
            return Err(Error::DimensionTooLargeForGrid {
                dim: widest,
                cap: limits.grid_dim_cap,
            });
        }
    }

    let repetitions = (0..params.repetitions)
        .map(|r| {
            let matrix = EmbeddingMatrix::sample(k, d, repetition_seed(params.seed, r));
            let projected = project_all(&dataset, &matrix)?;
            let sub_indices = signatures
                .par_iter()
                .map(|s| {
                    let positions = s.positions(crate::traversal::Side::First);
                    let vectors: Vec<VectorizedSequence> = by_len[s.first_len()]
                        .iter()
                        .map(|&owner| VectorizedSequence {
                            owner,
                            vec: gather(&projected[owner as usize], &positions, k),
                        })
                        .collect();
                    let index = match params.backend {
                        Backend::Scan => ProductIndex::Scan(build_scan(&vectors, effective_p)?),
                        Backend::Grid => ProductIndex::Grid(GridIndex::build_auto(
                            &vectors,
                            effective_p,
                            params.epsilon,
                            limits.grid_dim_cap,
                        )?),
                    };
                    Ok((*s, index))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(Repetition { matrix, sub_indices })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CurveIndex {
        meta: IndexMeta {
            requested_p: params.p,
            effective_p,
            k,
            d,
            m,
            n: dataset.len(),
            generator: GENERATOR_VERSION.to_string(),
        },
        params,
        curves: dataset,
        repetitions,
        built_at: Some(SystemTime::now()),
    })
}

/// Projected points of every curve, flattened per curve (`k` values per point).
fn project_all(curves: &[Curve], matrix: &EmbeddingMatrix) -> Result<Vec<Vec<f64>>> {
    let k = matrix.k();
    curves
        .par_iter()
        .map(|c| {
            let mut out = vec![0.0; k * c.len()];
            for (p, chunk) in c.points().iter().zip(out.chunks_exact_mut(k)) {
                matrix.project_into(p.coords(), chunk)?;
            }
            Ok(out)
        })
        .collect()
}

fn gather(projected: &[f64], positions: &[usize], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(positions.len() * k);
    for &i in positions {
        out.extend_from_slice(&projected[i * k..(i + 1) * k]);
    }
    out
}

impl CurveIndex {
    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn repetitions(&self) -> &[Repetition] {
        &self.repetitions
    }

    /// Wall-clock build time; `None` for an index loaded from disk.
    pub fn built_at(&self) -> Option<SystemTime> {
        self.built_at
    }

    /// Total vectors stored across all sub-indices and repetitions.
    pub fn stored_vectors(&self) -> usize {
        self.repetitions
            .iter()
            .flat_map(|r| r.sub_indices.values())
            .map(ProductIndex::len)
            .sum()
    }

    /// Query with the metric the index was built for: the lp-distance at the
    /// requested `p`, or the discrete Frechet distance for `p = inf`.
    pub fn query(&self, q: &Curve) -> Result<QueryResult> {
        let metric = CurveMetric::from(self.meta.requested_p);
        self.query_with(q, self.meta.effective_p, metric)
    }

    /// Discrete Frechet query. Scan sub-indices are probed at the recorded
    /// effective `p` of a `p = inf` index, otherwise at
    /// `p_for_dfd(m, eps)`.
    pub fn query_dfd(&self, q: &Curve) -> Result<QueryResult> {
        let probe_p = if self.meta.requested_p.is_infinite() {
            self.meta.effective_p
        } else {
            p_for_dfd(self.meta.m, self.params.epsilon)
        };
        self.query_with(q, probe_p, CurveMetric::Dfd)
    }

    /// Dynamic time warping query; scan sub-indices are probed at `p = 1`.
    pub fn query_dtw(&self, q: &Curve) -> Result<QueryResult> {
        self.query_with(q, 1.0, CurveMetric::Dtw)
    }

    /// Candidate owners (dataset positions) returned by the probes, with
    /// the number of probes made.
    pub fn candidates(&self, q: &Curve, probe_p: f64) -> Result<(BTreeSet<u32>, usize)> {
        if self.curves.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if q.dim() != self.meta.d {
            return Err(Error::DimensionMismatch {
                expected: self.meta.d,
                found: q.dim(),
            });
        }
        if q.len() > self.meta.m {
            return Err(Error::QueryTooLong {
                len: q.len(),
                cap: self.meta.m,
            });
        }
        let query_sigs: Vec<TraversalSignature> = (1..=self.meta.m).flat_map(|m1| signatures_for(m1, q.len())).collect();
        let k = self.meta.k;
        let per_rep = self
            .repetitions
            .par_iter()
            .map(|rep| {
                let projected = project_all(std::slice::from_ref(q), &rep.matrix)?.pop().unwrap();
                let mut found = Vec::new();
                let mut probes = 0;
                for s in &query_sigs {
                    let Some(sub) = rep.sub_indices.get(s) else { continue };
                    probes += 1;
                    let qv = gather(&projected, &s.positions(crate::traversal::Side::Second), k);
                    if let Some(owner) = sub.probe(&qv, probe_p)? {
                        found.push(owner);
                    }
                }
                Ok((found, probes))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut candidates = BTreeSet::new();
        let mut probes = 0;
        for (found, n) in per_rep {
            candidates.extend(found);
            probes += n;
        }
        Ok((candidates, probes))
    }

    fn query_with(&self, q: &Curve, probe_p: f64, metric: CurveMetric) -> Result<QueryResult> {
        let (candidates, signatures_probed) = self.candidates(q, probe_p)?;
        let fallback = candidates.is_empty();
        let pool: Vec<u32> = if fallback {
            (0..self.curves.len() as u32).collect()
        } else {
            candidates.into_iter().collect()
        };
        let mut best: Option<(f64, &Curve)> = None;
        for &i in &pool {
            let c = &self.curves[i as usize];
            let d = metric.distance(q, c)?;
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd || (d == bd && c.id() < bc.id()),
            };
            if better {
                best = Some((d, c));
            }
        }
        let (reported_distance, curve) = best.ok_or(Error::EmptyIndex)?;
        Ok(QueryResult {
            curve_id: curve.id().to_string(),
            reported_distance,
            candidates_examined: pool.len(),
            signatures_probed,
            fallback,
        })
    }
}
