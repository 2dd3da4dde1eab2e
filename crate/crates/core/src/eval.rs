//! Synthetic datasets, exact-oracle evaluation and Monte Carlo checks of the
//! projection's concentration behavior.
//!
//! Report format (`EvalReport::render`), one line per record, fields
//! separated by single spaces:
//!
//! ```text
//! # crvx-eval v1
//! query <query_id> <returned_id> <returned_distance> <exact_id> <exact_distance> <factor> <success 0|1> <fallback 0|1> <candidates> <probes>
//! ...
//! summary queries=<n> success_rate=<r> mean_factor=<f> p95_factor=<f> max_factor=<f> fallbacks=<n> stored_vectors=<n> epsilon=<e>
//! ```
//!
//! Wall-clock times are kept in the report structure but never rendered,
//! so the rendered report is reproducible byte for byte.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::curve_index::{build, CurveIndex};
use crate::embedding::{choose_k, moment_constant, EmbeddingConfig, EmbeddingMatrix, GaussianSource};
use crate::error::Result;
use crate::geometry::{Curve, Point, SearchParams};
use crate::metrics::CurveMetric;

/// Slack added to `1 + eps` when counting successes.
pub const SUCCESS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveModel {
    /// Cumulative sums of standard normal steps.
    GaussWalk,
    /// I.i.d. uniform points in `[0, 1]^d`.
    UniformBox,
    /// Clusters of `cluster_size` copies of a Gaussian walk, each copy
    /// perturbed coordinate-wise by `N(0, sigma^2)` noise.
    PerturbedCopies { cluster_size: usize, sigma: f64 },
}

/// Deterministic synthetic curves with ids `c00000, c00001, ...`. Lengths
/// are uniform over `m_range`.
pub fn gen_curves(n: usize, m_range: RangeInclusive<usize>, d: usize, seed: u64, model: CurveModel) -> Vec<Curve> {
    let (lo, hi) = (*m_range.start(), *m_range.end());
    assert!(lo >= 1 && lo <= hi && d >= 1, "invalid generator ranges");
    let mut g = GaussianSource::new(seed);
    let length = |g: &mut GaussianSource| lo + (g.next_u64() % (hi - lo + 1) as u64) as usize;
    let walk = |g: &mut GaussianSource, len: usize| -> Vec<Vec<f64>> {
        let mut pos = vec![0.0; d];
        (0..len)
            .map(|_| {
                pos.iter_mut().for_each(|x| *x += g.next_normal());
                pos.clone()
            })
            .collect()
    };
    let mut out = Vec::with_capacity(n);
    let mut base: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let rows: Vec<Vec<f64>> = match model {
            CurveModel::GaussWalk => {
                let len = length(&mut g);
                walk(&mut g, len)
            }
            CurveModel::UniformBox => {
                let len = length(&mut g);
                (0..len).map(|_| (0..d).map(|_| g.next_unit()).collect()).collect()
            }
            CurveModel::PerturbedCopies { cluster_size, sigma } => {
                if i % cluster_size.max(1) == 0 {
                    let len = length(&mut g);
                    base = walk(&mut g, len);
                }
                base.iter()
                    .map(|row| row.iter().map(|x| x + sigma * g.next_normal()).collect())
                    .collect()
            }
        };
        out.push(Curve::new(format!("c{i:05}"), rows.into_iter().map(Point::new).collect()).expect("generated curve is valid"));
    }
    out
}

/// Re-labels curves as `<prefix>00000, <prefix>00001, ...`.
pub fn with_prefix(curves: Vec<Curve>, prefix: &str) -> Vec<Curve> {
    curves
        .into_iter()
        .enumerate()
        .map(|(i, c)| Curve::new(format!("{prefix}{i:05}"), c.points().to_vec()).expect("valid curve"))
        .collect()
}

/// Exact nearest curve by linear scan; ties go to the smaller id.
pub fn exact_scan_nn(dataset: &[Curve], q: &Curve, metric: CurveMetric) -> Result<Option<(String, f64)>> {
    let mut best: Option<(&str, f64)> = None;
    for c in dataset {
        let d = metric.distance(q, c)?;
        let better = match best {
            None => true,
            Some((id, bd)) => d < bd || (d == bd && c.id() < id),
        };
        if better {
            best = Some((c.id(), d));
        }
    }
    Ok(best.map(|(id, d)| (id.to_string(), d)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub query_id: String,
    pub returned_id: String,
    pub returned_distance: f64,
    pub exact_id: String,
    pub exact_distance: f64,
    pub approx_factor: f64,
    pub success: bool,
    pub fallback: bool,
    pub candidates: usize,
    pub probes: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub queries: usize,
    pub success_rate: f64,
    pub mean_factor: f64,
    pub p95_factor: f64,
    pub max_factor: f64,
    pub fallbacks: usize,
    pub stored_vectors: usize,
    pub epsilon: f64,
    pub build_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<QueryRecord>,
    pub summary: EvalSummary,
}

/// Which query entry point an evaluation drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    /// The metric the index was built for.
    Native,
    Dfd,
    Dtw,
}

fn approx_factor(returned: f64, exact: f64) -> f64 {
    if exact > 0.0 {
        returned / exact
    } else if returned == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Builds an index over `dataset` and evaluates `queries` against the exact
/// oracle.
pub fn run_eval(dataset: &[Curve], queries: &[Curve], params: &SearchParams) -> Result<EvalReport> {
    let start = Instant::now();
    let index = build(dataset.to_vec(), params.clone())?;
    let build_time = start.elapsed();
    let mut report = eval_index(&index, queries, QueryMode::Native)?;
    report.summary.build_time = build_time;
    Ok(report)
}

pub fn eval_index(index: &CurveIndex, queries: &[Curve], mode: QueryMode) -> Result<EvalReport> {
    let metric = match mode {
        QueryMode::Native => CurveMetric::from(index.meta().requested_p),
        QueryMode::Dfd => CurveMetric::Dfd,
        QueryMode::Dtw => CurveMetric::Dtw,
    };
    let records = queries
        .par_iter()
        .map(|q| {
            let t = Instant::now();
            let r = match mode {
                QueryMode::Native => index.query(q),
                QueryMode::Dfd => index.query_dfd(q),
                QueryMode::Dtw => index.query_dtw(q),
            }?;
            let wall_time = t.elapsed();
            let (exact_id, exact_distance) = exact_scan_nn(index.curves(), q, metric)?.expect("index is non-empty");
            // recompute rather than trust the index
            let returned = index
                .curves()
                .iter()
                .find(|c| c.id() == r.curve_id)
                .expect("returned id is a dataset member");
            let returned_distance = metric.distance(q, returned)?;
            let factor = approx_factor(returned_distance, exact_distance);
            Ok(QueryRecord {
                query_id: q.id().to_string(),
                returned_id: r.curve_id,
                returned_distance,
                exact_id,
                exact_distance,
                approx_factor: factor,
                success: factor <= 1.0 + index.params().epsilon + SUCCESS_SLACK,
                fallback: r.fallback,
                candidates: r.candidates_examined,
                probes: r.signatures_probed,
                wall_time,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records, index.params().epsilon, index.stored_vectors());
    Ok(EvalReport { records, summary })
}

fn summarize(records: &[QueryRecord], epsilon: f64, stored_vectors: usize) -> EvalSummary {
    let n = records.len();
    let mut factors: Vec<f64> = records.iter().map(|r| r.approx_factor).collect();
    factors.sort_by(f64::total_cmp);
    let p95 = if n == 0 {
        f64::NAN
    } else {
        factors[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1]
    };
    EvalSummary {
        queries: n,
        success_rate: records.iter().filter(|r| r.success).count() as f64 / n.max(1) as f64,
        mean_factor: factors.iter().sum::<f64>() / n.max(1) as f64,
        p95_factor: p95,
        max_factor: factors.last().copied().unwrap_or(f64::NAN),
        fallbacks: records.iter().filter(|r| r.fallback).count(),
        stored_vectors,
        epsilon,
        build_time: Duration::ZERO,
    }
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut s = String::from("# crvx-eval v1\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "query {} {} {} {} {} {} {} {} {} {}",
                r.query_id,
                r.returned_id,
                r.returned_distance,
                r.exact_id,
                r.exact_distance,
                r.approx_factor,
                r.success as u8,
                r.fallback as u8,
                r.candidates,
                r.probes
            );
        }
        let m = &self.summary;
        let _ = writeln!(
            s,
            "summary queries={} success_rate={} mean_factor={} p95_factor={} max_factor={} fallbacks={} stored_vectors={} epsilon={}",
            m.queries, m.success_rate, m.mean_factor, m.p95_factor, m.max_factor, m.fallbacks, m.stored_vectors, m.epsilon
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationConfig {
    /// Trials for the mean-ratio checks; each draws a fresh `k x d` matrix.
    pub trials: usize,
    /// Rows per trial in the mean-ratio checks.
    pub mean_rows: usize,
    pub p_list: Vec<f64>,
    /// Trials for the tail-frequency checks.
    pub tail_trials: usize,
    pub k_list: Vec<usize>,
    pub ks_samples: usize,
    pub sweep_vectors: usize,
    pub seed: u64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            trials: 10_000,
            mean_rows: 100,
            p_list: vec![1.0, 2.0, 3.0, 4.0],
            tail_trials: 1_000_000,
            k_list: vec![25, 50, 100],
            ks_samples: 10_000,
            sweep_vectors: 10_000,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub requirement: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub checks: Vec<Check>,
    /// `(k, lower-tail frequency at p = 2, upper-tail frequency at p = 1)`.
    pub tails: Vec<(usize, f64, f64)>,
    /// `(p, mean of ||Gv||_p^p / (c_p k))`.
    pub mean_ratios: Vec<(f64, f64)>,
    pub ks_statistic: f64,
    /// `(p, eps, k, contraction frequency)`.
    pub sweeps: Vec<(f64, f64, usize, f64)>,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {} value={} require={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.requirement
            );
        }
        s
    }
}

const LOWER_TAIL_DELTA: f64 = 0.3;
const CHUNKS: u64 = 64;

fn random_unit(g: &mut GaussianSource, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| g.next_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn chunked<T: Send>(trials: usize, seed: u64, f: impl Fn(&mut GaussianSource, usize) -> T + Sync) -> Vec<T> {
    (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let lo = trials * c as usize / CHUNKS as usize;
            let hi = trials * (c as usize + 1) / CHUNKS as usize;
            let mut g = GaussianSource::new(seed ^ (c.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
            f(&mut g, hi - lo)
        })
        .collect()
}

/// Mean over `trials` fresh `rows x d` matrices of `||Gv||_p^p / (c_p rows)`.
fn mean_ratio(p: f64, trials: usize, rows: usize, d: usize, seed: u64) -> f64 {
    let cp = moment_constant(p).expect("valid p");
    let sums = chunked(trials, seed, |g, n| {
        let mut total = 0.0;
        let mut row = vec![0.0; d];
        for _ in 0..n {
            let v = random_unit(g, d);
            let mut s = 0.0;
            for _ in 0..rows {
                g.fill_normal(&mut row);
                let y: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                s += y.abs().powf(p);
            }
            total += s / (cp * rows as f64);
        }
        total
    });
    sums.iter().sum::<f64>() / trials as f64
}

/// Frequencies of `||Gv||_2^2 <= (1 - delta) k` and `||Gv||_1 >= 3 c_1 k`
/// for a unit `v`. By 2-stability `Gv` is a vector of `k` independent
/// standard normals, which is what each trial draws.
fn tail_frequencies(k: usize, trials: usize, seed: u64) -> (f64, f64) {
    let c1 = moment_constant(1.0).expect("valid p");
    let counts = chunked(trials, seed, |g, n| {
        let (mut lower, mut upper) = (0u64, 0u64);
        for _ in 0..n {
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..k {
                let x = g.next_normal();
                s1 += x.abs();
                s2 += x * x;
            }
            lower += (s2 <= (1.0 - LOWER_TAIL_DELTA) * k as f64) as u64;
            upper += (s1 >= 3.0 * c1 * k as f64) as u64;
        }
        (lower, upper)
    });
    let (l, u) = counts.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    (l as f64 / trials as f64, u as f64 / trials as f64)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov statistic of one coordinate of `Gv` (unit `v`,
/// `d = 5`) against the standard normal.
fn ks_statistic(samples: usize, seed: u64) -> f64 {
    let mut g = GaussianSource::new(seed);
    let v = random_unit(&mut g, 5);
    let mut xs: Vec<f64> = (0..samples)
        .map(|_| {
            let m = EmbeddingMatrix::sample(1, 5, g.next_u64());
            m.project(&v).expect("dimension matches")[0]
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Frequency, over random unit `v` in `R^5`, of
/// `||Gv||_p < (c_p k)^(1/p) / (1 + eps)` for one `G` with `k = choose_k`.
fn contraction_sweep(p: f64, eps: f64, vectors: usize, seed: u64) -> (usize, f64) {
    let d = 5;
    let k = choose_k(d, &EmbeddingConfig::new(p, eps)).expect("valid config");
    let g = EmbeddingMatrix::sample(k, d, seed);
    let threshold = (moment_constant(p).expect("valid p") * k as f64).powf(1.0 / p) / (1.0 + eps);
    let hits = chunked(vectors, seed.wrapping_add(1), |src, n| {
        let mut hits = 0usize;
        for _ in 0..n {
            let v = random_unit(src, d);
            let y = g.project(&v).expect("dimension matches");
            let norm = y.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            hits += (norm < threshold) as usize;
        }
        hits
    });
    (k, hits.iter().sum::<usize>() as f64 / vectors as f64)
}

pub fn run_concentration_suite(cfg: &ConcentrationConfig) -> ConcentrationReport {
    let mut checks = Vec::new();

    let mean_ratios: Vec<(f64, f64)> = cfg
        .p_list
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            (
                p,
                mean_ratio(p, cfg.trials, cfg.mean_rows, 3, cfg.seed.wrapping_add(100 + i as u64)),
            )
        })
        .collect();
    for &(p, ratio) in &mean_ratios {
        checks.push(Check {
            name: format!("mean_ratio_p{p}"),
            value: format!("{ratio:.5}"),
            requirement: "|ratio - 1| <= 0.02".into(),
            passed: (ratio - 1.0).abs() <= 0.02,
        });
    }

    let tails: Vec<(usize, f64, f64)> = cfg
        .k_list
        .iter()
        .map(|&k| {
            let (lo, up) = tail_frequencies(k, cfg.tail_trials, cfg.seed.wrapping_add(200 + k as u64));
            (k, lo, up)
        })
        .collect();
    let lower: Vec<f64> = tails.iter().map(|t| t.1).collect();
    let upper: Vec<f64> = tails.iter().map(|t| t.2).collect();
    checks.push(Check {
        name: "lower_tail_p2_decreasing".into(),
        value: format!("{lower:?}"),
        requirement: "strictly decreasing in k".into(),
        passed: lower.windows(2).all(|w| w[1] < w[0]),
    });
    let last = tails.last().copied();
    if let Some((k, lo, up)) = last {
        checks.push(Check {
            name: format!("lower_tail_p2_k{k}"),
            value: format!("{lo}"),
            requirement: "< 0.01".into(),
            passed: lo < 0.01,
        });
        checks.push(Check {
            name: format!("upper_tail_p1_k{k}"),
            value: format!("{up}"),
            requirement: "< 0.01".into(),
            passed: up < 0.01,
        });
    }
    checks.push(Check {
        name: "upper_tail_p1_non_increasing".into(),
        value: format!("{upper:?}"),
        requirement: "non-increasing in k".into(),
        passed: upper.windows(2).all(|w| w[1] <= w[0]),
    });

    let ks = ks_statistic(cfg.ks_samples, cfg.seed.wrapping_add(300));
    checks.push(Check {
        name: "two_stability_ks".into(),
        value: format!("{ks:.5}"),
        requirement: "< 0.02".into(),
        passed: ks < 0.02,
    });

    let sweeps: Vec<(f64, f64, usize, f64)> = [(1.0, 0.25), (2.0, 0.25), (4.0, 0.5)]
        .iter()
        .enumerate()
        .map(|(i, &(p, eps))| {
            let (k, freq) = contraction_sweep(p, eps, cfg.sweep_vectors, cfg.seed.wrapping_add(400 + i as u64));
            (p, eps, k, freq)
        })
        .collect();
    for &(p, eps, k, freq) in &sweeps {
        checks.push(Check {
            name: format!("no_contraction_p{p}_eps{eps}_k{k}"),
            value: format!("{freq}"),
            requirement: "< 0.05".into(),
            passed: freq < 0.05,
        });
    }

    ConcentrationReport {
        checks,
        tails,
        mean_ratios,
        ks_statistic: ks,
        sweeps,
    }
}
