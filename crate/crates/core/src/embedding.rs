//! Seeded Gaussian projection from l2^d into lp^k.
//!
//! For a k x d matrix `G` with i.i.d. standard normal entries and any `v`,
//! `E ||Gv||_p^p = c_p * k * ||v||_2^p` with `c_p = E|X|^p` for `X ~ N(0, 1)`.
//! The projection does not contract distances by more than `1 + eps` with
//! good probability once `k` is large enough; [`choose_k`] picks `k`.
//!
//! Matrices are never stored: they are re-derived from `(k, d, seed)`. The
//! normal stream is ChaCha20 (`rand_chacha`, seeded with `seed_from_u64`)
//! feeding a Box-Muller transform evaluated with `libm`, so the entries are
//! bit-identical across platforms. Changing any of this requires bumping
//! [`GENERATOR_VERSION`].

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::geometry::validate_epsilon;

/// Recorded in persisted indices.
pub const GENERATOR_VERSION: &str = "chacha20-boxmuller-v1";
pub const DEFAULT_K_CAP: usize = 1_000_000;

/// Standard normal variates from a seeded ChaCha20 stream.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        GaussianSource {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in (0, 1], 53 bits.
    pub fn next_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, 1), 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_unit();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}

/// `E|X|^p` for `X ~ N(0, 1)`: `2^(p/2) * Gamma((p + 1) / 2) / sqrt(pi)`.
pub fn moment_constant(p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidP(p));
    }
    let ln = 0.5 * p * std::f64::consts::LN_2 + libm::lgamma(0.5 * (p + 1.0)) - 0.5 * std::f64::consts::PI.ln();
    Ok(ln.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConfig {
    pub p: f64,
    pub epsilon: f64,
    pub k_scale: f64,
    pub k_override: Option<usize>,
}

impl EmbeddingConfig {
    pub fn new(p: f64, epsilon: f64) -> Self {
        EmbeddingConfig {
            p,
            epsilon,
            k_scale: 1.0,
            k_override: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::InvalidP(self.p));
        }
        validate_epsilon(self.epsilon)?;
        if !(self.k_scale.is_finite() && self.k_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("k scale {}", self.k_scale)));
        }
        if self.k_override == Some(0) {
            return Err(Error::InvalidParameter("k override must be positive".into()));
        }
        Ok(())
    }

    /// `delta = p eps / (2 + p eps)`, the relative lower-tail slack.
    pub fn delta(&self) -> f64 {
        let pe = self.p * self.epsilon;
        pe / (2.0 + pe)
    }

    /// The exponent factor `alpha_{p,eps}` of the space bound; includes the
    /// `2^p` factor for `p > 2`. Informational.
    pub fn alpha(&self) -> f64 {
        let pe = self.p * self.epsilon;
        let base = (1.0 / self.epsilon).ln() * (2.0 + pe).powi(2) / (pe * pe);
        if self.p > 2.0 {
            self.p.exp2() * base
        } else {
            base
        }
    }
}

/// Target dimension for projecting `d`-dimensional points.
///
/// `p in [1, 2]`: `d ln(1/eps) / delta^2`. `p > 2`:
/// `d 2^p max(ln(d / (p eps)), 1) / delta^2`. Both scaled by `k_scale` and
/// rounded up.
pub fn choose_k(d: usize, config: &EmbeddingConfig) -> Result<usize> {
    choose_k_capped(d, config, DEFAULT_K_CAP)
}

pub fn choose_k_capped(d: usize, config: &EmbeddingConfig, cap: usize) -> Result<usize> {
    config.validate()?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if let Some(k) = config.k_override {
        return Ok(k);
    }
    let (p, eps) = (config.p, config.epsilon);
    let delta = config.delta();
    let d = d as f64;
    let raw = if p <= 2.0 {
        d * (1.0 / eps).ln() / (delta * delta)
    } else {
        d * p.exp2() * (d / (p * eps)).ln().max(1.0) / (delta * delta)
    };
    let k = (config.k_scale * raw).ceil().max(1.0);
    if !k.is_finite() || k > cap as f64 {
        return Err(Error::Overflow {
            k: if k.is_finite() { k as usize } else { usize::MAX },
            cap,
        });
    }
    Ok(k as usize)
}

/// A k x d matrix of standard normal entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    k: usize,
    d: usize,
    seed: u64,
    entries: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn sample(k: usize, d: usize, seed: u64) -> Self {
        assert!(k > 0 && d > 0, "matrix dimensions must be positive");
        let mut entries = vec![0.0; k * d];
        GaussianSource::new(seed).fill_normal(&mut entries);
        EmbeddingMatrix { k, d, seed, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    /// `G x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        self.project_into(x, &mut out)?;
        Ok(out)
    }

    pub fn project_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        if out.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: out.len(),
            });
        }
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.d)) {
            *o = row.iter().zip(x).map(|(g, v)| g * v).sum();
        }
        Ok(())
    }
}

/// Sample mean and unbiased variance.
#[cfg(test)]
pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson quadrature of `E|X|^p` over [-12, 12].
    fn abs_moment_by_quadrature(p: f64) -> f64 {
        let n = 200_000;
        let (a, b) = (-12.0f64, 12.0f64);
        let h = (b - a) / n as f64;
        let f = |x: f64| x.abs().powf(p) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn moment_constant_examples() {
        assert!((moment_constant(2.0).unwrap() - 1.0).abs() < 1e-14);
        let c1 = (2.0 / std::f64::consts::PI).sqrt();
        assert!((moment_constant(1.0).unwrap() - c1).abs() < 1e-14);
        assert!((moment_constant(1.0).unwrap() - 0.7978845608).abs() < 1e-10);
        assert!((moment_constant(4.0).unwrap() - 3.0).abs() < 1e-13);
        for p in [1.0, 1.5, 3.0, 4.0] {
            let q = abs_moment_by_quadrature(p);
            assert!((moment_constant(p).unwrap() - q).abs() < 1e-8, "p={p} quad={q}");
        }
        assert!(moment_constant(0.5).is_err());
    }

    #[test]
    fn choose_k_examples() {
        // delta = 0.5 / 2.5 = 0.2; 2 ln 2 / 0.04 = 34.657...
        assert_eq!(choose_k(2, &EmbeddingConfig::new(1.0, 0.5)).unwrap(), 35);
        let mut cfg = EmbeddingConfig::new(3.0, 0.5);
        cfg.k_override = Some(16);
        assert_eq!(choose_k(2, &cfg).unwrap(), 16);
        // p = 3, eps = 0.25, d = 4: delta = 0.75 / 2.75, ln(4 / 0.75) > 1
        let k = choose_k(4, &EmbeddingConfig::new(3.0, 0.25)).unwrap();
        let delta: f64 = 0.75 / 2.75;
        let expect = (4.0 * 8.0 * (4.0f64 / 0.75).ln() / (delta * delta)).ceil() as usize;
        assert_eq!(k, expect);
        assert!(choose_k(2, &EmbeddingConfig::new(1.0, 0.9)).is_err());
        assert!(matches!(
            choose_k_capped(2, &EmbeddingConfig::new(1.0, 0.5), 10),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn choose_k_non_increasing_in_eps() {
        for p in [1.0, 1.5, 2.0, 3.0, 6.0] {
            for d in [1, 2, 5, 40] {
                let mut last = usize::MAX;
                for i in 1..=50 {
                    let eps = 0.01 * i as f64;
                    let k = choose_k_capped(d, &EmbeddingConfig::new(p, eps), usize::MAX).unwrap();
                    assert!(k <= last, "p={p} d={d} eps={eps}");
                    last = k;
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = EmbeddingMatrix::sample(7, 3, 42);
        let b = EmbeddingMatrix::sample(7, 3, 42);
        assert_eq!(a.entries(), b.entries());
        assert_ne!(a.entries(), EmbeddingMatrix::sample(7, 3, 43).entries());
        assert!(a.entries().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn entries_look_standard_normal() {
        let m = EmbeddingMatrix::sample(4096, 1, 9);
        let (mean, var) = mean_var(m.entries());
        assert!(mean.abs() < 4.0 / 4096f64.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn projection_is_linear() {
        let m = EmbeddingMatrix::sample(5, 3, 1);
        assert_eq!(m.project(&[0.0; 3]).unwrap(), vec![0.0; 5]);
        let a = [0.3, -1.2, 2.0];
        let b = [1.5, 0.25, -0.75];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = m.project(&ab).unwrap();
        let pa = m.project(&a).unwrap();
        let pb = m.project(&b).unwrap();
        for i in 0..5 {
            assert!((lhs[i] - pa[i] - pb[i]).abs() < 1e-9);
        }
        assert!(matches!(m.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projected_moment_matches_expectation() {
        // mean over 200 fresh 1000 x 3 matrices of ||Gx||_p^p / (c_p k)
        let x = [2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
        for p in [1.0, 2.0, 3.0] {
            let cp = moment_constant(p).unwrap();
            let mut total = 0.0;
            for t in 0..200 {
                let g = EmbeddingMatrix::sample(1000, 3, 1000 + t);
                let y = g.project(&x).unwrap();
                total += y.iter().map(|v| v.abs().powf(p)).sum::<f64>() / (cp * 1000.0);
            }
            let ratio = total / 200.0;
            assert!((ratio - 1.0).abs() < 0.05, "p={p} ratio={ratio}");
        }
    }
}
