//! Traversal signatures.
//!
//! A traversal of curves `V` (first) and `Q` (second) with `l` pairs has
//! `l - 1` steps, numbered `1..l`; step `k` connects pair `k` to pair `k + 1`.
//! The signature `(l, A, B)` records the steps where only the second curve
//! advances (`A`) and where both advance (`B`); every other step advances
//! only the first curve. A signature determines its traversal uniquely, and
//! expanding both curves along it yields two point sequences of length `l`
//! whose lp-product distance is the cost of that traversal.
//!
//! Canonical key: `l:A:B`, each set written as ascending comma-separated
//! decimal step indices, `-` for the empty set. Example: `3:1:2`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::metrics::Traversal;

/// Default cap on curve lengths accepted by signature enumeration.
pub const DEFAULT_MAX_CURVE_LEN: usize = 12;
/// Step sets are stored as 64-bit masks.
const MAX_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraversalSignature {
    len: usize,
    // bit k-1 set <=> step k is in the set
    only_second: u64,
    both: u64,
}

fn mask_of(steps: &[usize], len: usize, name: &str) -> Result<u64> {
    let mut mask = 0u64;
    for &k in steps {
        if k == 0 || k >= len {
            return Err(Error::InvalidSignature(format!("step {k} in {name} outside 1..{len}")));
        }
        mask |= 1 << (k - 1);
    }
    Ok(mask)
}

fn steps_of(mask: u64) -> impl Iterator<Item = usize> {
    (0..MAX_STEPS).filter(move |b| mask >> b & 1 == 1).map(|b| b + 1)
}

impl TraversalSignature {
    pub fn new(len: usize, only_second: &[usize], both: &[usize]) -> Result<Self> {
        if len == 0 || len > MAX_STEPS {
            return Err(Error::InvalidSignature(format!("length {len} outside 1..={MAX_STEPS}")));
        }
        let a = mask_of(only_second, len, "A")?;
        let b = mask_of(both, len, "B")?;
        if a & b != 0 {
            return Err(Error::InvalidSignature("A and B intersect".into()));
        }
        Ok(TraversalSignature {
            len,
            only_second: a,
            both: b,
        })
    }

    /// Number of pairs `l`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Steps where only the second curve advances.
    pub fn only_second(&self) -> Vec<usize> {
        steps_of(self.only_second).collect()
    }

    /// Steps where both curves advance.
    pub fn both(&self) -> Vec<usize> {
        steps_of(self.both).collect()
    }

    /// Length of the first curve this signature pairs: `l - |A|`.
    pub fn first_len(&self) -> usize {
        self.len - self.only_second.count_ones() as usize
    }

    /// Length of the second curve: `|A| + |B| + 1`.
    pub fn second_len(&self) -> usize {
        (self.only_second.count_ones() + self.both.count_ones()) as usize + 1
    }

    pub fn key(&self) -> String {
        self.to_string()
    }

    /// 0-based point index visited at each of the `l` positions.
    pub fn positions(&self, side: Side) -> Vec<usize> {
        let advance = match side {
            Side::First => !self.only_second,
            Side::Second => self.only_second | self.both,
        };
        let mut idx = 0;
        let mut out = Vec::with_capacity(self.len);
        out.push(0);
        for step in 0..self.len - 1 {
            if advance >> step & 1 == 1 {
                idx += 1;
            }
            out.push(idx);
        }
        out
    }

    fn sort_key(&self) -> (usize, Vec<usize>, Vec<usize>) {
        (self.len, self.only_second(), self.both())
    }
}

/// Orders by `l`, then lexicographically by `A`, then by `B`.
impl Ord for TraversalSignature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for TraversalSignature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn write_set(f: &mut fmt::Formatter<'_>, mask: u64) -> fmt::Result {
    if mask == 0 {
        return f.write_str("-");
    }
    for (i, k) in steps_of(mask).enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{k}")?;
    }
    Ok(())
}

impl fmt::Display for TraversalSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.len)?;
        write_set(f, self.only_second)?;
        f.write_str(":")?;
        write_set(f, self.both)
    }
}

impl FromStr for TraversalSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSignature(format!("malformed key `{s}`"));
        let mut parts = s.split(':');
        let (Some(l), Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let parse_set = |set: &str| -> Result<Vec<usize>> {
            if set == "-" {
                return Ok(Vec::new());
            }
            let steps = set
                .split(',')
                .map(|x| x.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            if steps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad());
            }
            Ok(steps)
        };
        let len = l.parse::<usize>().map_err(|_| bad())?;
        let sig = TraversalSignature::new(len, &parse_set(a)?, &parse_set(b)?)?;
        // reject non-canonical spellings such as leading zeros
        if sig.key() != s {
            return Err(bad());
        }
        Ok(sig)
    }
}

pub fn signature_of(t: &Traversal) -> Result<TraversalSignature> {
    let pairs = t.pairs();
    if pairs.is_empty() {
        return Err(Error::InvalidTraversal("empty traversal".into()));
    }
    if pairs.len() > MAX_STEPS {
        return Err(Error::InvalidTraversal(format!(
            "{} pairs exceed the supported {MAX_STEPS}",
            pairs.len()
        )));
    }
    let mut only_second = 0u64;
    let mut both = 0u64;
    for (k, w) in pairs.windows(2).enumerate() {
        match (w[1].0 - w[0].0, w[1].1 - w[0].1) {
            (0, 1) => only_second |= 1 << k,
            (1, 1) => both |= 1 << k,
            (1, 0) => {}
            _ => return Err(Error::InvalidTraversal(format!("bad step {}", k + 1))),
        }
    }
    Ok(TraversalSignature {
        len: pairs.len(),
        only_second,
        both,
    })
}

pub fn traversal_of(s: &TraversalSignature) -> Traversal {
    let pairs = s
        .positions(Side::First)
        .into_iter()
        .zip(s.positions(Side::Second))
        .map(|(i, j)| (i + 1, j + 1))
        .collect();
    Traversal::new(pairs).expect("a valid signature yields a valid traversal")
}

/// All signatures with exact implied lengths `(m1, m2)`, sorted.
pub fn signatures_for(m1: usize, m2: usize) -> Vec<TraversalSignature> {
    let mut out = Vec::new();
    if m1 == 0 || m2 == 0 || m1 + m2 - 1 > MAX_STEPS {
        return out;
    }
    // With l pairs: |A| = l - m1, |B| = m1 + m2 - 1 - l, and the remaining
    // l - m2 steps advance only the first curve.
    for len in m1.max(m2)..=m1 + m2 - 1 {
        let steps = len - 1;
        let a_count = len - m1;
        let b_count = m1 + m2 - 1 - len;
        for_each_mask(steps, a_count, 0, &mut |a| {
            for_each_mask(steps, b_count, a, &mut |b| {
                out.push(TraversalSignature {
                    len,
                    only_second: a,
                    both: b,
                })
            })
        });
    }
    out.sort();
    out
}

/// Calls `f` with every mask over `bits` bits having `count` ones, none of
/// which overlap `taken`.
fn for_each_mask(bits: usize, count: usize, taken: u64, f: &mut dyn FnMut(u64)) {
    fn rec(bit: usize, bits: usize, left: usize, taken: u64, acc: u64, f: &mut dyn FnMut(u64)) {
        if left == 0 {
            f(acc);
            return;
        }
        if bit >= bits || bits - bit < left {
            return;
        }
        if taken >> bit & 1 == 0 {
            rec(bit + 1, bits, left - 1, taken, acc | 1 << bit, f);
        }
        rec(bit + 1, bits, left, taken, acc, f);
    }
    rec(0, bits, count, taken, 0, f)
}

/// Signatures for one side of a search, with the default length cap.
///
/// `Side::First` (data side): first length exactly `m_data`, second length
/// at most `m_query`. `Side::Second` (query side): second length exactly
/// `m_query`, first length at most `m_data`.
pub fn enumerate_signatures(m_data: usize, m_query: usize, side: Side) -> Result<Vec<TraversalSignature>> {
    enumerate_signatures_capped(m_data, m_query, side, DEFAULT_MAX_CURVE_LEN)
}

pub fn enumerate_signatures_capped(m_data: usize, m_query: usize, side: Side, max_len: usize) -> Result<Vec<TraversalSignature>> {
    if m_data == 0 || m_query == 0 {
        return Err(Error::InvalidParameter("curve lengths must be positive".into()));
    }
    if m_data > max_len || m_query > max_len || m_data + m_query - 1 > MAX_STEPS {
        return Err(Error::LimitExceeded(format!(
            "signature enumeration for lengths ({m_data}, {m_query}) exceeds the cap {max_len}"
        )));
    }
    let mut out = Vec::new();
    match side {
        Side::First => (1..=m_query).for_each(|m2| out.extend(signatures_for(m_data, m2))),
        Side::Second => (1..=m_data).for_each(|m1| out.extend(signatures_for(m1, m_query))),
    }
    out.sort();
    Ok(out)
}

pub fn compatible(len: usize, s: &TraversalSignature, side: Side) -> bool {
    match side {
        Side::First => len == s.first_len(),
        Side::Second => len == s.second_len(),
    }
}

/// The padded sequence of `l` points a curve visits along `s`.
pub fn expand<C: AsRef<[Point]> + ?Sized>(c: &C, s: &TraversalSignature, side: Side) -> Result<Vec<Point>> {
    let points = c.as_ref();
    if !compatible(points.len(), s, side) {
        return Err(Error::IncompatibleSignature {
            key: s.key(),
            len: points.len(),
        });
    }
    Ok(s.positions(side).into_iter().map(|i| points[i].clone()).collect())
}
