//! Dataset text files and binary index files.
//!
//! # Dataset format
//!
//! One curve per line: `id d count x_1 ... x_{d*count}`, whitespace
//! separated, coordinates in row order. Blank lines and lines whose first
//! non-blank character is `#` are ignored. Coordinates are written with
//! Rust's shortest round-trip float formatting, so `parse(serialize(x))`
//! reproduces `x` exactly.
//!
//! # Index format
//!
//! All integers and floats little-endian. `str` is a `u32` byte length
//! followed by UTF-8 bytes; `opt<T>` is a `u8` flag (0/1) followed by `T`
//! when set.
//!
//! ```text
//! magic          5 bytes  "CRVX1"
//! generator      str      normal-generator version
//! p              u8 tag (0 finite, 1 infinity) + f64 (0 for infinity)
//! epsilon        f64
//! repetitions    u32
//! backend        u8 (0 scan, 1 grid)
//! seed           u64
//! k_override     opt<u64>
//! k_scale        f64
//! effective_p    f64
//! k, d, m, n     u64 each
//! curves         n x { id: str, len: u32, coords: f64 x (len * d) }
//! repetitions    L x {
//!   seed         u64            projection seed (matrix re-derived)
//!   count        u32
//!   count x {
//!     key        str            signature key "l:A:B"
//!     tag        u8             0 scan, 1 grid
//!     scan:  p f64, dim u64, len u64, owners u32 x len, data f64 x (len * dim)
//!     grid:  p f64, eps f64, dim u64, len u64, single_owner opt<u32>,
//!            radii u32 + f64 x radii, then per radius
//!            { cells u64, cells x { key: u32 len + bytes, owners: u32 + u32 x n } }
//!            with cells sorted by key bytes
//!   }
//! }
//! ```
//!
//! Nothing may follow the last repetition.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::curve_index::{repetition_seed, CurveIndex, IndexMeta, Repetition};
use crate::embedding::{EmbeddingMatrix, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::geometry::{validate_dataset, Backend, Curve, PNorm, Point, SearchParams};
use crate::product::{CellTable, GridIndex, ProductIndex, ScanIndex};
use crate::traversal::TraversalSignature;

pub const INDEX_MAGIC: &[u8; 5] = b"CRVX1";

pub fn parse_dataset_str(text: &str) -> Result<Vec<Curve>> {
    let mut curves = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let mut fields = trimmed.split_whitespace();
        let id = fields.next().expect("line is non-empty");
        let mut int = |name: &str| -> Result<usize> {
            let f = fields.next().ok_or_else(|| err(format!("missing {name}")))?;
            f.parse().map_err(|_| err(format!("invalid {name} `{f}`")))
        };
        let d = int("dimension")?;
        let count = int("point count")?;
        if d == 0 {
            return Err(err("dimension must be positive".into()));
        }
        let coords: Vec<f64> = fields
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .map_err(|_| err(format!("invalid coordinate `{f}` (field {})", j + 4)))
            })
            .collect::<Result<_>>()?;
        if coords.len() != d * count {
            return Err(err(format!(
                "expected {} coordinates for {count} points in dimension {d}, found {}",
                d * count,
                coords.len()
            )));
        }
        let points = coords.chunks_exact(d).map(|c| Point::new(c.to_vec())).collect();
        curves.push(Curve::new(id, points)?);
    }
    validate_dataset(&curves)?;
    Ok(curves)
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<Curve>> {
    parse_dataset_str(&fs::read_to_string(path)?)
}

pub fn serialize_dataset(curves: &[Curve]) -> String {
    let mut s = String::new();
    for c in curves {
        s.push_str(&format!("{} {} {}", c.id(), c.dim(), c.len()));
        for x in c.points().iter().flat_map(|p| p.coords()) {
            s.push(' ');
            s.push_str(&x.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn write_dataset(curves: &[Curve], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serialize_dataset(curves))?;
    Ok(())
}

fn put_str(w: &mut Vec<u8>, s: &str) -> Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn index_to_bytes(index: &CurveIndex) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    let params = index.params();
    let meta = index.meta();
    w.write_all(INDEX_MAGIC)?;
    put_str(&mut w, &meta.generator)?;
    match params.p {
        PNorm::Finite(p) => {
            w.write_u8(0)?;
            w.write_f64::<LE>(p)?;
        }
        PNorm::Infinity => {
            w.write_u8(1)?;
            w.write_f64::<LE>(0.0)?;
        }
    }
    w.write_f64::<LE>(params.epsilon)?;
    w.write_u32::<LE>(params.repetitions as u32)?;
    w.write_u8(match params.backend {
        Backend::Scan => 0,
        Backend::Grid => 1,
    })?;
    w.write_u64::<LE>(params.seed)?;
    match params.k_override {
        Some(k) => {
            w.write_u8(1)?;
            w.write_u64::<LE>(k as u64)?;
        }
        None => w.write_u8(0)?,
    }
    w.write_f64::<LE>(params.k_scale)?;
    w.write_f64::<LE>(meta.effective_p)?;
    for v in [meta.k, meta.d, meta.m, meta.n] {
        w.write_u64::<LE>(v as u64)?;
    }
    for c in index.curves() {
        put_str(&mut w, c.id())?;
        w.write_u32::<LE>(c.len() as u32)?;
        for x in c.points().iter().flat_map(|p| p.coords()) {
            w.write_f64::<LE>(*x)?;
        }
    }
    for rep in index.repetitions() {
        w.write_u64::<LE>(rep.matrix().seed())?;
        w.write_u32::<LE>(rep.sub_indices().len() as u32)?;
        for (sig, sub) in rep.sub_indices() {
            put_str(&mut w, &sig.key())?;
            match sub {
                ProductIndex::Scan(s) => {
                    w.write_u8(0)?;
                    w.write_f64::<LE>(s.p())?;
                    w.write_u64::<LE>(s.dim() as u64)?;
                    w.write_u64::<LE>(s.len() as u64)?;
                    for &o in s.owners() {
                        w.write_u32::<LE>(o)?;
                    }
                    for &x in s.data() {
                        w.write_f64::<LE>(x)?;
                    }
                }
                ProductIndex::Grid(g) => {
                    w.write_u8(1)?;
                    w.write_f64::<LE>(g.p())?;
                    w.write_f64::<LE>(g.epsilon())?;
                    w.write_u64::<LE>(g.dim() as u64)?;
                    w.write_u64::<LE>(g.len() as u64)?;
                    match g.single_owner() {
                        Some(o) => {
                            w.write_u8(1)?;
                            w.write_u32::<LE>(o)?;
                        }
                        None => w.write_u8(0)?,
                    }
                    w.write_u32::<LE>(g.radii().len() as u32)?;
                    for &r in g.radii() {
                        w.write_f64::<LE>(r)?;
                    }
                    for table in g.tables() {
                        let mut cells: Vec<(&Box<[u8]>, &Vec<u32>)> = table.iter().collect();
                        cells.sort_by(|a, b| a.0.cmp(b.0));
                        w.write_u64::<LE>(cells.len() as u64)?;
                        for (key, owners) in cells {
                            w.write_u32::<LE>(key.len() as u32)?;
                            w.write_all(key)?;
                            w.write_u32::<LE>(owners.len() as u32)?;
                            for &o in owners {
                                w.write_u32::<LE>(o)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(w)
}

pub fn save_index(index: &CurveIndex, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, index_to_bytes(index)?)?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<CurveIndex> {
    index_from_bytes(&fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptIndex(msg.into())
}

impl Reader<'_> {
    fn need(&self, n: usize, what: &str) -> Result<()> {
        if self.buf.len() < n {
            Err(corrupt(format!("truncated while reading {what}")))
        } else {
            Ok(())
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        self.buf
            .read_u8()
            .map_err(|_| corrupt(format!("truncated while reading {what}")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.buf
            .read_u32::<LE>()
            .map_err(|_| corrupt(format!("truncated while reading {what}")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.buf
            .read_u64::<LE>()
            .map_err(|_| corrupt(format!("truncated while reading {what}")))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| corrupt(format!("{what} out of range")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        self.buf
            .read_f64::<LE>()
            .map_err(|_| corrupt(format!("truncated while reading {what}")))
    }

    fn bytes(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        self.need(n, what)?;
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let b = self.bytes(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| corrupt(format!("{what} is not UTF-8")))
    }

    fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            t => Err(corrupt(format!("invalid {what} tag {t}"))),
        }
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        self.need(n.saturating_mul(8), what)?;
        (0..n).map(|_| self.f64(what)).collect()
    }

    fn u32s(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        self.need(n.saturating_mul(4), what)?;
        (0..n).map(|_| self.u32(what)).collect()
    }
}

fn check_owners(owners: &[u32], n: usize) -> Result<()> {
    match owners.iter().find(|&&o| o as usize >= n) {
        Some(o) => Err(corrupt(format!("owner {o} out of range"))),
        None => Ok(()),
    }
}

pub fn index_from_bytes(bytes: &[u8]) -> Result<CurveIndex> {
    if bytes.len() >= 5 && bytes.starts_with(b"CRVX") && &bytes[..5] != INDEX_MAGIC {
        return Err(Error::VersionMismatch {
            expected: String::from_utf8_lossy(INDEX_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes[..5]).into_owned(),
        });
    }
    if !bytes.starts_with(INDEX_MAGIC) {
        return Err(corrupt("bad magic bytes"));
    }
    let mut r = Reader { buf: &bytes[5..] };
    let generator = r.string("generator version")?;
    if generator != GENERATOR_VERSION {
        return Err(Error::VersionMismatch {
            expected: GENERATOR_VERSION.to_string(),
            found: generator,
        });
    }
    let p = match r.u8("p tag")? {
        0 => PNorm::Finite(r.f64("p")?),
        1 => {
            r.f64("p")?;
            PNorm::Infinity
        }
        t => return Err(corrupt(format!("invalid p tag {t}"))),
    };
    let epsilon = r.f64("epsilon")?;
    let repetitions = r.u32("repetitions")? as usize;
    let backend = match r.u8("backend")? {
        0 => Backend::Scan,
        1 => Backend::Grid,
        t => return Err(corrupt(format!("invalid backend tag {t}"))),
    };
    let seed = r.u64("seed")?;
    let k_override = if r.flag("k override")? {
        Some(r.usize("k override")?)
    } else {
        None
    };
    let k_scale = r.f64("k scale")?;
    let params = SearchParams {
        p,
        epsilon,
        repetitions,
        backend,
        seed,
        k_override,
        k_scale,
    };
    params.validate().map_err(|e| corrupt(format!("invalid parameters: {e}")))?;
    let effective_p = r.f64("effective p")?;
    let k = r.usize("k")?;
    let d = r.usize("d")?;
    let m = r.usize("m")?;
    let n = r.usize("n")?;
    if k == 0 || d == 0 || !(effective_p.is_finite() && effective_p >= 1.0) {
        return Err(corrupt("invalid metadata"));
    }
    // Every curve takes at least 4 + 4 + 8 bytes.
    r.need(n.saturating_mul(16), "curves")?;
    let mut curves = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.string("curve id")?;
        let len = r.u32("curve length")? as usize;
        let coords = r.f64s(len.saturating_mul(d), "coordinates")?;
        let points = coords.chunks_exact(d).map(|c| Point::new(c.to_vec())).collect();
        curves.push(Curve::new(id, points).map_err(|e| corrupt(e.to_string()))?);
    }
    let (dd, mm) = validate_dataset(&curves).map_err(|e| corrupt(e.to_string()))?;
    if (dd, mm) != (d, m) {
        return Err(corrupt("metadata does not match the stored curves"));
    }

    let mut reps = Vec::with_capacity(repetitions.min(1024));
    for rep in 0..repetitions {
        let rseed = r.u64("repetition seed")?;
        if rseed != repetition_seed(seed, rep) {
            return Err(corrupt(format!("repetition {rep} has an unexpected seed")));
        }
        let count = r.u32("sub-index count")? as usize;
        let mut sub_indices = BTreeMap::new();
        for _ in 0..count {
            let key = r.string("signature key")?;
            let sig: TraversalSignature = key.parse().map_err(|_| corrupt(format!("bad signature key `{key}`")))?;
            let sub = match r.u8("sub-index tag")? {
                0 => {
                    let sp = r.f64("scan p")?;
                    let dim = r.usize("scan dim")?;
                    let len = r.usize("scan len")?;
                    let owners = r.u32s(len, "scan owners")?;
                    check_owners(&owners, n)?;
                    let data = r.f64s(len.saturating_mul(dim), "scan data")?;
                    ProductIndex::Scan(ScanIndex::from_parts(sp, dim, owners, data).map_err(|e| corrupt(e.to_string()))?)
                }
                1 => {
                    let gp = r.f64("grid p")?;
                    let geps = r.f64("grid epsilon")?;
                    let dim = r.usize("grid dim")?;
                    let len = r.usize("grid len")?;
                    let single = if r.flag("single owner")? {
                        Some(r.u32("single owner")?)
                    } else {
                        None
                    };
                    check_owners(single.as_slice(), n)?;
                    let nr = r.u32("radius count")? as usize;
                    let radii = r.f64s(nr, "radii")?;
                    let mut tables = Vec::with_capacity(nr);
                    for _ in 0..nr {
                        let cells = r.usize("cell count")?;
                        r.need(cells.saturating_mul(8), "cells")?;
                        let mut table = CellTable::with_capacity_and_hasher(cells, Default::default());
                        for _ in 0..cells {
                            let kl = r.u32("cell key")? as usize;
                            let key: Box<[u8]> = r.bytes(kl, "cell key")?.into();
                            let on = r.u32("bucket size")? as usize;
                            let owners = r.u32s(on, "bucket")?;
                            check_owners(&owners, n)?;
                            table.insert(key, owners);
                        }
                        tables.push(table);
                    }
                    ProductIndex::Grid(
                        GridIndex::from_parts(gp, geps, dim, len, radii, tables, single).map_err(|e| corrupt(e.to_string()))?,
                    )
                }
                t => return Err(corrupt(format!("invalid sub-index tag {t}"))),
            };
            if sub.dim() != sig.len() * k {
                return Err(corrupt(format!("sub-index {key} has the wrong dimension")));
            }
            sub_indices.insert(sig, sub);
        }
        reps.push(Repetition {
            matrix: EmbeddingMatrix::sample(k, d, rseed),
            sub_indices,
        });
    }
    if !r.buf.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", r.buf.len())));
    }
    Ok(CurveIndex {
        params,
        meta: IndexMeta {
            requested_p: p,
            effective_p,
            k,
            d,
            m,
            n,
            generator,
        },
        curves,
        repetitions: reps,
        built_at: None,
    })
}
