//! Binary index file.
//!
//! Layout, all little-endian: magic `RLIX`, `u32` version, config, the
//! intersections, the buckets, then a CRC-32 of every preceding byte.
//! Variable-length parts are prefixed with a `u64` count. Search trees are
//! not stored; they are rebuilt deterministically on load.

use super::{assemble, spatial_tree, Bucket, IndexConfig, IndexError, ReferenceIndex};
use crate::features::{BranchDescriptor, Intersection};
use crate::geometry::HomogLine;
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 4] = b"RLIX";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> IndexError {
    IndexError::CorruptFile(msg.into())
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], IndexError> {
        let end = self.pos.checked_add(N).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let out = self.buf[self.pos..end].try_into().expect("length checked");
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, IndexError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    /// A count whose items need at least `item_bytes` each.
    fn len(&mut self, item_bytes: usize) -> Result<usize, IndexError> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(item_bytes as u64) > left {
            return Err(corrupt("count exceeds file size"));
        }
        Ok(n as usize)
    }
}

/// Serialize to bytes.
pub fn write_index(index: &ReferenceIndex) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.f64(index.config.d_max);
    w.f64(index.config.delta_sep);
    w.u64(index.config.tree_min as u64);
    w.len(index.intersections.len());
    for p in &index.intersections {
        w.u32(p.id);
        w.f64(p.center[0]);
        w.f64(p.center[1]);
        w.u8(p.n_b);
        w.len(p.tangents.len());
        for t in &p.tangents {
            for v in t.coeffs().iter() {
                w.f64(*v);
            }
        }
    }
    w.len(index.buckets.len());
    for (key, b) in &index.buckets {
        w.0.extend_from_slice(&key.0);
        w.len(b.records.len());
        for r in &b.records {
            w.u32(r[0]);
            w.u32(r[1]);
        }
        for v in b.cw.iter().chain(&b.ccw) {
            w.f64(*v);
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

/// Parse bytes produced by [`write_index`].
pub fn read_index(bytes: &[u8]) -> Result<ReferenceIndex, IndexError> {
    if bytes.len() < 12 {
        return Err(corrupt("truncated"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let config = IndexConfig {
        d_max: r.f64()?,
        delta_sep: r.f64()?,
        tree_min: r.u64()? as usize,
    };
    let n = r.len(29)?;
    let mut intersections = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.u32()?;
        let center = [r.f64()?, r.f64()?];
        let n_b = r.u8()?;
        let nt = r.len(24)?;
        let mut tangents = Vec::with_capacity(nt);
        for _ in 0..nt {
            let v = [r.f64()?, r.f64()?, r.f64()?];
            tangents.push(HomogLine::from_canonical(v).map_err(|e| corrupt(e.to_string()))?);
        }
        intersections.push(Intersection::new(id, center, tangents, n_b).map_err(|e| corrupt(e.to_string()))?);
    }
    if intersections.len() < 2 {
        return Err(corrupt("fewer than two intersections"));
    }
    let nb = r.len(12)?;
    let mut buckets = BTreeMap::new();
    for _ in 0..nb {
        let key = BranchDescriptor(r.take::<4>()?);
        let mut b = Bucket::new(key);
        let nr = r.len(8)?;
        for _ in 0..nr {
            let rec = [r.u32()?, r.u32()?];
            if rec.iter().any(|&i| i as usize >= intersections.len()) || rec[0] == rec[1] {
                return Err(corrupt("record refers to a missing intersection"));
            }
            b.records.push(rec);
        }
        if nr.saturating_mul(b.dim).saturating_mul(16) > body.len() - r.pos {
            return Err(corrupt("truncated bucket"));
        }
        b.cw = (0..nr * b.dim).map(|_| r.f64()).collect::<Result<_, _>>()?;
        b.ccw = (0..nr * b.dim).map(|_| r.f64()).collect::<Result<_, _>>()?;
        if b.records.is_empty() || buckets.insert(key, b).is_some() {
            return Err(corrupt("empty or repeated bucket"));
        }
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    let spatial = spatial_tree(&intersections);
    Ok(assemble(config, intersections, spatial, buckets))
}

pub fn save_index(index: &ReferenceIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    std::fs::write(path, write_index(index))?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<ReferenceIndex, IndexError> {
    read_index(&std::fs::read(path)?)
}
