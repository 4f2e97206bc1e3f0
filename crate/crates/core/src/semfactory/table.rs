//! Embedding table and its on-disk format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TGEM" | u32 version = 1 | u32 dim | u64 count
//! count x ( u32 id_len | id (utf-8) | dim x f32 )
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"TGEM";
const VERSION: u32 = 1;
const UNIT_TOLERANCE: f64 = 1e-5;

/// Node id to fixed-width vector, in insertion order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<T> {
    dim: usize,
    ids: Vec<String>,
    data: Vec<T>,
    lookup: HashMap<String, usize>,
    normalized: bool,
}

impl<T: Scalar> PartialEq for EmbeddingTable<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.ids == other.ids && self.data == other.data
    }
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            lookup: HashMap::new(),
            normalized: true,
        }
    }

    pub fn push(&mut self, id: &str, v: &[T]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(id.to_string()));
        }
        if self.lookup.contains_key(id) {
            return Err(Error::DuplicateNode(id.to_string()));
        }
        let unit = (norm(v).as_f64() - 1.0).abs() <= UNIT_TOLERANCE;
        self.normalized &= unit;
        self.lookup.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// True when every vector has unit L2 norm within `1e-5`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> &str {
        &self.ids[row]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[T]> {
        self.row_of(id).map(|r| self.row(r))
    }

    pub fn require(&self, id: &str) -> Result<&[T]> {
        self.get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.ids
            .iter()
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|(id, v)| (id.as_str(), v))
    }

    /// Row-major copy of all vectors.
    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// The listed ids, in the given order.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut out = EmbeddingTable::new(self.dim);
        for id in ids {
            out.push(id, self.require(id)?)?;
        }
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingTable<U> {
        EmbeddingTable {
            dim: self.dim,
            ids: self.ids.clone(),
            data: self.data.iter().map(|x| U::of(x.as_f64())).collect(),
            lookup: self.lookup.clone(),
            normalized: self.normalized,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.len() * (8 + 4 * self.dim));
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.as_f32().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "header")?;
        if magic != EMBEDDING_MAGIC {
            return Err(Error::BadMagic {
                expected: "TGEM".into(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let version = r.u32("header")?;
        if version != VERSION {
            return Err(Error::Version {
                expected: VERSION,
                found: version,
            });
        }
        let dim = r.u32("header")? as usize;
        let count = r.u64("header")?;
        let mut table = EmbeddingTable::new(dim);
        let mut v = vec![T::zero(); dim];
        for i in 0..count {
            let what = format!("record {i}");
            let len = r.u32(&what)? as usize;
            let id = std::str::from_utf8(r.take(len, &what)?)
                .map_err(|e| Error::Truncated(format!("{what}: id is not utf-8: {e}")))?
                .to_string();
            let raw = r.take(4 * dim, &what)?;
            for (slot, chunk) in v.iter_mut().zip(raw.chunks_exact(4)) {
                let x = f32::from_le_bytes(chunk.try_into().unwrap());
                if !x.is_finite() {
                    return Err(Error::NonFinite(id));
                }
                *slot = T::of(x as f64);
            }
            table.push(&id, &v)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Truncated(format!(
                "{} trailing bytes after {count} records",
                bytes.len() - r.pos
            )));
        }
        Ok(table)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(what.to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn write_embeddings<T: Scalar>(table: &EmbeddingTable<T>, path: &Path) -> Result<()> {
    fs::write(path, table.to_bytes())?;
    Ok(())
}

pub fn load_embeddings<T: Scalar>(path: &Path) -> Result<EmbeddingTable<T>> {
    EmbeddingTable::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> EmbeddingTable<f32> {
        let mut t = EmbeddingTable::new(4);
        t.push("a", &[1.0, 0.0, 0.0, 0.0]).unwrap();
        t.push("b", &[0.5, -0.25, 3.0, 1e-3]).unwrap();
        t.push("ü", &[-1.0, 2.0, 0.0, 7.5]).unwrap();
        t
    }

    #[test]
    fn write_load_rewrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tgem");
        let t = sample();
        write_embeddings(&t, &p).unwrap();
        let back: EmbeddingTable<f32> = load_embeddings(&p).unwrap();
        assert_eq!(back, t);
        let p2 = dir.path().join("e2.tgem");
        write_embeddings(&back, &p2).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn bad_magic() {
        let mut b = sample().to_bytes();
        b[..4].copy_from_slice(b"XXXX");
        let err = EmbeddingTable::<f32>::from_bytes(&b).unwrap_err();
        assert!(err.to_string().starts_with("bad magic"), "{err}");
    }

    #[test]
    fn version_mismatch() {
        let mut b = sample().to_bytes();
        b[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            EmbeddingTable::<f32>::from_bytes(&b),
            Err(Error::Version { found: 2, .. })
        ));
    }

    #[test]
    fn truncated_record() {
        let b = sample().to_bytes();
        let err = EmbeddingTable::<f32>::from_bytes(&b[..b.len() - 3]).unwrap_err();
        assert!(err.to_string().starts_with("truncated record"), "{err}");
    }

    #[test]
    fn nan_component() {
        let mut b = sample().to_bytes();
        let n = b.len();
        b[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = EmbeddingTable::<f32>::from_bytes(&b).unwrap_err();
        assert_eq!(err.to_string(), "non-finite component in \"ü\"");
    }

    #[test]
    fn dimension_mismatch_on_push() {
        let mut t = EmbeddingTable::<f32>::new(3);
        assert!(matches!(
            t.push("x", &[1.0, 2.0]),
            Err(Error::DimMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 5), 0..20)
        ) {
            let mut t = EmbeddingTable::new(5);
            for (i, r) in rows.iter().enumerate() {
                t.push(&format!("n{i}"), r).unwrap();
            }
            let bytes = t.to_bytes();
            let back = EmbeddingTable::<f32>::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
