//! TGMD model checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      b"TGMD"
//! version    u32 (= 1)
//! layers     u32
//! heads      u32
//! hidden     u32
//! in_dim     u32
//! seed       u64
//! n_types    u32, then per type: u32 byte length, UTF-8 name
//! n_rels     u32, then per relation: u32 length, name, u32 length,
//!            source type, u32 length, target type, u8 flags
//!            (bit 0 symmetric, bit 1 derived)
//! n_tensors  u32, then per tensor: u32 rows, u32 cols, rows*cols f32
//! ```
//!
//! Tensors follow the declaration order documented on [`HgtParams`].
//! Trailing bytes are rejected.

use std::io::{Cursor, Read};
use std::path::Path;

use super::params::{HgtConfig, HgtParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::{Relation, RelationSchema};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"TGMD";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&(x as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

impl<T: Scalar> HgtParams<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let mut out = Vec::with_capacity(64 + 4 * self.parameter_count());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u32(&mut out, cfg.layers);
        put_u32(&mut out, cfg.heads);
        put_u32(&mut out, cfg.hidden);
        put_u32(&mut out, self.in_dim());
        out.extend_from_slice(&cfg.seed.to_le_bytes());
        let schema = self.schema();
        put_u32(&mut out, schema.node_types().len());
        for t in schema.node_types() {
            put_str(&mut out, t);
        }
        put_u32(&mut out, schema.relations().len());
        for r in schema.relations() {
            put_str(&mut out, &r.name);
            put_str(&mut out, &r.source);
            put_str(&mut out, &r.target);
            out.push(r.symmetric as u8 | (r.derived as u8) << 1);
        }
        put_u32(&mut out, self.tensors().len());
        for t in self.tensors() {
            put_u32(&mut out, t.rows());
            put_u32(&mut out, t.cols());
            for x in t.data() {
                out.extend_from_slice(&x.as_f32().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MODEL_MAGIC {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(MODEL_MAGIC).into(),
                found: String::from_utf8_lossy(&magic).into(),
            });
        }
        let version = get_u32(&mut r, "version")?;
        if version != VERSION {
            return Err(Error::Version {
                expected: VERSION,
                found: version,
            });
        }
        let layers = get_u32(&mut r, "layers")? as usize;
        let heads = get_u32(&mut r, "heads")? as usize;
        let hidden = get_u32(&mut r, "hidden")? as usize;
        let in_dim = get_u32(&mut r, "in_dim")? as usize;
        let mut seed = [0u8; 8];
        read_exact(&mut r, &mut seed, "seed")?;
        let config = HgtConfig {
            layers,
            heads,
            hidden,
            seed: u64::from_le_bytes(seed),
        };
        let n_types = get_u32(&mut r, "type count")?;
        let types = (0..n_types)
            .map(|_| get_str(&mut r, "type name"))
            .collect::<Result<Vec<_>>>()?;
        let n_rels = get_u32(&mut r, "relation count")?;
        let mut rels = Vec::new();
        for _ in 0..n_rels {
            let name = get_str(&mut r, "relation name")?;
            let src = get_str(&mut r, "relation source")?;
            let dst = get_str(&mut r, "relation target")?;
            let mut flags = [0u8];
            read_exact(&mut r, &mut flags, "relation flags")?;
            let mut rel = Relation::new(&src, &name, &dst);
            rel.symmetric = flags[0] & 1 != 0;
            rel.derived = flags[0] & 2 != 0;
            rels.push(rel);
        }
        let schema = RelationSchema::new(types, rels)?;
        let n_tensors = get_u32(&mut r, "tensor count")?;
        let mut tensors = Vec::new();
        for i in 0..n_tensors {
            let rows = get_u32(&mut r, "tensor rows")? as usize;
            let cols = get_u32(&mut r, "tensor cols")? as usize;
            let remaining = bytes.len() - r.position() as usize;
            if rows.saturating_mul(cols).saturating_mul(4) > remaining {
                return Err(Error::Truncated(format!("tensor {i}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 4];
            for _ in 0..rows * cols {
                read_exact(&mut r, &mut buf, "tensor data")?;
                data.push(T::of(f32::from_le_bytes(buf) as f64));
            }
            tensors.push(Tensor::new(rows, cols, data)?);
        }
        if (r.position() as usize) != bytes.len() {
            return Err(Error::Truncated(format!(
                "{} trailing bytes",
                bytes.len() - r.position() as usize
            )));
        }
        HgtParams::from_tensors(config, in_dim, schema, tensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_exact(r: &mut Cursor<&[u8]>, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Truncated(what.to_string()))
}

fn get_u32(r: &mut Cursor<&[u8]>, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn get_str(r: &mut Cursor<&[u8]>, what: &str) -> Result<String> {
    let n = get_u32(r, what)? as usize;
    if n > r.get_ref().len() - r.position() as usize {
        return Err(Error::Truncated(what.to_string()));
    }
    let mut buf = vec![0u8; n];
    read_exact(r, &mut buf, what)?;
    String::from_utf8(buf).map_err(|_| Error::Truncated(format!("{what} is not UTF-8")))
}
