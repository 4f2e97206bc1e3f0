//! Hierarchical navigable small-world graph over a unit-normalized table,
//! scored by inner product (cosine).
//!
//! Persisted layout (`TGIX`), all integers little-endian:
//!
//! ```text
//! "TGIX" | u32 version = 1
//! u32 m | u32 ef_construction | u32 ef_search | f64 level_lambda | u64 seed
//! u8 diverse_links
//! u64 node_count | u32 entry (u32::MAX when empty) | u32 max_level
//! node_count x ( u32 level | (level + 1) x ( u32 len | len x u32 row ) )
//! ```
//!
//! Rows refer to the backing embedding table, which is stored separately.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::semfactory::EmbeddingTable;

pub const INDEX_MAGIC: &[u8; 4] = b"TGIX";
const VERSION: u32 = 1;
const NO_ENTRY: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnswParams {
    /// Maximum links per node on layers above 0; layer 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub level_lambda: f64,
    pub seed: u64,
    /// Diversity-pruned link selection instead of plain nearest-`m`.
    pub diverse_links: bool,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self::with_m(40)
    }
}

impl HnswParams {
    pub fn with_m(m: usize) -> Self {
        HnswParams {
            m,
            ef_construction: 200,
            ef_search: 64,
            level_lambda: 1.0 / (m as f64).ln(),
            seed: 0,
            diverse_links: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config("hnsw m must be at least 2".into()));
        }
        if self.ef_construction < self.m {
            return Err(Error::Config("ef_construction must be at least m".into()));
        }
        if !(self.level_lambda > 0.0 && self.level_lambda.is_finite()) {
            return Err(Error::Config("level_lambda must be positive".into()));
        }
        Ok(())
    }

    fn capacity(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

/// Search candidate. `Ord` puts the better candidate last: higher
/// similarity, then lower id rank.
#[derive(Clone, Copy, Debug)]
struct Cand<T> {
    sim: T,
    rank: u32,
    row: u32,
}

impl<T: Scalar> PartialEq for Cand<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Cand<T> {}
impl<T: Scalar> PartialOrd for Cand<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Cand<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .partial_cmp(&other.sim)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

#[derive(Debug, Clone)]
pub struct HnswIndex<T> {
    params: HnswParams,
    table: EmbeddingTable<T>,
    /// Position of each row's id in ascending id order.
    id_rank: Vec<u32>,
    /// `links[row][layer]`.
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
    inserted: usize,
    rng: ChaCha8Rng,
    frozen: bool,
}

impl<T: Scalar> PartialEq for HnswIndex<T> {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.table == other.table
            && self.links == other.links
            && self.entry == other.entry
            && self.max_level == other.max_level
            && self.frozen == other.frozen
    }
}

fn id_ranks<T: Scalar>(table: &EmbeddingTable<T>) -> Vec<u32> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table.id(a).cmp(table.id(b)));
    let mut rank = vec![0u32; table.len()];
    for (r, row) in order.into_iter().enumerate() {
        rank[row] = r as u32;
    }
    rank
}

impl<T: Scalar> HnswIndex<T> {
    /// An empty, unfrozen index over `table`. Rows are linked by
    /// [`insert_next`](Self::insert_next) in table order.
    pub fn new(table: EmbeddingTable<T>, params: HnswParams) -> Result<Self> {
        params.validate()?;
        if !table.is_normalized() {
            return Err(Error::Config("hnsw requires a unit-normalized table".into()));
        }
        let n = table.len();
        Ok(HnswIndex {
            params,
            id_rank: id_ranks(&table),
            table,
            links: vec![Vec::new(); n],
            entry: None,
            max_level: 0,
            inserted: 0,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            frozen: false,
        })
    }

    /// Inserts every row and freezes the index.
    pub fn build(table: EmbeddingTable<T>, params: HnswParams) -> Result<Self> {
        let mut idx = Self::new(table, params)?;
        while idx.insert_next()? {}
        idx.freeze();
        Ok(idx)
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn table(&self) -> &EmbeddingTable<T> {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Stops further insertion; search is only served after this.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Neighbour lists of `row`, one per layer it lives on.
    pub fn links(&self, row: usize) -> &[Vec<u32>] {
        &self.links[row]
    }

    fn cand(&self, q: &[T], row: u32) -> Cand<T> {
        Cand {
            sim: dot(self.table.row(row as usize), q),
            rank: self.id_rank[row as usize],
            row,
        }
    }

    fn draw_level(&mut self) -> usize {
        // 1 - U lies in (0, 1], so ln is finite.
        let u: f64 = 1.0 - self.rng.random::<f64>();
        (-u.ln() * self.params.level_lambda).floor() as usize
    }

    /// Beam search on one layer. Returns up to `ef` candidates, best first.
    fn search_layer(&self, q: &[T], entry: &[Cand<T>], ef: usize, layer: usize) -> Vec<Cand<T>> {
        let mut visited = vec![false; self.table.len()];
        let mut frontier: BinaryHeap<Cand<T>> = BinaryHeap::new();
        let mut best: BinaryHeap<std::cmp::Reverse<Cand<T>>> = BinaryHeap::new();
        for &c in entry {
            if !visited[c.row as usize] {
                visited[c.row as usize] = true;
                frontier.push(c);
                best.push(std::cmp::Reverse(c));
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(c) = frontier.pop() {
            let worst = best.peek().expect("nonempty").0;
            if c < worst && best.len() >= ef {
                break;
            }
            for &nb in self.links[c.row as usize].get(layer).into_iter().flatten() {
                if visited[nb as usize] {
                    continue;
                }
                visited[nb as usize] = true;
                let nc = self.cand(q, nb);
                if best.len() < ef || nc > best.peek().expect("nonempty").0 {
                    frontier.push(nc);
                    best.push(std::cmp::Reverse(nc));
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        let mut out: Vec<Cand<T>> = best.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    /// Links the next row of the table. Returns `false` once all rows are in.
    pub fn insert_next(&mut self) -> Result<bool> {
        if self.frozen {
            return Err(Error::Config("cannot insert into a frozen index".into()));
        }
        if self.inserted == self.table.len() {
            return Ok(false);
        }
        let row = self.inserted as u32;
        self.inserted += 1;
        let level = self.draw_level();
        self.links[row as usize] = vec![Vec::new(); level + 1];

        let Some(entry) = self.entry else {
            self.entry = Some(row);
            self.max_level = level;
            return Ok(true);
        };

        let q: Vec<T> = self.table.row(row as usize).to_vec();
        let mut eps = vec![self.cand(&q, entry)];
        for layer in (level + 1..=self.max_level).rev() {
            eps = self.search_layer(&q, &eps, 1, layer);
        }
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&q, &eps, self.params.ef_construction, layer);
            let chosen = self.select(&found, self.params.m);
            for &nb in &chosen {
                self.link(nb, row, layer);
            }
            self.links[row as usize][layer] = chosen;
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(row);
        }
        Ok(true)
    }

    /// Adds `to` to `from`'s list on `layer`, keeping the nearest when over
    /// capacity.
    fn link(&mut self, from: u32, to: u32, layer: usize) {
        let cap = self.params.capacity(layer);
        let list = &self.links[from as usize][layer];
        if list.len() < cap {
            self.links[from as usize][layer].push(to);
            return;
        }
        let base: Vec<T> = self.table.row(from as usize).to_vec();
        let mut cands: Vec<Cand<T>> = list
            .iter()
            .chain(std::iter::once(&to))
            .map(|&r| self.cand(&base, r))
            .collect();
        cands.sort_by(|a, b| b.cmp(a));
        self.links[from as usize][layer] = self.select(&cands, cap);
    }

    /// Picks at most `m` links from `cands` (best first). A candidate is
    /// kept only if it is more similar to the base node than to every link
    /// already kept.
    fn select(&self, cands: &[Cand<T>], m: usize) -> Vec<u32> {
        if !self.params.diverse_links {
            return cands.iter().take(m).map(|c| c.row).collect();
        }
        let mut kept: Vec<Cand<T>> = Vec::with_capacity(m);
        for c in cands {
            if kept.len() == m {
                break;
            }
            let v = self.table.row(c.row as usize);
            if kept
                .iter()
                .all(|k| dot(self.table.row(k.row as usize), v) < c.sim)
            {
                kept.push(*c);
            }
        }
        kept.into_iter().map(|c| c.row).collect()
    }

    /// Approximate top-`k` as `(row, similarity)`, best first.
    pub fn search_rows(&self, query: &[T], k: usize, ef: usize) -> Result<Vec<(usize, T)>> {
        if !self.frozen {
            return Err(Error::NotFrozen);
        }
        if ef < k {
            return Err(Error::EfTooSmall { ef, k });
        }
        if query.len() != self.table.dim() {
            return Err(Error::DimMismatch {
                expected: self.table.dim(),
                found: query.len(),
            });
        }
        let Some(entry) = self.entry else {
            return Ok(Vec::new());
        };
        let mut eps = vec![self.cand(query, entry)];
        for layer in (1..=self.max_level).rev() {
            eps = self.search_layer(query, &eps, 1, layer);
        }
        let found = self.search_layer(query, &eps, ef.max(k), 0);
        Ok(found
            .into_iter()
            .take(k)
            .map(|c| (c.row as usize, c.sim))
            .collect())
    }

    pub fn search(&self, query: &[T], k: usize, ef: usize) -> Result<Vec<(String, T)>> {
        Ok(self
            .search_rows(query, k, ef)?
            .into_iter()
            .map(|(r, s)| (self.table.id(r).to_string(), s))
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let u32le = |out: &mut Vec<u8>, x: u32| out.extend_from_slice(&x.to_le_bytes());
        out.extend_from_slice(INDEX_MAGIC);
        u32le(&mut out, VERSION);
        u32le(&mut out, self.params.m as u32);
        u32le(&mut out, self.params.ef_construction as u32);
        u32le(&mut out, self.params.ef_search as u32);
        out.extend_from_slice(&self.params.level_lambda.to_le_bytes());
        out.extend_from_slice(&self.params.seed.to_le_bytes());
        out.push(self.params.diverse_links as u8);
        out.extend_from_slice(&(self.links.len() as u64).to_le_bytes());
        u32le(&mut out, self.entry.unwrap_or(NO_ENTRY));
        u32le(&mut out, self.max_level as u32);
        for layers in &self.links {
            u32le(&mut out, layers.len().saturating_sub(1) as u32);
            for list in layers {
                u32le(&mut out, list.len() as u32);
                for &r in list {
                    u32le(&mut out, r);
                }
            }
        }
        out
    }

    /// Restores a frozen index over `table`, which must be the table the
    /// index was built on.
    pub fn from_bytes(bytes: &[u8], table: EmbeddingTable<T>) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != INDEX_MAGIC {
            return Err(Error::BadMagic {
                expected: "TGIX".into(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                expected: VERSION,
                found: version,
            });
        }
        let params = HnswParams {
            m: cur.u32()? as usize,
            ef_construction: cur.u32()? as usize,
            ef_search: cur.u32()? as usize,
            level_lambda: f64::from_le_bytes(cur.take(8)?.try_into().unwrap()),
            seed: u64::from_le_bytes(cur.take(8)?.try_into().unwrap()),
            diverse_links: match cur.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(Error::Truncated(format!("bad link-selection flag {b}"))),
            },
        };
        let n = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
        if n != table.len() {
            return Err(Error::DimMismatch {
                expected: table.len(),
                found: n,
            });
        }
        let entry = match cur.u32()? {
            NO_ENTRY => None,
            e if (e as usize) < n => Some(e),
            e => return Err(Error::Truncated(format!("entry point {e} out of range"))),
        };
        let max_level = cur.u32()? as usize;
        let mut links = Vec::with_capacity(n);
        for _ in 0..n {
            let level = cur.u32()? as usize;
            let mut layers = Vec::with_capacity(level + 1);
            for _ in 0..=level {
                let len = cur.u32()? as usize;
                let mut list = Vec::with_capacity(len);
                for _ in 0..len {
                    let r = cur.u32()?;
                    if r as usize >= n {
                        return Err(Error::Truncated(format!("link target {r} out of range")));
                    }
                    list.push(r);
                }
                layers.push(list);
            }
            links.push(layers);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Truncated("trailing bytes after index blob".into()));
        }
        let mut idx = HnswIndex::new(table, params)?;
        idx.links = links;
        idx.entry = entry;
        idx.max_level = max_level;
        idx.inserted = n;
        idx.frozen = true;
        Ok(idx)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated("index blob".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
