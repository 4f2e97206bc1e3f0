use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, AUTHOR};
use crate::semfactory::{cosine, EmbeddingTable};

fn check(ranked_len: usize, truth_len: usize, k: Option<usize>) -> Result<()> {
    if k == Some(0) {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if ranked_len == 0 {
        return Err(Error::Empty("ranked list".into()));
    }
    if truth_len == 0 {
        return Err(Error::Empty("truth set".into()));
    }
    Ok(())
}

/// `|top-k ∩ truth| / min(|truth|, k)`.
pub fn recall_at_k<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>, k: usize) -> Result<f64> {
    check(ranked.len(), truth.len(), Some(k))?;
    let hits = ranked
        .iter()
        .take(k)
        .filter(|r| truth.contains(r.as_ref()))
        .count();
    Ok(hits as f64 / truth.len().min(k) as f64)
}

fn discount(rank0: usize) -> f64 {
    1.0 / ((rank0 + 2) as f64).log2()
}

/// Binary-gain NDCG with a `log2(rank + 1)` discount.
pub fn ndcg_at_k<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>, k: usize) -> Result<f64> {
    check(ranked.len(), truth.len(), Some(k))?;
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, r)| truth.contains(r.as_ref()))
        .map(|(i, _)| discount(i))
        .sum();
    let ideal: f64 = (0..truth.len().min(k)).map(discount).sum();
    Ok(dcg / ideal)
}

/// Reciprocal rank of the first hit; 0 without one.
pub fn mrr<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>) -> Result<f64> {
    check(ranked.len(), truth.len(), None)?;
    Ok(ranked
        .iter()
        .position(|r| truth.contains(r.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

/// Self-information of author popularity in the train view.
#[derive(Debug, Clone)]
pub struct Popularity {
    info: HashMap<String, f64>,
    max_info: f64,
}

impl Popularity {
    /// Popularity is the observed (non-derived) train degree.
    pub fn from_graph(g: &HeteroGraph) -> Self {
        let degs: Vec<(usize, usize)> = g
            .nodes_of_type(AUTHOR)
            .iter()
            .map(|&i| (i, g.observed_degree(i)))
            .collect();
        let total: usize = degs.iter().map(|d| d.1).sum();
        let mut info = HashMap::new();
        let mut max_info = 0.0f64;
        for (i, d) in degs {
            if d > 0 {
                let s = -(d as f64 / total as f64).log2();
                max_info = max_info.max(s);
                info.insert(g.id(i).to_string(), s);
            }
        }
        Popularity { info, max_info }
    }

    /// Degree-0 and unseen items get the largest observed value.
    pub fn self_information(&self, id: &str) -> f64 {
        self.info.get(id).copied().unwrap_or(self.max_info)
    }
}

/// Mean self-information of the recommended items.
pub fn novelty<S: AsRef<str>>(ranked: &[S], popularity: &Popularity) -> Result<f64> {
    if ranked.is_empty() {
        return Err(Error::Empty("ranked list".into()));
    }
    let s: f64 = ranked
        .iter()
        .map(|r| popularity.self_information(r.as_ref()))
        .sum();
    Ok(s / ranked.len() as f64)
}

/// `1 - mean pairwise cosine` of the items' embeddings. A single item has
/// no pairs and scores 0.
pub fn diversity<S: AsRef<str>>(ranked: &[S], table: &EmbeddingTable<f32>) -> Result<f64> {
    if ranked.is_empty() {
        return Err(Error::Empty("ranked list".into()));
    }
    let vecs = ranked
        .iter()
        .map(|r| table.require(r.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            sum += cosine(vecs[i], vecs[j])? as f64;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - sum / pairs as f64)
}
