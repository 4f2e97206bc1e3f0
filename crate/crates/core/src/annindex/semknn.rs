use super::exact::exact_knn_rows;
use crate::error::{Error, Result};
use crate::hetgraph::{assert_no_leakage, EdgeRecord, TemporalSplit, SEM_NN};
use crate::scalar::Scalar;
use crate::semfactory::EmbeddingTable;

pub const DEFAULT_SEM_K: usize = 10;

/// Links every cold query to its `k` most similar warm authors by cosine on
/// the semantic embeddings. Edges are dated at the train cutoff so they sit
/// inside the training view.
pub fn build_semantic_knn_edges<T: Scalar>(
    split: &TemporalSplit,
    table: &EmbeddingTable<T>,
    k: usize,
) -> Result<Vec<EdgeRecord>> {
    assert_no_leakage(split)?;
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let g = split.train_view();
    let warm = split.warm_authors();
    if warm.is_empty() {
        return Err(Error::Empty("warm author set".into()));
    }
    let warm_table = table.subset(warm.iter().map(|&i| g.id(i)))?;

    let mut edges = Vec::with_capacity(split.cold_queries().len() * k);
    for cold in split.cold_queries() {
        let q = table.require(cold)?;
        for (row, _) in exact_knn_rows(&warm_table, q, k)? {
            edges.push(EdgeRecord::new(
                cold.as_str(),
                warm_table.id(row),
                SEM_NN,
                split.train_cutoff_year(),
            ));
        }
    }
    Ok(edges)
}
