//! Nearest-neighbour search over unit-normalized embeddings: an exhaustive
//! scan, an HNSW index, and the semantic k-NN edges that attach cold
//! authors to the warm graph.

mod exact;
mod hnsw;
mod semknn;

pub use exact::{exact_knn, exact_knn_rows};
pub use hnsw::{HnswIndex, HnswParams, INDEX_MAGIC};
pub use semknn::{build_semantic_knn_edges, DEFAULT_SEM_K};

use std::cmp::Ordering;

use crate::scalar::Scalar;

/// Descending similarity, then ascending id.
pub(crate) fn rank_order<T: Scalar>(a: (T, &str), b: (T, &str)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}
