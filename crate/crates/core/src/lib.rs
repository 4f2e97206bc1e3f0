//! Cold-start collaborator recommendation: semantic recall over an HNSW
//! index, followed by a heterogeneous-graph-transformer rerank whose
//! encoder is distilled from the semantic embeddings with a contrastive
//! objective. Evaluation follows a strict temporal split.
//!
//! The numeric core is generic over [`Scalar`] (`f32` and `f64`). The
//! pipeline itself runs in `f32`; the aliases below name the concrete types
//! it uses.

pub mod annindex;
pub mod error;
pub mod hetgraph;
pub mod hgtcore;
pub mod rankeval;
pub mod scalar;
pub mod semfactory;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Semantic or structural embeddings as stored on disk.
pub type Embeddings = semfactory::EmbeddingTable<f32>;
/// HNSW index over `f32` embeddings.
pub type Index = annindex::HnswIndex<f32>;
/// Encoder weights at pipeline precision.
pub type Params = hgtcore::HgtParams<f32>;
pub type Tape32 = hgtcore::Tape<f32>;
pub type Tape64 = hgtcore::Tape<f64>;
