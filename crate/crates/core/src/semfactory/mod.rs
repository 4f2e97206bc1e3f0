//! Semantic embedding provisioning: the binary embedding table format,
//! vector utilities and a deterministic synthetic corpus generator that
//! stands in for an external teacher model.

mod synth;
mod table;
mod vector;

pub use synth::{synth_corpus, GroundTruth, SyntheticCorpus, SyntheticCorpusConfig};
pub use table::{load_embeddings, write_embeddings, EmbeddingTable, EMBEDDING_MAGIC};
pub use vector::{cosine, normalize, normalize_vec};
