//! Two-stage hybrid recommendation, ranking metrics and the temporal
//! evaluation harness.

mod eval;
mod hybrid;
mod metrics;

pub use eval::{
    evaluate, evaluate_with, sweep_alpha, sweep_csv, Metrics, MethodReport, QueryMetrics, RankReport, SweepPoint,
    WallClock, HYBRID, SEMANTIC_ONLY, STRUCTURE_ONLY,
};
pub use hybrid::{blend, hybrid_score, Candidate, HybridConfig, Recommendation, Recommender};
pub use metrics::{diversity, mrr, ndcg_at_k, novelty, recall_at_k, Popularity};
