use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hybrid::{check_alpha, Candidate, HybridConfig, Recommender};
use super::metrics::{diversity, mrr, ndcg_at_k, novelty, recall_at_k, Popularity};
use crate::error::{Error, Result};
use crate::hetgraph::{assert_no_leakage, TemporalSplit};

pub const HYBRID: &str = "hybrid";
pub const SEMANTIC_ONLY: &str = "semantic_only";
pub const STRUCTURE_ONLY: &str = "structure_only";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query: String,
    pub positives: usize,
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub reciprocal_rank: f64,
    pub novelty: f64,
    pub diversity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub novelty: f64,
    pub diversity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub alpha: f64,
    pub metrics: Metrics,
    pub per_query: Vec<QueryMetrics>,
}

/// Evaluation output. Serialized without the wall-clock figures so that
/// reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub config: HybridConfig,
    pub queries: usize,
    pub train_cutoff_year: i32,
    pub test_start_year: i32,
    /// How MRR treats multiple positives.
    pub mrr_definition: String,
    /// Cutoff used for novelty and diversity.
    pub list_metrics_k: usize,
    pub methods: Vec<MethodReport>,
    #[serde(skip)]
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallClock {
    pub total: Duration,
    pub per_query_mean: Duration,
}

impl RankReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Context<'a> {
    recommender: &'a Recommender,
    popularity: Popularity,
    k_values: Vec<usize>,
    list_k: usize,
}

impl Context<'_> {
    fn score(&self, query: &str, truth: &BTreeSet<String>, pool: &[Candidate], alpha: f64) -> Result<QueryMetrics> {
        let kmax = *self.k_values.iter().max().expect("validated");
        let recs = self.recommender.rerank(query, pool, alpha, kmax)?;
        let ranked: Vec<&str> = recs.iter().map(|r| r.id.as_str()).collect();
        if ranked.is_empty() {
            return Err(Error::Empty(format!("recommendations for {query:?}")));
        }
        let top = &ranked[..self.list_k.min(ranked.len())];
        Ok(QueryMetrics {
            query: query.to_string(),
            positives: truth.len(),
            recall: self
                .k_values
                .iter()
                .map(|&k| Ok((k, recall_at_k(&ranked, truth, k)?)))
                .collect::<Result<_>>()?,
            ndcg: self
                .k_values
                .iter()
                .map(|&k| Ok((k, ndcg_at_k(&ranked, truth, k)?)))
                .collect::<Result<_>>()?,
            reciprocal_rank: mrr(&ranked, truth)?,
            novelty: novelty(top, &self.popularity)?,
            diversity: diversity(top, self.recommender.semantic())?,
        })
    }
}

fn aggregate(rows: &[QueryMetrics], k_values: &[usize]) -> Metrics {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&QueryMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Metrics {
        recall: k_values.iter().map(|&k| (k, mean(&|q| q.recall[&k]))).collect(),
        ndcg: k_values.iter().map(|&k| (k, mean(&|q| q.ndcg[&k]))).collect(),
        mrr: mean(&|q| q.reciprocal_rank),
        novelty: mean(&|q| q.novelty),
        diversity: mean(&|q| q.diversity),
    }
}

/// Cold queries with their held-out partners.
fn queries(split: &TemporalSplit) -> Result<Vec<(&str, &BTreeSet<String>)>> {
    let q: Vec<_> = split
        .cold_queries()
        .iter()
        .map(|id| {
            let truth = split
                .test_positives()
                .get(id)
                .ok_or_else(|| Error::Leakage(format!("cold query {id:?} has no held-out positive")))?;
            Ok((id.as_str(), truth))
        })
        .collect::<Result<_>>()?;
    if q.is_empty() {
        return Err(Error::Empty("cold query set".into()));
    }
    Ok(q)
}

fn map_queries<T: Send, F>(items: &[(&str, &BTreeSet<String>)], parallel: bool, f: F) -> Result<Vec<T>>
where
    F: Fn(&str, &BTreeSet<String>) -> Result<T> + Sync,
{
    if parallel {
        items.par_iter().map(|(q, t)| f(q, t)).collect()
    } else {
        items.iter().map(|(q, t)| f(q, t)).collect()
    }
}

/// Runs every cold query through the recommender at the configured alpha
/// and at the two boundaries (semantic-only and structure-only).
pub fn evaluate(split: &TemporalSplit, recommender: &Recommender, config: &HybridConfig) -> Result<RankReport> {
    evaluate_with(split, recommender, config, true)
}

pub fn evaluate_with(
    split: &TemporalSplit,
    recommender: &Recommender,
    config: &HybridConfig,
    parallel: bool,
) -> Result<RankReport> {
    assert_no_leakage(split)?;
    config.validate()?;
    let start = Instant::now();
    let items = queries(split)?;
    let mut k_values = config.k_values.clone();
    k_values.sort_unstable();
    k_values.dedup();
    let ctx = Context {
        recommender,
        popularity: Popularity::from_graph(split.train_view()),
        list_k: k_values[0],
        k_values,
    };
    let methods = [
        (HYBRID, config.alpha),
        (SEMANTIC_ONLY, 1.0),
        (STRUCTURE_ONLY, 0.0),
    ];
    let rows: Vec<[QueryMetrics; 3]> = map_queries(&items, parallel, |q, truth| {
        let pool = recommender.candidates(q, config.candidate_pool)?;
        let one = |a| ctx.score(q, truth, &pool, a);
        Ok([one(methods[0].1)?, one(methods[1].1)?, one(methods[2].1)?])
    })?;
    let total = start.elapsed();
    let reports = methods
        .iter()
        .enumerate()
        .map(|(m, &(name, alpha))| {
            let per_query: Vec<QueryMetrics> = rows.iter().map(|r| r[m].clone()).collect();
            MethodReport {
                method: name.to_string(),
                alpha,
                metrics: aggregate(&per_query, &ctx.k_values),
                per_query,
            }
        })
        .collect();
    Ok(RankReport {
        config: config.clone(),
        queries: items.len(),
        train_cutoff_year: split.train_cutoff_year(),
        test_start_year: split.test_start_year(),
        mrr_definition: "reciprocal rank of the first hit".into(),
        list_metrics_k: ctx.list_k,
        methods: reports,
        wall_clock: WallClock {
            total,
            per_query_mean: total / items.len() as u32,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub recall_at_10: f64,
    pub ndcg_at_10: f64,
}

/// R@10 and N@10 at every alpha in `grid`. Candidate pools are retrieved
/// once and shared by all grid points.
pub fn sweep_alpha(
    split: &TemporalSplit,
    recommender: &Recommender,
    config: &HybridConfig,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    assert_no_leakage(split)?;
    if grid.is_empty() {
        return Err(Error::Config("alpha grid is empty".into()));
    }
    for &a in grid {
        check_alpha(a)?;
    }
    let items = queries(split)?;
    let pool_size = config.candidate_pool.max(10);
    let pools = map_queries(&items, true, |q, _| recommender.candidates(q, pool_size))?;
    let ctx = Context {
        recommender,
        popularity: Popularity::from_graph(split.train_view()),
        k_values: vec![10],
        list_k: 10,
    };
    grid.iter()
        .map(|&alpha| {
            let rows: Vec<QueryMetrics> = items
                .par_iter()
                .zip(pools.par_iter())
                .map(|((q, truth), pool)| ctx.score(q, truth, pool, alpha))
                .collect::<Result<_>>()?;
            let m = aggregate(&rows, &[10]);
            Ok(SweepPoint {
                alpha,
                recall_at_10: m.recall[&10],
                ndcg_at_10: m.ndcg[&10],
            })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("alpha,recall_at_10,ndcg_at_10\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.alpha, p.recall_at_10, p.ndcg_at_10));
    }
    s
}
