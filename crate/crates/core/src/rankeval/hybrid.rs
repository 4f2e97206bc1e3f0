use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::annindex::{HnswIndex, HnswParams};
use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, TemporalSplit, COAUTHOR};
use crate::semfactory::{cosine, EmbeddingTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub alpha: f64,
    pub candidate_pool: usize,
    pub k_values: Vec<usize>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            alpha: 0.95,
            candidate_pool: 100,
            k_values: vec![10, 50],
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::Config("k values must be a nonempty list of positive integers".into()));
        }
        let kmax = self.max_k();
        if self.candidate_pool < kmax {
            return Err(Error::Config(format!(
                "candidate pool {} is smaller than the largest k {kmax}",
                self.candidate_pool
            )));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_values.iter().copied().max().unwrap_or(0)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// `alpha * s_sem + (1 - alpha) * s_struct`.
pub fn blend(alpha: f64, s_sem: f64, s_struct: f64) -> f64 {
    alpha * s_sem + (1.0 - alpha) * s_struct
}

/// Hybrid score of `u` and `v` from their semantic and structural vectors.
pub fn hybrid_score(
    sem_u: &[f32],
    sem_v: &[f32],
    struct_u: &[f32],
    struct_v: &[f32],
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let s = cosine(sem_u, sem_v)? as f64;
    let t = cosine(struct_u, struct_v)? as f64;
    Ok(blend(alpha, s, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub s_sem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub score: f64,
    pub s_sem: f64,
    pub s_struct: f64,
}

/// Frozen two-stage recommender: HNSW recall over warm authors' semantic
/// vectors, then a hybrid rerank.
#[derive(Debug, Clone)]
pub struct Recommender {
    index: HnswIndex<f32>,
    semantic: EmbeddingTable<f32>,
    structural: EmbeddingTable<f32>,
    coauthors: HashMap<String, BTreeSet<String>>,
}

impl Recommender {
    /// `index` must cover the warm authors only; `semantic` and
    /// `structural` hold every author that can be queried.
    pub fn new(
        index: HnswIndex<f32>,
        semantic: EmbeddingTable<f32>,
        structural: EmbeddingTable<f32>,
        train_view: &HeteroGraph,
    ) -> Result<Self> {
        if !index.is_frozen() {
            return Err(Error::NotFrozen);
        }
        if index.table().dim() != semantic.dim() {
            return Err(Error::DimMismatch {
                expected: index.table().dim(),
                found: semantic.dim(),
            });
        }
        for id in index.table().ids() {
            structural.require(id)?;
        }
        let mut coauthors: HashMap<String, BTreeSet<String>> = HashMap::new();
        if let Some(rel) = train_view.schema().relation_id(COAUTHOR) {
            for e in train_view.edges().iter().filter(|e| e.rel == rel) {
                let (a, b) = (train_view.id(e.src), train_view.id(e.dst));
                coauthors.entry(a.to_string()).or_default().insert(b.to_string());
                coauthors.entry(b.to_string()).or_default().insert(a.to_string());
            }
        }
        Ok(Recommender {
            index,
            semantic,
            structural,
            coauthors,
        })
    }

    /// Builds the warm-author index from `semantic` and assembles the
    /// recommender.
    pub fn build(
        split: &TemporalSplit,
        semantic: EmbeddingTable<f32>,
        structural: EmbeddingTable<f32>,
        params: HnswParams,
    ) -> Result<Self> {
        let g = split.train_view();
        let warm = semantic.subset(split.warm_authors().iter().map(|&i| g.id(i)))?;
        let index = HnswIndex::build(warm, params)?;
        Recommender::new(index, semantic, structural, g)
    }

    pub fn index(&self) -> &HnswIndex<f32> {
        &self.index
    }

    pub fn semantic(&self) -> &EmbeddingTable<f32> {
        &self.semantic
    }

    pub fn structural(&self) -> &EmbeddingTable<f32> {
        &self.structural
    }

    pub fn contains(&self, id: &str) -> bool {
        self.semantic.get(id).is_some()
    }

    /// Stage 1: up to `pool` warm authors by semantic cosine, excluding `u`
    /// and its train-view coauthors.
    pub fn candidates(&self, u: &str, pool: usize) -> Result<Vec<Candidate>> {
        let q = self
            .semantic
            .get(u)
            .ok_or_else(|| Error::UnknownNode(u.to_string()))?;
        let excluded = self.coauthors.get(u);
        let n_excl = excluded.map_or(0, BTreeSet::len) + 1;
        let depth = (pool + n_excl).min(self.index.len());
        if depth == 0 || pool == 0 {
            return Ok(Vec::new());
        }
        let ef = self.index.params().ef_search.max(depth);
        let hits = self.index.search_rows(q, depth, ef)?;
        let table = self.index.table();
        Ok(hits
            .into_iter()
            .map(|(row, s)| (table.id(row), s))
            .filter(|(id, _)| *id != u && !excluded.is_some_and(|e| e.contains(*id)))
            .take(pool)
            .map(|(id, s)| Candidate {
                id: id.to_string(),
                s_sem: s as f64,
            })
            .collect())
    }

    /// Stage 2: orders `pool` by the hybrid score, ties by ascending id.
    pub fn rerank(&self, u: &str, pool: &[Candidate], alpha: f64, k: usize) -> Result<Vec<Recommendation>> {
        check_alpha(alpha)?;
        let su = self.structural.require(u)?;
        let mut out = pool
            .iter()
            .map(|c| {
                let s_struct = cosine(su, self.structural.require(&c.id)?)? as f64;
                Ok(Recommendation {
                    id: c.id.clone(),
                    score: blend(alpha, c.s_sem, s_struct),
                    s_sem: c.s_sem,
                    s_struct,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        out.truncate(k);
        Ok(out)
    }

    pub fn recommend(&self, u: &str, k: usize, config: &HybridConfig) -> Result<Vec<Recommendation>> {
        check_alpha(config.alpha)?;
        let pool = self.candidates(u, config.candidate_pool)?;
        self.rerank(u, &pool, config.alpha, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, time_machine_split, EdgeRecord, NodeRecord, RelationSchema, AUTHOR};

    #[test]
    fn blend_arithmetic() {
        assert!((blend(0.95, 0.8, 0.4) - 0.78).abs() < 1e-12);
        assert_eq!(blend(1.0, 0.3, 0.9), 0.3);
        assert_eq!(blend(0.0, 0.3, 0.9), 0.9);
    }

    #[test]
    fn hybrid_score_from_vectors() {
        let s = hybrid_score(&[1.0, 0.0], &[0.8, 0.6], &[1.0, 0.0], &[0.4, 0.9165151], 0.95).unwrap();
        assert!((s - 0.78).abs() < 1e-6);
        assert!(hybrid_score(&[1.0], &[1.0], &[1.0], &[1.0], 1.5).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(HybridConfig::default().validate().is_ok());
        let bad = HybridConfig {
            candidate_pool: 20,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = HybridConfig {
            alpha: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    /// Eight authors on a circle; `c0` is cold, the rest form a chain of
    /// coauthorships. Structural vectors are a different arrangement.
    fn toy() -> (TemporalSplit, Recommender) {
        let ids: Vec<String> = (0..8).map(|i| format!("a{i}")).collect();
        let mut nodes: Vec<NodeRecord> = ids.iter().map(|i| NodeRecord::new(i.as_str(), AUTHOR)).collect();
        nodes.push(NodeRecord::new("c0", AUTHOR));
        let mut edges: Vec<EdgeRecord> = (0..7)
            .map(|i| EdgeRecord::new(ids[i].as_str(), ids[i + 1].as_str(), COAUTHOR, 2020))
            .collect();
        edges.push(EdgeRecord::new("c0", "a3", COAUTHOR, 2024));
        let g = build_graph(nodes, &edges, RelationSchema::academic()).unwrap();
        let split = time_machine_split(&g, 2022, 2024).unwrap();
        let mut sem = EmbeddingTable::new(2);
        let mut st = EmbeddingTable::new(2);
        for (i, id) in ids.iter().chain(std::iter::once(&"c0".to_string())).enumerate() {
            let a = i as f32 * 0.7;
            sem.push(id, &[a.cos(), a.sin()]).unwrap();
            let b = (i * 5 % 9) as f32 * 0.9;
            st.push(id, &[b.cos(), b.sin()]).unwrap();
        }
        let params = HnswParams {
            m: 4,
            ..HnswParams::default()
        };
        let r = Recommender::build(&split, sem, st, params).unwrap();
        (split, r)
    }

    fn brute_force(r: &Recommender, u: &str, alpha: f64, k: usize, excluded: &[&str]) -> Vec<String> {
        let mut all: Vec<(String, f64)> = r
            .index()
            .table()
            .ids()
            .iter()
            .filter(|id| id.as_str() != u && !excluded.contains(&id.as_str()))
            .map(|id| {
                let s = hybrid_score(
                    r.semantic().get(u).unwrap(),
                    r.semantic().get(id).unwrap(),
                    r.structural().get(u).unwrap(),
                    r.structural().get(id).unwrap(),
                    alpha,
                )
                .unwrap();
                (id.clone(), s)
            })
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.into_iter().take(k).map(|x| x.0).collect()
    }

    #[test]
    fn matches_exhaustive_scoring() {
        let (_, r) = toy();
        for alpha in [0.0, 0.3, 0.95, 1.0] {
            let cfg = HybridConfig {
                alpha,
                candidate_pool: 100,
                k_values: vec![5],
            };
            let got: Vec<String> = r.recommend("c0", 5, &cfg).unwrap().into_iter().map(|x| x.id).collect();
            // Scores agree to rounding; compare the id lists.
            assert_eq!(got, brute_force(&r, "c0", alpha, 5, &[]), "alpha {alpha}");
        }
    }

    #[test]
    fn excludes_self_and_coauthors() {
        let (_, r) = toy();
        let cfg = HybridConfig::default();
        let got: Vec<String> = r.recommend("a3", 10, &cfg).unwrap().into_iter().map(|x| x.id).collect();
        assert_eq!(got.len(), 5);
        for bad in ["a3", "a2", "a4"] {
            assert!(!got.iter().any(|g| g == bad));
        }
        assert_eq!(got, brute_force(&r, "a3", cfg.alpha, 10, &["a2", "a4"]));
    }

    #[test]
    fn alpha_one_keeps_semantic_order() {
        let (_, r) = toy();
        let pool = r.candidates("c0", 100).unwrap();
        let recs = r.rerank("c0", &pool, 1.0, 100).unwrap();
        let ids: Vec<&str> = recs.iter().map(|x| x.id.as_str()).collect();
        let pool_ids: Vec<&str> = pool.iter().map(|x| x.id.as_str()).collect();
        assert_eq!(ids, pool_ids);
    }

    #[test]
    fn pool_of_one() {
        let (_, r) = toy();
        let pool = r.candidates("c0", 1).unwrap();
        assert_eq!(pool.len(), 1);
        for alpha in [0.0, 0.5, 1.0] {
            assert_eq!(r.rerank("c0", &pool, alpha, 10).unwrap()[0].id, pool[0].id);
        }
    }

    #[test]
    fn struct_shift_does_not_reorder() {
        let (_, r) = toy();
        let pool = r.candidates("c0", 100).unwrap();
        let recs = r.rerank("c0", &pool, 0.6, 100).unwrap();
        let mut shifted: Vec<(String, f64)> = recs
            .iter()
            .map(|x| (x.id.clone(), blend(0.6, x.s_sem, x.s_struct + 0.25)))
            .collect();
        shifted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let a: Vec<&str> = recs.iter().map(|x| x.id.as_str()).collect();
        let b: Vec<&str> = shifted.iter().map(|x| x.0.as_str()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_author() {
        let (_, r) = toy();
        assert!(matches!(
            r.recommend("nobody", 3, &HybridConfig::default()),
            Err(Error::UnknownNode(_))
        ));
    }
}
