//! Synthetic scholar corpus with a controllable gap between what the
//! semantic embeddings reveal and what the collaboration graph encodes.
//!
//! Each author gets a latent topic near its community centroid. Coauthor
//! edges are Bernoulli draws whose log-odds grow with latent similarity and
//! community membership, while the observed semantic embedding is a noisy
//! view of the latent topic. Semantics alone therefore rank same-topic
//! strangers close to real collaborators; the graph carries the community
//! signal that separates them.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::EmbeddingTable;
use crate::error::{Error, Result};
use crate::hetgraph::{EdgeRecord, NodeRecord, AUTHOR, COAUTHOR, PAPER, WRITES};
use crate::scalar::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub n_authors: usize,
    pub n_communities: usize,
    pub topic_dim: usize,
    pub papers_per_author_range: (usize, usize),
    pub train_years: Vec<i32>,
    pub test_years: Vec<i32>,
    pub cold_fraction: f64,
    pub noise_sigma: f64,
    /// Per-component standard deviation of an author's offset from its
    /// community centroid, before renormalization.
    pub topic_jitter: f64,
    pub edge_bias_intercept: f64,
    pub edge_semantic_weight: f64,
    pub edge_community_weight: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            n_authors: 2000,
            n_communities: 8,
            topic_dim: 64,
            papers_per_author_range: (1, 3),
            train_years: (2018..=2022).collect(),
            test_years: vec![2024],
            cold_fraction: 0.1,
            noise_sigma: 0.25,
            topic_jitter: 0.1,
            edge_bias_intercept: -6.0,
            edge_semantic_weight: 4.0,
            edge_community_weight: 2.5,
            seed: 42,
        }
    }
}

impl SyntheticCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_authors < 2 {
            return bad("n_authors must be at least 2");
        }
        if self.n_communities == 0 {
            return bad("n_communities must be positive");
        }
        if self.topic_dim < 2 {
            return bad("topic_dim must be at least 2");
        }
        if !(self.cold_fraction > 0.0 && self.cold_fraction < 1.0) {
            return bad("cold_fraction must lie in (0, 1)");
        }
        if self.cold_count() < 1 {
            return bad("cold_fraction * n_authors must be at least 1");
        }
        if !(self.noise_sigma >= 0.0) || !(self.topic_jitter >= 0.0) {
            return bad("noise_sigma and topic_jitter must be non-negative");
        }
        let (lo, hi) = self.papers_per_author_range;
        if lo > hi {
            return bad("papers_per_author_range min exceeds max");
        }
        let (Some(&train_max), Some(&test_min)) =
            (self.train_years.iter().max(), self.test_years.iter().min())
        else {
            return bad("train_years and test_years must be nonempty");
        };
        if train_max >= test_min {
            return bad("every train year must precede every test year");
        }
        Ok(())
    }

    fn cold_count(&self) -> usize {
        (self.cold_fraction * self.n_authors as f64).round() as usize
    }
}

/// Latent truth behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub community: BTreeMap<String, usize>,
    /// Unit-norm latent topic per author.
    pub latent: EmbeddingTable<f32>,
    /// Authors whose every edge was stamped with a test year.
    pub cold: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    /// Semantic embeddings for every node, authors first.
    pub embeddings: EmbeddingTable<f32>,
    pub truth: GroundTruth,
}

pub fn author_id(i: usize) -> String {
    format!("A{i:05}")
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn noisy_view(rng: &mut ChaCha8Rng, z: &[f64], sigma: f64) -> Vec<f32> {
    let v = if sigma == 0.0 {
        z.to_vec()
    } else {
        let eps = gaussian(rng, z.len(), sigma);
        unit(z.iter().zip(&eps).map(|(a, b)| a + b).collect())
    };
    v.into_iter().map(|x| x as f32).collect()
}

pub fn synth_corpus(config: &SyntheticCorpusConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let n = config.n_authors;
    let dim = config.topic_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let community: Vec<usize> = (0..n)
        .map(|_| rng.random_range(0..config.n_communities))
        .collect();
    let centroids: Vec<Vec<f64>> = (0..config.n_communities)
        .map(|_| unit(gaussian(&mut rng, dim, 1.0)))
        .collect();
    let latent: Vec<Vec<f64>> = community
        .iter()
        .map(|&c| {
            let jitter = gaussian(&mut rng, dim, config.topic_jitter);
            unit(centroids[c].iter().zip(&jitter).map(|(a, b)| a + b).collect())
        })
        .collect();

    let mut is_cold = vec![false; n];
    for i in index::sample(&mut rng, n, config.cold_count()) {
        is_cold[i] = true;
    }

    let pick = |rng: &mut ChaCha8Rng, years: &[i32]| years[rng.random_range(0..years.len())];
    let mut edges = Vec::new();
    let mut has_edge = vec![false; n];
    for u in 0..n {
        for v in u + 1..n {
            let same = (community[u] == community[v]) as u8 as f64;
            let logit = config.edge_bias_intercept
                + config.edge_semantic_weight * dot(&latent[u], &latent[v])
                + config.edge_community_weight * same;
            if rng.random::<f64>() < sigmoid(logit) {
                let cold = is_cold[u] || is_cold[v];
                let year = if cold {
                    pick(&mut rng, &config.test_years)
                } else {
                    pick(&mut rng, &config.train_years)
                };
                edges.push(EdgeRecord::new(author_id(u), author_id(v), COAUTHOR, year));
                has_edge[u] = true;
                has_edge[v] = true;
            }
        }
    }
    // A cold author must have at least one held-out collaborator; link any
    // that drew none to its latent nearest neighbour.
    for u in 0..n {
        if is_cold[u] && !has_edge[u] {
            let v = (0..n)
                .filter(|&v| v != u)
                .max_by(|&a, &b| {
                    dot(&latent[u], &latent[a])
                        .total_cmp(&dot(&latent[u], &latent[b]))
                        .then(b.cmp(&a))
                })
                .expect("n_authors >= 2");
            let year = pick(&mut rng, &config.test_years);
            let (a, b) = (u.min(v), u.max(v));
            edges.push(EdgeRecord::new(author_id(a), author_id(b), COAUTHOR, year));
            has_edge[u] = true;
            has_edge[v] = true;
        }
    }

    let mut nodes: Vec<NodeRecord> = (0..n).map(|i| NodeRecord::new(author_id(i), AUTHOR)).collect();
    let mut embeddings = EmbeddingTable::new(dim);
    for (u, z) in latent.iter().enumerate() {
        embeddings.push(&author_id(u), &noisy_view(&mut rng, z, config.noise_sigma))?;
    }
    let (lo, hi) = config.papers_per_author_range;
    for (u, z) in latent.iter().enumerate() {
        for j in 0..rng.random_range(lo..=hi) {
            let pid = format!("P{u:05}-{j}");
            let year = if is_cold[u] {
                pick(&mut rng, &config.test_years)
            } else {
                pick(&mut rng, &config.train_years)
            };
            let mut rec = NodeRecord::new(&pid, PAPER);
            rec.attrs = serde_json::json!({ "year": year });
            nodes.push(rec);
            edges.push(EdgeRecord::new(author_id(u), &pid, WRITES, year));
            embeddings.push(&pid, &noisy_view(&mut rng, z, config.noise_sigma))?;
        }
    }

    let mut latent_table = EmbeddingTable::new(dim);
    for (u, z) in latent.iter().enumerate() {
        let v: Vec<f32> = z.iter().map(|&x| x as f32).collect();
        latent_table.push(&author_id(u), &v)?;
    }
    Ok(SyntheticCorpus {
        nodes,
        edges,
        embeddings,
        truth: GroundTruth {
            community: (0..n).map(|u| (author_id(u), community[u])).collect(),
            latent: latent_table,
            cold: (0..n).filter(|&u| is_cold[u]).map(author_id).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, time_machine_split, RelationSchema};
    use crate::semfactory::cosine;

    fn small() -> SyntheticCorpusConfig {
        SyntheticCorpusConfig {
            n_authors: 200,
            n_communities: 4,
            topic_dim: 16,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = synth_corpus(&small()).unwrap();
        let b = synth_corpus(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.embeddings.to_bytes(), b.embeddings.to_bytes());
        let c = synth_corpus(&SyntheticCorpusConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a.edges, c.edges);
    }

    #[test]
    fn zero_noise_reproduces_latent_topic() {
        let c = synth_corpus(&SyntheticCorpusConfig {
            noise_sigma: 0.0,
            ..small()
        })
        .unwrap();
        for (id, z) in c.truth.latent.iter() {
            assert_eq!(c.embeddings.get(id).unwrap(), z);
        }
    }

    #[test]
    fn edge_density_matches_bias_alone() {
        for intercept in [-6.0, -1.0] {
            let cfg = SyntheticCorpusConfig {
                n_authors: 160,
                edge_semantic_weight: 0.0,
                edge_community_weight: 0.0,
                edge_bias_intercept: intercept,
                ..small()
            };
            let c = synth_corpus(&cfg).unwrap();
            let linked: std::collections::HashSet<(String, String)> = c
                .edges
                .iter()
                .filter(|e| e.relation == COAUTHOR)
                .map(|e| (e.src.clone(), e.dst.clone()))
                .collect();
            // Warm-warm pairs only: every extra edge added for an unlinked
            // cold author touches that cold author.
            let warm: Vec<String> = (0..160)
                .map(author_id)
                .filter(|id| !c.truth.cold.contains(id))
                .collect();
            let pairs: Vec<(&String, &String)> = warm
                .iter()
                .enumerate()
                .flat_map(|(i, u)| warm[i + 1..].iter().map(move |v| (u, v)))
                .take(10_000)
                .collect();
            assert_eq!(pairs.len(), 10_000);
            let hits = pairs
                .iter()
                .filter(|(u, v)| linked.contains(&((*u).clone(), (*v).clone())))
                .count();
            let p = sigmoid(intercept);
            let se = (p * (1.0 - p) / pairs.len() as f64).sqrt();
            let observed = hits as f64 / pairs.len() as f64;
            assert!(
                (observed - p).abs() <= 3.0 * se,
                "intercept {intercept}: observed {observed}, expected {p} +- {se}"
            );
        }
    }

    #[test]
    fn cold_authors_are_cold_after_split() {
        let c = synth_corpus(&small()).unwrap();
        let g = build_graph(c.nodes.clone(), &c.edges, RelationSchema::academic()).unwrap();
        let s = time_machine_split(&g, 2022, 2024).unwrap();
        for id in &c.truth.cold {
            let idx = s.train_view().index_of(id).unwrap();
            assert_eq!(s.train_view().observed_degree(idx), 0);
            assert!(!s.test_positives()[id].is_empty());
            assert!(s.cold_queries().contains(id));
        }
    }

    #[test]
    fn communities_are_semantically_separated() {
        let c = synth_corpus(&small()).unwrap();
        let ids: Vec<&String> = c.truth.community.keys().collect();
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let s = cosine(c.embeddings.get(a).unwrap(), c.embeddings.get(b).unwrap())
                    .unwrap() as f64;
                if c.truth.community[*a] == c.truth.community[*b] {
                    intra += s;
                    ni += 1;
                } else {
                    inter += s;
                    nx += 1;
                }
            }
        }
        assert!(intra / ni as f64 > inter / nx as f64);
    }

    #[test]
    fn rejects_invalid_configs() {
        for cfg in [
            SyntheticCorpusConfig {
                cold_fraction: 0.0,
                ..small()
            },
            SyntheticCorpusConfig {
                cold_fraction: 0.001,
                ..small()
            },
            SyntheticCorpusConfig {
                topic_dim: 1,
                ..small()
            },
            SyntheticCorpusConfig {
                test_years: vec![2022],
                ..small()
            },
        ] {
            assert!(matches!(synth_corpus(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}
