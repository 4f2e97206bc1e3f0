use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use coldrec::annindex::HnswIndex;
use coldrec::hetgraph::{assert_no_leakage, TemporalSplit, AUTHOR};
use coldrec::hgtcore::StructuralEncoder;
use coldrec::rankeval::{Candidate, HybridConfig, Recommendation, Recommender};
use coldrec::semfactory::load_embeddings;
use coldrec::{Embeddings, Error, Params};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::layout::{self, require, SplitInputs};
use crate::manifest::{hash_file, read_manifest};

#[derive(Debug, Clone, Serialize)]
pub struct BundlePaths {
    pub nodes: PathBuf,
    pub train_edges: PathBuf,
    pub split: PathBuf,
    pub sem_nn_edges: PathBuf,
    pub embeddings: PathBuf,
    pub checkpoint: PathBuf,
    pub index: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildMetadata {
    pub model: ModelMeta,
    pub index_seed: u64,
    pub index_m: usize,
    pub authors: usize,
    pub warm_authors: usize,
    pub cold_queries: usize,
    pub hybrid: HybridConfig,
    pub checkpoint_sha256: String,
    pub index_sha256: String,
    /// Settings echoed from the train run, when its manifest is present.
    pub train_config: Option<serde_json::Value>,
    pub loaded_at_unix_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelMeta {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub in_dim: usize,
    pub seed: u64,
}

/// All serving artifacts, validated and frozen.
pub struct EngineBundle {
    paths: BundlePaths,
    split: TemporalSplit,
    params: Params,
    recommender: Recommender,
    metadata: BuildMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub query: String,
    pub alpha: f64,
    pub items: Vec<Recommendation>,
}

impl EngineBundle {
    pub fn load(corpus: &Path, run: &Path, hybrid: HybridConfig) -> Result<Self> {
        hybrid.validate()?;
        let checkpoint = require(run.join(layout::MODEL), "checkpoint")?;
        let index_path = require(run.join(layout::INDEX), "index")?;
        let embeddings = require(corpus.join(layout::EMBEDDINGS), "embeddings")?;
        let inputs = SplitInputs::locate(corpus, run, true)?;
        let split = inputs.load()?;
        assert_no_leakage(&split)?;

        let params = Params::load(&checkpoint)?;
        let features: Embeddings = load_embeddings(&embeddings)?;
        if features.dim() != params.in_dim() {
            return Err(Error::DimMismatch {
                expected: params.in_dim(),
                found: features.dim(),
            }
            .into());
        }
        let g = split.train_view();
        let semantic = features.subset(g.nodes_of_type(AUTHOR).iter().map(|&i| g.id(i)))?;
        let warm = semantic.subset(split.warm_authors().iter().map(|&i| g.id(i)))?;
        let bytes = std::fs::read(&index_path).map_err(|e| CliError::io("read index", &index_path, e))?;
        let index = HnswIndex::from_bytes(&bytes, warm)?;

        let cfg = params.config().clone();
        let encoder = StructuralEncoder::new(params.clone(), g.clone(), &features)?;
        let structural = encoder.encode_authors()?;
        let recommender = Recommender::new(index, semantic, structural, g)?;

        let metadata = BuildMetadata {
            model: ModelMeta {
                layers: cfg.layers,
                heads: cfg.heads,
                hidden: cfg.hidden,
                in_dim: params.in_dim(),
                seed: cfg.seed,
            },
            index_seed: recommender.index().params().seed,
            index_m: recommender.index().params().m,
            authors: recommender.semantic().len(),
            warm_authors: recommender.index().len(),
            cold_queries: split.cold_queries().len(),
            hybrid,
            checkpoint_sha256: hash_file(&checkpoint)?,
            index_sha256: hash_file(&index_path)?,
            train_config: read_manifest(run, "train").ok().map(|m| m.config),
            loaded_at_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
        };
        let paths = BundlePaths {
            nodes: inputs.nodes,
            train_edges: inputs.train_edges,
            split: inputs.split,
            sem_nn_edges: inputs.sem_nn.expect("located with sem_nn"),
            embeddings,
            checkpoint,
            index: index_path,
        };
        Ok(EngineBundle {
            paths,
            split,
            params,
            recommender,
            metadata,
        })
    }

    pub fn paths(&self) -> &BundlePaths {
        &self.paths
    }

    /// Artifact files in a fixed order, for manifests.
    pub fn input_files(&self) -> Vec<&Path> {
        let p = &self.paths;
        [&p.nodes, &p.train_edges, &p.split, &p.sem_nn_edges, &p.embeddings, &p.checkpoint, &p.index]
            .into_iter()
            .map(PathBuf::as_path)
            .collect()
    }

    pub fn split(&self) -> &TemporalSplit {
        &self.split
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn recommender(&self) -> &Recommender {
        &self.recommender
    }

    pub fn metadata(&self) -> &BuildMetadata {
        &self.metadata
    }

    pub fn hybrid(&self) -> &HybridConfig {
        &self.metadata.hybrid
    }

    pub fn candidates(&self, author: &str) -> Result<Vec<Candidate>> {
        Ok(self.recommender.candidates(author, self.hybrid().candidate_pool)?)
    }

    /// The recommend path shared by the CLI and the service. `k` beyond the
    /// pool size yields the whole pool.
    pub fn recommend(&self, author: &str, k: usize, alpha: f64) -> Result<RecommendResponse> {
        let config = HybridConfig {
            alpha,
            ..self.hybrid().clone()
        };
        let items = self.recommender.recommend(author, k, &config)?;
        Ok(RecommendResponse {
            query: author.to_string(),
            alpha,
            items,
        })
    }
}
