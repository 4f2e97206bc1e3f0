//! File names inside the corpus and run directories, and the split file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use coldrec::hetgraph::{build_graph, read_edges, read_nodes, HeteroGraph, RelationSchema, TemporalSplit};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const NODES: &str = "nodes.jsonl";
pub const EDGES: &str = "edges.tsv";
pub const EMBEDDINGS: &str = "embeddings.tgem";

pub const TRAIN_EDGES: &str = "train_edges.tsv";
pub const SPLIT: &str = "split.json";
pub const SEM_NN_EDGES: &str = "sem_nn_edges.tsv";
pub const INDEX: &str = "index.tgix";
pub const MODEL: &str = "model.tgmd";
pub const LOSS_HISTORY: &str = "loss_history.csv";
pub const REPORT: &str = "report.json";
pub const SWEEP: &str = "sweep.csv";
pub const LATENCY: &str = "latency.json";

/// Everything about a split except the train view itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train_cutoff_year: i32,
    pub test_start_year: i32,
    pub cold_queries: BTreeSet<String>,
    pub test_positives: BTreeMap<String, BTreeSet<String>>,
}

impl SplitFile {
    pub fn of(split: &TemporalSplit) -> Self {
        SplitFile {
            train_cutoff_year: split.train_cutoff_year(),
            test_start_year: split.test_start_year(),
            cold_queries: split.cold_queries().clone(),
            test_positives: split.test_positives().clone(),
        }
    }
}

/// Fails with `missing <what>: <path>` when the file is absent.
pub fn require(path: PathBuf, what: &'static str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Missing { what, path })
    }
}

pub fn read_split_file(path: &Path) -> Result<SplitFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io("read split", path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        what: format!("split file {}", path.display()),
        detail: e.to_string(),
    })
}

pub fn write_split_file(path: &Path, split: &SplitFile) -> Result<()> {
    let text = serde_json::to_string_pretty(split).expect("split serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io("write split", path, e))
}

/// Paths of the artifacts a loaded split is assembled from.
pub struct SplitInputs {
    pub nodes: PathBuf,
    pub train_edges: PathBuf,
    pub split: PathBuf,
    pub sem_nn: Option<PathBuf>,
}

impl SplitInputs {
    pub fn locate(corpus: &Path, run: &Path, with_sem_nn: bool) -> Result<Self> {
        Ok(SplitInputs {
            nodes: require(corpus.join(NODES), "corpus nodes")?,
            train_edges: require(run.join(TRAIN_EDGES), "train edges")?,
            split: require(run.join(SPLIT), "split")?,
            sem_nn: if with_sem_nn {
                Some(require(run.join(SEM_NN_EDGES), "semantic k-NN edges")?)
            } else {
                None
            },
        })
    }

    pub fn paths(&self) -> Vec<&Path> {
        let mut v = vec![self.nodes.as_path(), self.train_edges.as_path(), self.split.as_path()];
        v.extend(self.sem_nn.as_deref());
        v
    }

    /// The split, unchecked. Consumers run the leakage guard themselves.
    pub fn load(&self) -> Result<TemporalSplit> {
        let nodes = read_nodes(&self.nodes)?;
        let mut edges = read_edges(&self.train_edges)?;
        if let Some(p) = &self.sem_nn {
            edges.extend(read_edges(p)?);
        }
        let g: HeteroGraph = build_graph(nodes, &edges, RelationSchema::academic())?;
        let s = read_split_file(&self.split)?;
        Ok(TemporalSplit::from_parts(
            s.train_cutoff_year,
            s.test_start_year,
            g,
            s.test_positives,
            s.cold_queries,
        ))
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io("create directory", path, e))
}
