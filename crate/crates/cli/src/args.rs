use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "coldrec", version, about = "Cold-start collaborator recommendation pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus (nodes, edges, embeddings).
    Synth(SynthArgs),
    /// Temporal train/test split of a corpus.
    Split(SplitArgs),
    /// Semantic k-NN edges for cold authors and the warm-author HNSW index.
    KnnGraph(KnnArgs),
    /// Train the structural encoder.
    Train(TrainArgs),
    /// Recommend collaborators for one author.
    Recommend(RecommendArgs),
    /// Evaluate on the held-out cold queries.
    Eval(EvalArgs),
    /// Recall and NDCG at 10 over a grid of alpha values.
    SweepAlpha(SweepArgs),
    /// In-process latency benchmark.
    Bench(BenchArgs),
    /// HTTP recommendation service.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Split(_) => "split",
            Command::KnnGraph(_) => "knn-graph",
            Command::Train(_) => "train",
            Command::Recommend(_) => "recommend",
            Command::Eval(_) => "eval",
            Command::SweepAlpha(_) => "sweep-alpha",
            Command::Bench(_) => "bench",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// key=value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Corpus directory (from `synth`) and run directory (everything after).
#[derive(Args, Debug, Clone, Serialize)]
pub struct Dirs {
    #[arg(long, default_value = "corpus")]
    pub corpus: PathBuf,
    #[arg(long, default_value = "run")]
    pub run: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub n_authors: usize,
    #[arg(long, default_value_t = 8)]
    pub n_communities: usize,
    #[arg(long, default_value_t = 64)]
    pub topic_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub papers_min: usize,
    #[arg(long, default_value_t = 3)]
    pub papers_max: usize,
    /// Train years, inclusive range `a-b`.
    #[arg(long, default_value = "2018-2022")]
    pub train_years: String,
    #[arg(long, default_value = "2024-2024")]
    pub test_years: String,
    #[arg(long, default_value_t = 0.1)]
    pub cold_fraction: f64,
    #[arg(long, default_value_t = 0.25)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub topic_jitter: f64,
    #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
    pub beta0: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    pub beta1: f64,
    #[arg(long, default_value_t = 2.5, allow_hyphen_values = true)]
    pub beta2: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SplitArgs {
    #[arg(long, default_value = "corpus")]
    pub corpus: PathBuf,
    /// Output run directory.
    #[arg(long, default_value = "run")]
    pub run: PathBuf,
    #[arg(long, default_value_t = 2022)]
    pub train_cutoff: i32,
    #[arg(long, default_value_t = 2024)]
    pub test_start: i32,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KnnArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    /// Semantic neighbours per cold author.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 40)]
    pub m: usize,
    #[arg(long, default_value_t = 200)]
    pub ef_construction: usize,
    #[arg(long, default_value_t = 64)]
    pub ef_search: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,
    #[arg(long, default_value_t = 32)]
    pub n_neg: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Leave the positive out of the InfoNCE denominator.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub strict_eq1: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub cold_anchors: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Hybrid {
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    /// Stage-1 candidate pool size.
    #[arg(long, default_value_t = 100)]
    pub pool: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    #[arg(long)]
    pub author: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[command(flatten)]
    pub hybrid: Hybrid,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    #[command(flatten)]
    pub hybrid: Hybrid,
    /// Comma-separated cutoffs.
    #[arg(long, default_value = "10,50")]
    pub k_values: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    #[arg(long, default_value = "0,0.25,0.5,0.75,0.9,0.95,1")]
    pub grid: String,
    #[arg(long, default_value_t = 100)]
    pub pool: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[command(flatten)]
    pub hybrid: Hybrid,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    #[command(flatten)]
    pub hybrid: Hybrid,
    #[command(flatten)]
    pub common: Common,
}
