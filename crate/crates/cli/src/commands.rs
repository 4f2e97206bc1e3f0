use std::io::Write;
use std::path::Path;

use coldrec::annindex::{build_semantic_knn_edges, HnswIndex, HnswParams};
use coldrec::hetgraph::{assert_no_leakage, read_graph, time_machine_split, write_edges, write_nodes, RelationSchema};
use coldrec::hgtcore::{loss_history_csv, train_cvcl_with, CvclConfig, HgtConfig};
use coldrec::rankeval::{evaluate, sweep_alpha, sweep_csv, HybridConfig, RankReport, SweepPoint};
use coldrec::semfactory::{load_embeddings, synth_corpus, write_embeddings, SyntheticCorpusConfig};
use coldrec::Embeddings;

use crate::args::*;
use crate::bundle::EngineBundle;
use crate::error::{CliError, Result};
use crate::latency::{bench, BenchOptions, LatencyReport};
use crate::layout::{self, create_dir, require, write_split_file, SplitFile, SplitInputs};
use crate::manifest::{Manifest, RunRecorder};

fn years(s: &str) -> Result<Vec<i32>> {
    let bad = || CliError::Usage(format!("invalid year range {s:?}, expected a-b"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid {what} {x:?} in {s:?}")))
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io("write", path, e))
}

pub fn synth(a: &SynthArgs) -> Result<Manifest> {
    let mut rec = RunRecorder::start("synth", a, a.seed);
    let config = SyntheticCorpusConfig {
        n_authors: a.n_authors,
        n_communities: a.n_communities,
        topic_dim: a.topic_dim,
        papers_per_author_range: (a.papers_min, a.papers_max),
        train_years: years(&a.train_years)?,
        test_years: years(&a.test_years)?,
        cold_fraction: a.cold_fraction,
        noise_sigma: a.noise_sigma,
        topic_jitter: a.topic_jitter,
        edge_bias_intercept: a.beta0,
        edge_semantic_weight: a.beta1,
        edge_community_weight: a.beta2,
        seed: a.seed,
    };
    let corpus = synth_corpus(&config)?;
    create_dir(&a.out)?;
    let (nodes, edges, emb) = (a.out.join(layout::NODES), a.out.join(layout::EDGES), a.out.join(layout::EMBEDDINGS));
    write_nodes(&nodes, &corpus.nodes)?;
    write_edges(&edges, &corpus.edges)?;
    write_embeddings(&corpus.embeddings, &emb)?;
    for p in [&nodes, &edges, &emb] {
        rec.output(p);
    }
    rec.finish(&a.out)
}

pub fn split(a: &SplitArgs) -> Result<Manifest> {
    let mut rec = RunRecorder::start("split", a, a.common.seed);
    let nodes = require(a.corpus.join(layout::NODES), "corpus nodes")?;
    let edges = require(a.corpus.join(layout::EDGES), "corpus edges")?;
    rec.input(&nodes);
    rec.input(&edges);
    let g = read_graph(&nodes, &edges, RelationSchema::academic())?;
    let s = time_machine_split(&g, a.train_cutoff, a.test_start)?;
    assert_no_leakage(&s)?;
    create_dir(&a.run)?;
    let (train, file) = (a.run.join(layout::TRAIN_EDGES), a.run.join(layout::SPLIT));
    write_edges(&train, &s.train_view().edge_records())?;
    write_split_file(&file, &SplitFile::of(&s))?;
    rec.output(&train);
    rec.output(&file);
    rec.finish(&a.run)
}

fn embeddings(corpus: &Path, rec: &mut RunRecorder) -> Result<Embeddings> {
    let p = require(corpus.join(layout::EMBEDDINGS), "embeddings")?;
    rec.input(&p);
    Ok(load_embeddings(&p)?)
}

pub fn knn_graph(a: &KnnArgs) -> Result<Manifest> {
    let mut rec = RunRecorder::start("knn-graph", a, a.common.seed);
    let inputs = SplitInputs::locate(&a.dirs.corpus, &a.dirs.run, false)?;
    inputs.paths().into_iter().for_each(|p| rec.input(p));
    let split = inputs.load()?;
    let table = embeddings(&a.dirs.corpus, &mut rec)?;
    let edges = build_semantic_knn_edges(&split, &table, a.k)?;

    let g = split.train_view();
    let warm = table.subset(split.warm_authors().iter().map(|&i| g.id(i)))?;
    let params = HnswParams {
        ef_construction: a.ef_construction,
        ef_search: a.ef_search,
        seed: a.common.seed,
        ..HnswParams::with_m(a.m)
    };
    let index = HnswIndex::build(warm, params)?;

    let (edge_path, index_path) = (a.dirs.run.join(layout::SEM_NN_EDGES), a.dirs.run.join(layout::INDEX));
    write_edges(&edge_path, &edges)?;
    std::fs::write(&index_path, index.to_bytes()).map_err(|e| CliError::io("write index", &index_path, e))?;
    rec.output(&edge_path);
    rec.output(&index_path);
    rec.finish(&a.dirs.run)
}

pub fn train(a: &TrainArgs, mut on_epoch: impl FnMut(usize, f64)) -> Result<(Manifest, Vec<f64>)> {
    let mut rec = RunRecorder::start("train", a, a.common.seed);
    let inputs = SplitInputs::locate(&a.dirs.corpus, &a.dirs.run, true)?;
    inputs.paths().into_iter().for_each(|p| rec.input(p));
    let split = inputs.load()?;
    let table = embeddings(&a.dirs.corpus, &mut rec)?;
    let hgt = HgtConfig {
        layers: a.layers,
        heads: a.heads,
        hidden: a.hidden,
        seed: a.common.seed,
    };
    let cvcl = CvclConfig {
        temperature: a.temperature,
        n_neg: a.n_neg,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        strict_eq1: a.strict_eq1,
        seed: a.common.seed,
        include_cold_anchors: a.cold_anchors,
        ..CvclConfig::default()
    };
    let (params, history) = train_cvcl_with::<f32>(&split, &table, &hgt, &cvcl, &mut on_epoch)?;
    let (model, csv) = (a.dirs.run.join(layout::MODEL), a.dirs.run.join(layout::LOSS_HISTORY));
    params.save(&model)?;
    write_text(&csv, &loss_history_csv(&history))?;
    rec.output(&model);
    rec.output(&csv);
    Ok((rec.finish(&a.dirs.run)?, history))
}

fn hybrid(h: &Hybrid, k_values: Vec<usize>) -> HybridConfig {
    HybridConfig {
        alpha: h.alpha,
        candidate_pool: h.pool,
        k_values,
    }
}

fn load_bundle(dirs: &Dirs, config: HybridConfig, rec: &mut RunRecorder) -> Result<EngineBundle> {
    let b = EngineBundle::load(&dirs.corpus, &dirs.run, config)?;
    b.input_files().into_iter().for_each(|p| rec.input(p));
    Ok(b)
}

pub fn recommend(a: &RecommendArgs) -> Result<(Manifest, String)> {
    let mut rec = RunRecorder::start("recommend", a, a.common.seed);
    if a.k == 0 {
        return Err(CliError::Usage("k must be at least 1".into()));
    }
    let b = load_bundle(&a.dirs, hybrid(&a.hybrid, vec![a.k.min(a.hybrid.pool).max(1)]), &mut rec)?;
    let resp = b.recommend(&a.author, a.k, a.hybrid.alpha)?;
    let body = serde_json::to_string(&resp).expect("response serializes");
    rec.output_bytes("stdout", body.as_bytes());
    Ok((rec.finish(&a.dirs.run)?, body))
}

pub fn eval(a: &EvalArgs) -> Result<(Manifest, RankReport)> {
    let mut rec = RunRecorder::start("eval", a, a.common.seed);
    let b = load_bundle(&a.dirs, hybrid(&a.hybrid, list(&a.k_values, "k")?), &mut rec)?;
    let report = evaluate(b.split(), b.recommender(), b.hybrid())?;
    let path = a.dirs.run.join(layout::REPORT);
    write_text(&path, &(report.to_json() + "\n"))?;
    rec.output(&path);
    Ok((rec.finish(&a.dirs.run)?, report))
}

pub fn sweep(a: &SweepArgs) -> Result<(Manifest, Vec<SweepPoint>)> {
    let mut rec = RunRecorder::start("sweep-alpha", a, a.common.seed);
    let grid: Vec<f64> = list(&a.grid, "alpha")?;
    let config = HybridConfig {
        candidate_pool: a.pool,
        k_values: vec![10],
        ..HybridConfig::default()
    };
    let b = load_bundle(&a.dirs, config, &mut rec)?;
    let points = sweep_alpha(b.split(), b.recommender(), b.hybrid(), &grid)?;
    let path = a.dirs.run.join(layout::SWEEP);
    write_text(&path, &sweep_csv(&points))?;
    rec.output(&path);
    Ok((rec.finish(&a.dirs.run)?, points))
}

pub fn bench_cmd(a: &BenchArgs) -> Result<(Manifest, LatencyReport)> {
    let mut rec = RunRecorder::start("bench", a, a.common.seed);
    let b = load_bundle(&a.dirs, hybrid(&a.hybrid, vec![a.k.clamp(1, a.hybrid.pool.max(1))]), &mut rec)?;
    let opts = BenchOptions {
        queries: a.queries,
        warmup: a.warmup,
        concurrency: a.concurrency,
        k: a.k,
        alpha: a.hybrid.alpha,
        seed: a.common.seed,
    };
    let report = bench(&b, &opts)?;
    let path = a.dirs.run.join(layout::LATENCY);
    write_text(&path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    rec.output(&path);
    Ok((rec.finish(&a.dirs.run)?, report))
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let mut rec = RunRecorder::start("serve", a, a.common.seed);
    let b = load_bundle(&a.dirs, hybrid(&a.hybrid, vec![10.min(a.hybrid.pool).max(1)]), &mut rec)?;
    rec.finish(&a.dirs.run)?;
    crate::server::serve(b, &a.bind, |addr| {
        let _ = writeln!(std::io::stderr(), "listening on http://{addr}");
    })
}

/// Stdout that tolerates a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_report(r: &RankReport) {
    let ks: Vec<usize> = r.config.k_values.clone();
    let mut out = String::new();
    for m in &r.methods {
        out.push_str(&format!("{:<15} alpha={:<5}", m.method, m.alpha));
        for k in &ks {
            out.push_str(&format!(" R@{k}={:.4} N@{k}={:.4}", m.metrics.recall[k], m.metrics.ndcg[k]));
        }
        out.push_str(&format!(
            " MRR={:.4} Nov={:.3} Div={:.3}\n",
            m.metrics.mrr, m.metrics.novelty, m.metrics.diversity
        ));
    }
    emit(&out);
}

/// Runs one parsed command, printing its human-readable summary.
pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => {
            let m = synth(a)?;
            emit(&format!("wrote {} files to {}\n", m.output_hashes.len(), a.out.display()));
        }
        Command::Split(a) => {
            split(a)?;
            emit(&format!("split written to {}\n", a.run.display()));
        }
        Command::KnnGraph(a) => {
            knn_graph(a)?;
            emit(&format!("semantic k-NN edges and index written to {}\n", a.dirs.run.display()));
        }
        Command::Train(a) => {
            let (_, h) = train(a, |e, l| eprintln!("epoch {} loss {l:.6}", e + 1))?;
            let last = h.last().copied().unwrap_or(f64::NAN);
            emit(&format!("trained {} epochs, final loss {last:.6}\n", h.len()));
        }
        Command::Recommend(a) => emit(&(recommend(a)?.1 + "\n")),
        Command::Eval(a) => print_report(&eval(a)?.1),
        Command::SweepAlpha(a) => emit(&sweep_csv(&sweep(a)?.1)),
        Command::Bench(a) => {
            let (_, r) = bench_cmd(a)?;
            emit(&(serde_json::to_string_pretty(&r).expect("report serializes") + "\n"));
        }
        Command::Serve(a) => serve(a)?,
    }
    Ok(())
}
