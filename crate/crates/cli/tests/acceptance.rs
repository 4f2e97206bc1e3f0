//! End-to-end acceptance run. Prints one PASS/FAIL/SKIP line per criterion
//! and exits nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use coldrec::annindex::{exact_knn, exact_knn_rows, HnswIndex, HnswParams};
use coldrec::hetgraph::{assert_no_leakage, read_graph, time_machine_split, EdgeRecord, RelationSchema, COAUTHOR};
use coldrec::hgtcore::gradsuite::{cvcl_toy_error, primitive_errors};
use coldrec::hgtcore::infonce_loss;
use coldrec::rankeval::{mrr, ndcg_at_k, recall_at_k};
use coldrec::semfactory::{normalize_vec, EmbeddingTable};
use coldrec_cli::manifest::read_manifest;
use common::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, name: &str, f: impl FnOnce() -> Verdict) {
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {id} {name}: {detail} ({secs:.1}s)");
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// synth, split, knn-graph, train and eval with default settings; returns
/// the wall time of the whole chain.
fn default_pipeline(root: &Path) -> (Pipeline, Duration) {
    let p = Pipeline {
        corpus: root.join("corpus"),
        run: root.join("run"),
        config: root.join("empty.conf"),
    };
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(&p.config, "").unwrap();
    let t = Instant::now();
    run_ok(&["synth", "--out", s(&p.corpus)]);
    for cmd in ["split", "knn-graph", "train", "eval"] {
        p.exec_ok(cmd, &[]);
    }
    (p, t.elapsed())
}

fn recall10(report: &Value, method: &str) -> f64 {
    report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == method)
        .unwrap()["metrics"]["recall"]["10"]
        .as_f64()
        .unwrap()
}

fn ordering(p: &Pipeline, elapsed: Duration) -> Verdict {
    let r = read_json(&p.run.join("report.json"));
    let (h, sem, st) = (recall10(&r, "hybrid"), recall10(&r, "semantic_only"), recall10(&r, "structure_only"));
    let secs = elapsed.as_secs_f64();
    verdict(
        h - sem >= 0.02 && sem - st >= 0.05 && secs <= 300.0,
        format!(
            "R@10 hybrid={h:.4} semantic_only={sem:.4} structure_only={st:.4}; \
             need hybrid-sem>=0.02 (got {:+.4}) and sem-struct>=0.05 (got {:+.4}); pipeline {secs:.0}s (limit 300s)",
            h - sem,
            sem - st
        ),
    )
}

fn alpha_shape(p: &Pipeline) -> Verdict {
    p.exec_ok("sweep-alpha", &[]);
    let csv = std::fs::read_to_string(p.run.join("sweep.csv")).unwrap();
    let points: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (c[0], c[1])
        })
        .collect();
    let best = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let argmax: Vec<f64> = points.iter().filter(|p| p.1 == best).map(|p| p.0).collect();
    let curve: Vec<String> = points.iter().map(|(a, r)| format!("{a}:{r:.4}")).collect();
    verdict(
        points.len() == 7 && argmax.iter().all(|&a| a > 0.0 && a < 1.0),
        format!("argmax alpha {argmax:?} at R@10={best:.4}; curve {}", curve.join(" ")),
    )
}

fn gradients() -> Verdict {
    let prims = primitive_errors(20).unwrap();
    let (worst_name, worst) = prims
        .iter()
        .copied()
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    let e2e = cvcl_toy_error(20).unwrap();
    verdict(
        worst < 1e-3 && e2e < 1e-3,
        format!(
            "{} primitives, worst {worst_name}={worst:.2e}; end-to-end loss {e2e:.2e}; 20 seeds, tol 1e-3",
            prims.len()
        ),
    )
}

fn infonce() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for n in [1usize, 2, 4, 8] {
        let negs = vec![&v[..]; n];
        let l = infonce_loss(&v, &v, &negs, 0.1, false).unwrap() as f64;
        let err = (l - (1.0 + n as f64).ln()).abs();
        worst = worst.max(err);
        parts.push(format!("n={n}:{l:.7}"));
    }
    let strict = infonce_loss(&v, &v, &[&v[..]], 0.1, true).unwrap() as f64;
    worst = worst.max(strict.abs());
    verdict(
        worst < 1e-6,
        format!("{} strict={strict:.1e}; max error {worst:.1e} (tol 1e-6)", parts.join(" ")),
    )
}

fn unit_vectors(n: usize, dim: usize, rng: &mut ChaCha8Rng, prefix: &str) -> EmbeddingTable<f32> {
    let mut t = EmbeddingTable::new(dim);
    for i in 0..n {
        let mut v: Vec<f32> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        normalize_vec(&mut v);
        t.push(&format!("{prefix}{i:05}"), &v).unwrap();
    }
    t
}

fn ann_fidelity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let table = unit_vectors(10_000, 64, &mut rng, "v");
    let queries = unit_vectors(500, 64, &mut rng, "q");
    let params = HnswParams {
        seed: 7,
        ..HnswParams::default()
    };
    let index = HnswIndex::build(table.clone(), params).unwrap();
    let mut total = 0.0;
    for (_, q) in queries.iter() {
        let truth: HashSet<usize> = exact_knn_rows(&table, q, 10).unwrap().into_iter().map(|x| x.0).collect();
        let got = index.search_rows(q, 10, 64).unwrap();
        total += got.iter().filter(|(r, _)| truth.contains(r)).count() as f64 / 10.0;
    }
    let recall = total / 500.0;

    let mut mismatches = 0;
    let mut cases = 0;
    for n in [1usize, 2, 17, 64, 129, 200, 256] {
        let table = unit_vectors(n, 32, &mut rng, "t");
        let index = HnswIndex::build(table.clone(), HnswParams::default()).unwrap();
        for (_, q) in unit_vectors(20, 32, &mut rng, "q").iter() {
            for k in [1, n.min(10), n] {
                let ids = |v: Vec<(String, f32)>| v.into_iter().map(|x| x.0).collect::<Vec<_>>();
                cases += 1;
                if ids(index.search(q, k, n).unwrap()) != ids(exact_knn(&table, q, k).unwrap()) {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        recall >= 0.95 && mismatches == 0,
        format!("mean recall@10 {recall:.4} (need 0.95, M={}); ef=n exact on {}/{cases} small-table queries", params.m, cases - mismatches),
    )
}

fn ref_recall(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    let hits = ranked.iter().take(k).filter(|x| truth.contains(*x)).count();
    hits as f64 / truth.len().min(k) as f64
}

fn ref_ndcg(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, x)| truth.contains(*x))
        .map(|(i, _)| 1.0 / (i as f64 + 2.0).log2())
        .sum();
    let idcg: f64 = (0..truth.len().min(k)).map(|i| 1.0 / (i as f64 + 2.0).log2()).sum();
    dcg / idcg
}

fn ref_mrr(ranked: &[String], truth: &BTreeSet<String>) -> f64 {
    ranked
        .iter()
        .position(|x| truth.contains(x))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

fn metric_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let universe: Vec<String> = (0..rng.random_range(2..80)).map(|i| format!("x{i}")).collect();
        let mut ranked = universe.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(1..=ranked.len()));
        let n_truth = rng.random_range(1..=universe.len());
        let truth: BTreeSet<String> = universe.choose_multiple(&mut rng, n_truth).cloned().collect();
        for k in [1, 3, 5, 10, 20, 50] {
            worst = worst.max((recall_at_k(&ranked, &truth, k).unwrap() - ref_recall(&ranked, &truth, k)).abs());
            worst = worst.max((ndcg_at_k(&ranked, &truth, k).unwrap() - ref_ndcg(&ranked, &truth, k)).abs());
        }
        worst = worst.max((mrr(&ranked, &truth).unwrap() - ref_mrr(&ranked, &truth)).abs());
    }
    let one = |x: &str| BTreeSet::from([x.to_string()]);
    let ndcg2 = ndcg_at_k(&["a", "t"], &one("t"), 2).unwrap();
    let mrr3 = mrr(&["a", "b", "t", "u"], &one("t")).unwrap();
    let hand = (ndcg2 - 1.0 / 3f64.log2()).abs().max((mrr3 - 1.0 / 3.0).abs());
    verdict(
        worst < 1e-9 && hand < 1e-9,
        format!("200 random instances, max deviation {worst:.1e}; NDCG@2 rank-2 hit={ndcg2:.5}, MRR rank-3 hit={mrr3:.5}"),
    )
}

fn leakage(root: &Path) -> Verdict {
    let p = small_pipeline(root);
    p.exec_ok("eval", &[]);
    let g = read_graph(&p.corpus.join("nodes.jsonl"), &p.corpus.join("edges.tsv"), RelationSchema::academic()).unwrap();
    let split = time_machine_split(&g, 2022, 2024).unwrap();
    let clean = assert_no_leakage(&split).is_ok();
    let (a, b) = inject_leak(&p.run);
    let leaked = split
        .with_train_edges(&[EdgeRecord::new(&a, &b, COAUTHOR, 2025)])
        .unwrap();
    let lib_msg = assert_no_leakage(&leaked).map_or_else(|e| e.to_string(), |_| String::new());
    let names_edge = |m: &str| m.contains(&a) && m.contains(&b) && m.contains("2025");
    let mut failures = Vec::new();
    if !clean {
        failures.push("clean split rejected".to_string());
    }
    if !names_edge(&lib_msg) {
        failures.push(format!("guard: {lib_msg:?}"));
    }
    for cmd in ["knn-graph", "train", "eval"] {
        let out = p.exec(cmd, &[]);
        let err = stderr(&out);
        if out.status.success() || !names_edge(&err) || !err.contains("\"leakage\"") {
            failures.push(format!("{cmd}: exit {:?} {}", out.status.code(), err.trim()));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("edge {a} -> {b} [coauthor, 2025] rejected by the guard and by knn-graph, train, eval: {lib_msg}")
        } else {
            failures.join("; ")
        },
    )
}

fn latency(p: &Pipeline) -> Verdict {
    p.exec_ok("bench", &[]);
    let r = read_json(&p.run.join("latency.json"));
    let e2e = r["end_to_end"]["p50_us"].as_f64().unwrap();
    let rerank = r["rerank"]["p50_us"].as_f64().unwrap();
    let hw = &r["hardware"];
    verdict(
        e2e < 10_000.0 && rerank < 5_000.0 && r["concurrency"] == 1 && r["queries"] == 1000,
        format!(
            "p50 end-to-end {e2e:.1}us (<10ms), rerank {rerank:.1}us (<5ms), p99 end-to-end {:.1}us, {:.0} qps; {} cpus, {} {}, {}",
            r["end_to_end"]["p99_us"].as_f64().unwrap(),
            r["throughput_qps"].as_f64().unwrap(),
            hw["logical_cpus"],
            hw["os"].as_str().unwrap_or("?"),
            hw["arch"].as_str().unwrap_or("?"),
            hw["cpu_model"].as_str().unwrap_or("unknown cpu"),
        ),
    )
}

fn scaling(p: &Pipeline) -> Verdict {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cpus < 4 {
        return Verdict::Skip(format!("{cpus} logical cpu(s); the concurrency-8 scaling check needs at least 4"));
    }
    let qps = |c: &str| {
        let out = p.exec_ok("bench", &["--concurrency", c]);
        serde_json::from_slice::<Value>(&out.stdout).unwrap()["throughput_qps"].as_f64().unwrap()
    };
    let (one, eight) = (qps("1"), qps("8"));
    verdict(eight >= 3.0 * one, format!("{one:.0} qps at 1, {eight:.0} qps at 8 ({:.2}x, need 3x)", eight / one))
}

const STAGES: [(&str, bool); 5] = [
    ("synth", true),
    ("split", false),
    ("knn-graph", false),
    ("train", false),
    ("eval", false),
];

/// Input and output hashes per stage.
type StageHashes = BTreeMap<&'static str, (BTreeMap<String, String>, BTreeMap<String, String>)>;

fn hashes(p: &Pipeline) -> StageHashes {
    STAGES
        .iter()
        .map(|&(stage, in_corpus)| {
            let dir = if in_corpus { &p.corpus } else { &p.run };
            let m = read_manifest(dir, stage).unwrap();
            (stage, (m.input_hashes, m.output_hashes))
        })
        .collect()
}

fn determinism(first: &Pipeline, root: &Path) -> Verdict {
    let (second, _) = default_pipeline(root);
    let (a, b) = (hashes(first), hashes(&second));
    let differing: Vec<&str> = STAGES.iter().map(|s| s.0).filter(|s| a[s] != b[s]).collect();
    let files: usize = a.values().map(|(_, o)| o.len()).sum();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("default pipeline rerun: {files} output hashes identical across synth, split, knn-graph, train, eval")
        } else {
            format!("hashes differ in {differing:?}")
        },
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut report = Report { failed: 0 };
    let pipeline = catch_unwind(|| default_pipeline(&tmp.path().join("default")));

    match &pipeline {
        Ok((p, elapsed)) => {
            report.check("AC1", "hybrid > semantic > structure ordering", || ordering(p, *elapsed));
            report.check("AC2", "alpha sweep argmax is interior", || alpha_shape(p));
        }
        Err(_) => {
            for id in ["AC1", "AC2", "AC8", "AC9"] {
                report.check(id, "default pipeline", || Verdict::Fail("default pipeline did not complete".into()));
            }
        }
    }
    report.check("AC3", "gradient check", gradients);
    report.check("AC4", "InfoNCE closed forms", infonce);
    report.check("AC5", "HNSW fidelity", ann_fidelity);
    report.check("AC6", "metric oracle", metric_oracle);
    report.check("AC7", "leakage guard", || leakage(&tmp.path().join("leak")));
    if let Ok((p, _)) = &pipeline {
        report.check("AC8", "latency envelope", || latency(p));
        report.check("AC8", "concurrency scaling", || scaling(p));
        report.check("AC9", "determinism", || determinism(p, &tmp.path().join("rerun")));
    }
    println!(
        "acceptance: {}",
        if report.failed == 0 {
            "all criteria met".to_string()
        } else {
            format!("{} criterion check(s) failed", report.failed)
        }
    );
    if report.failed > 0 {
        std::process::exit(1);
    }
}
