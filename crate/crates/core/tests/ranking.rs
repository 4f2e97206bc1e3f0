use std::collections::BTreeSet;

use coldrec::annindex::HnswParams;
use coldrec::hetgraph::{build_graph, time_machine_split, EdgeRecord, NodeRecord, RelationSchema, TemporalSplit, AUTHOR, COAUTHOR};
use coldrec::rankeval::*;
use coldrec::semfactory::EmbeddingTable;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference metrics written from the textbook definitions, without sharing
// code with the library.

fn ref_recall(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    let top: BTreeSet<&String> = ranked.iter().take(k).collect();
    let hits = truth.iter().filter(|t| top.contains(t)).count();
    hits as f64 / std::cmp::min(truth.len(), k) as f64
}

fn ref_ndcg(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (pos, id) in ranked.iter().enumerate() {
        let rank = pos + 1;
        if rank > k {
            break;
        }
        if truth.contains(id) {
            dcg += 1.0 / (rank as f64 + 1.0).log2();
        }
    }
    let mut idcg = 0.0;
    for rank in 1..=std::cmp::min(truth.len(), k) {
        idcg += 1.0 / (rank as f64 + 1.0).log2();
    }
    dcg / idcg
}

fn ref_mrr(ranked: &[String], truth: &BTreeSet<String>) -> f64 {
    for (pos, id) in ranked.iter().enumerate() {
        if truth.contains(id) {
            return 1.0 / (pos + 1) as f64;
        }
    }
    0.0
}

#[test]
fn metrics_match_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let universe: Vec<String> = (0..rng.random_range(2..60)).map(|i| format!("i{i}")).collect();
        let mut ranked = universe.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(1..=ranked.len()));
        let n_truth = rng.random_range(1..=universe.len());
        let truth: BTreeSet<String> = universe
            .choose_multiple(&mut rng, n_truth)
            .cloned()
            .collect();
        for k in [1, 2, 3, 5, 10, 20, 50] {
            let r = recall_at_k(&ranked, &truth, k).unwrap();
            let n = ndcg_at_k(&ranked, &truth, k).unwrap();
            assert!((r - ref_recall(&ranked, &truth, k)).abs() < 1e-9, "case {case} recall@{k}");
            assert!((n - ref_ndcg(&ranked, &truth, k)).abs() < 1e-9, "case {case} ndcg@{k}");
            assert!((0.0..=1.0).contains(&r) && (0.0..=1.0 + 1e-12).contains(&n));
        }
        let m = mrr(&ranked, &truth).unwrap();
        assert!((m - ref_mrr(&ranked, &truth)).abs() < 1e-9, "case {case} mrr");
    }
}

#[test]
fn hit_count_is_nondecreasing_in_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut ranked: Vec<String> = (0..30).map(|i| format!("i{i}")).collect();
        ranked.shuffle(&mut rng);
        let truth: BTreeSet<String> = (0..rng.random_range(1..30)).map(|i| format!("i{i}")).collect();
        let hits = |k: usize| recall_at_k(&ranked, &truth, k).unwrap() * truth.len().min(k) as f64;
        for k in 1..30 {
            assert!(hits(k + 1) + 1e-9 >= hits(k));
        }
    }
}

/// Warm chain `w0 - w1 - w2 - w3` and cold authors each paired with one
/// held-out partner. Cold `cN` sits exactly on its partner's direction when
/// `aligned`, otherwise opposite to it.
fn fixture(cold: &[(&str, &str, bool)], same_views: bool) -> (TemporalSplit, Recommender) {
    let warm = ["w0", "w1", "w2", "w3"];
    let mut nodes: Vec<NodeRecord> = warm.iter().map(|w| NodeRecord::new(*w, AUTHOR)).collect();
    let mut edges: Vec<EdgeRecord> = warm
        .windows(2)
        .map(|p| EdgeRecord::new(p[0], p[1], COAUTHOR, 2019))
        .collect();
    for (c, partner, _) in cold {
        nodes.push(NodeRecord::new(*c, AUTHOR));
        edges.push(EdgeRecord::new(*c, *partner, COAUTHOR, 2025));
    }
    let g = build_graph(nodes, &edges, RelationSchema::academic()).unwrap();
    let split = time_machine_split(&g, 2022, 2024).unwrap();

    let angle = |i: usize| i as f32 * 0.4;
    let mut sem = EmbeddingTable::new(2);
    let mut st = EmbeddingTable::new(2);
    for (i, w) in warm.iter().enumerate() {
        sem.push(w, &[angle(i).cos(), angle(i).sin()]).unwrap();
        let b = if same_views { angle(i) } else { 2.0 - angle(i) };
        st.push(w, &[b.cos(), b.sin()]).unwrap();
    }
    for (c, partner, aligned) in cold {
        let i = warm.iter().position(|w| w == partner).unwrap();
        let a = if *aligned { angle(i) } else { angle(i) + std::f32::consts::PI };
        sem.push(c, &[a.cos(), a.sin()]).unwrap();
        let b = if same_views { a } else { 2.0 - a };
        st.push(c, &[b.cos(), b.sin()]).unwrap();
    }
    let r = Recommender::build(&split, sem, st, HnswParams::default()).unwrap();
    (split, r)
}

fn small_config() -> HybridConfig {
    HybridConfig {
        alpha: 0.95,
        candidate_pool: 4,
        k_values: vec![1],
    }
}

#[test]
fn single_perfect_query() {
    let (split, r) = fixture(&[("c0", "w2", true)], true);
    let rep = evaluate(&split, &r, &small_config()).unwrap();
    assert_eq!(rep.queries, 1);
    for m in &rep.methods {
        assert_eq!(m.metrics.recall[&1], 1.0, "{}", m.method);
        assert_eq!(m.metrics.mrr, 1.0);
    }
    let ten = HybridConfig {
        candidate_pool: 10,
        k_values: vec![10],
        ..small_config()
    };
    let rep = evaluate(&split, &r, &ten).unwrap();
    assert_eq!(rep.method(HYBRID).unwrap().metrics.recall[&10], 1.0);
    assert_eq!(rep.method(HYBRID).unwrap().metrics.mrr, 1.0);
}

#[test]
fn one_perfect_one_miss_averages_to_half() {
    // c1 points away from w0, so w0 ranks last among four warm authors.
    let (split, r) = fixture(&[("c0", "w2", true), ("c1", "w0", false)], true);
    let config = HybridConfig {
        candidate_pool: 2,
        ..small_config()
    };
    let rep = evaluate(&split, &r, &config).unwrap();
    assert_eq!(rep.queries, 2);
    let h = &rep.method(HYBRID).unwrap().metrics;
    assert_eq!(h.recall[&1], 0.5);
    assert_eq!(h.mrr, 0.5);
    let per = &rep.method(HYBRID).unwrap().per_query;
    assert_eq!(per.iter().map(|q| q.query.as_str()).collect::<Vec<_>>(), ["c0", "c1"]);
}

#[test]
fn parallel_and_serial_reports_agree() {
    let (split, r) = fixture(&[("c0", "w2", true), ("c1", "w0", false), ("c2", "w3", true)], false);
    let config = HybridConfig {
        candidate_pool: 4,
        k_values: vec![1, 3],
        ..small_config()
    };
    let a = evaluate_with(&split, &r, &config, true).unwrap();
    let b = evaluate_with(&split, &r, &config, false).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.list_metrics_k, 1);
    for m in &a.methods {
        let x = &m.metrics;
        assert!(x.recall.values().chain(x.ndcg.values()).all(|v| (0.0..=1.0).contains(v)));
        assert!((0.0..=1.0).contains(&x.mrr));
    }
}

#[test]
fn sweep_rejects_out_of_range_alpha() {
    let (split, r) = fixture(&[("c0", "w2", true)], true);
    let err = sweep_alpha(&split, &r, &small_config(), &[0.0, 1.2, 1.0]).unwrap_err();
    assert!(err.to_string().contains("1.2"), "{err}");
    assert!(sweep_alpha(&split, &r, &small_config(), &[]).is_err());
}

#[test]
fn identical_views_make_alpha_irrelevant() {
    let (split, r) = fixture(&[("c0", "w2", true), ("c1", "w0", false), ("c2", "w1", true)], true);
    let one = sweep_alpha(&split, &r, &small_config(), &[0.5]).unwrap();
    assert_eq!(one.len(), 1);
    let all = sweep_alpha(&split, &r, &small_config(), &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    for p in &all {
        assert_eq!(p.recall_at_10, one[0].recall_at_10);
        assert_eq!(p.ndcg_at_10, one[0].ndcg_at_10);
    }
    let csv = sweep_csv(&all);
    assert!(csv.starts_with("alpha,recall_at_10,ndcg_at_10\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn evaluate_refuses_leaky_split() {
    let (split, r) = fixture(&[("c0", "w2", true)], true);
    let leak = [EdgeRecord::new("w0", "w3", COAUTHOR, 2025)];
    let err = split.with_train_edges(&leak).and_then(|s| evaluate(&s, &r, &small_config()).map(|_| ()));
    let msg = err.unwrap_err().to_string();
    assert!(msg.contains("w0") && msg.contains("w3"), "{msg}");
}
