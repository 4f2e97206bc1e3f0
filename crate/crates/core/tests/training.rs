use coldrec::annindex::build_semantic_knn_edges;
use coldrec::hetgraph::{build_graph, time_machine_split, RelationSchema, TemporalSplit};
use coldrec::hgtcore::*;
use coldrec::semfactory::{synth_corpus, EmbeddingTable, SyntheticCorpusConfig};

fn prepared(config: &SyntheticCorpusConfig) -> (TemporalSplit, EmbeddingTable<f32>) {
    let c = synth_corpus(config).unwrap();
    let g = build_graph(c.nodes, &c.edges, RelationSchema::academic()).unwrap();
    let split = time_machine_split(&g, 2022, 2024).unwrap();
    let knn = build_semantic_knn_edges(&split, &c.embeddings, 10).unwrap();
    (split.with_train_edges(&knn).unwrap(), c.embeddings)
}

fn small() -> (TemporalSplit, EmbeddingTable<f32>) {
    prepared(&SyntheticCorpusConfig {
        n_authors: 150,
        n_communities: 3,
        topic_dim: 8,
        ..Default::default()
    })
}

fn small_hgt() -> HgtConfig {
    HgtConfig {
        layers: 1,
        heads: 2,
        hidden: 8,
        seed: 3,
    }
}

fn small_cvcl(epochs: usize, lr: f64) -> CvclConfig {
    CvclConfig {
        n_neg: 4,
        batch_size: 32,
        epochs,
        learning_rate: lr,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_bit_identical_history() {
    let (split, feats) = small();
    let (p1, h1) = train_cvcl::<f32>(&split, &feats, &small_hgt(), &small_cvcl(3, 1e-2)).unwrap();
    let (p2, h2) = train_cvcl::<f32>(&split, &feats, &small_hgt(), &small_cvcl(3, 1e-2)).unwrap();
    assert_eq!(h1.len(), 3);
    assert_eq!(h1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), h2.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(p1.to_bytes(), p2.to_bytes());
    let other = CvclConfig {
        seed: 1,
        ..small_cvcl(3, 1e-2)
    };
    let (_, h3) = train_cvcl::<f32>(&split, &feats, &small_hgt(), &other).unwrap();
    assert_ne!(h1, h3);
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let (split, feats) = small();
    let (p, h) = train_cvcl::<f32>(&split, &feats, &small_hgt(), &small_cvcl(4, 0.0)).unwrap();
    for x in &h {
        assert!((x - h[0]).abs() < 1e-6, "{h:?}");
    }
    let init = HgtParams::<f32>::init(small_hgt(), 8, split.train_view().schema().clone()).unwrap();
    assert_eq!(p.to_bytes(), init.to_bytes());
}

#[test]
fn training_rejects_leaky_split() {
    let (split, feats) = small();
    let leak = [coldrec::hetgraph::EdgeRecord::new("A00000", "A00001", coldrec::hetgraph::COAUTHOR, 2025)];
    let bad = split.with_train_edges(&leak).unwrap();
    let err = train_cvcl::<f32>(&bad, &feats, &small_hgt(), &small_cvcl(1, 1e-2)).unwrap_err();
    assert!(err.to_string().contains("A00000"), "{err}");
}

#[test]
fn hidden_must_match_feature_dim() {
    let (split, feats) = small();
    let hgt = HgtConfig {
        hidden: 12,
        ..small_hgt()
    };
    assert!(train_cvcl::<f32>(&split, &feats, &hgt, &small_cvcl(1, 1e-2)).is_err());
}

#[test]
fn checkpoint_round_trip_preserves_embeddings() {
    let (split, feats) = small();
    let (p, _) = train_cvcl::<f32>(&split, &feats, &small_hgt(), &small_cvcl(2, 1e-2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.tgmd");
    p.save(&path).unwrap();
    let q = HgtParams::<f32>::load(&path).unwrap();
    let a = StructuralEncoder::new(p, split.train_view().clone(), &feats).unwrap().encode_authors().unwrap();
    let b = StructuralEncoder::new(q, split.train_view().clone(), &feats).unwrap().encode_authors().unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    for i in 0..a.len() {
        let n: f32 = a.row(i).iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-5);
    }
}

#[test]
fn loss_falls_over_first_five_epochs_on_default_benchmark() {
    let (split, feats) = prepared(&SyntheticCorpusConfig::default());
    let config = CvclConfig {
        epochs: 5,
        ..Default::default()
    };
    let (_, h) = train_cvcl::<f32>(&split, &feats, &HgtConfig::default(), &config).unwrap();
    assert!(h[4] < h[0], "{h:?}");
    let csv = loss_history_csv(&h);
    assert!(csv.starts_with("epoch,mean_loss\n1,"));
    assert_eq!(csv.lines().count(), 6);
}
