//! Finite-difference checks of every tape primitive and of the full
//! contrastive loss on a five-node graph. Each check reports the worst
//! relative error over a range of seeds, with the analytic side in `f32`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forward::{hgt_forward, node_features, MessageGraph};
use super::gradcheck::{grad_check, TapeFn};
use super::loss::infonce_on_tape;
use super::params::{HgtConfig, HgtParams};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::hetgraph::{build_graph, EdgeRecord, HeteroGraph, NodeRecord, RelationSchema, AUTHOR, COAUTHOR, PAPER, SEM_NN, WRITES};
use crate::scalar::Scalar;
use crate::semfactory::EmbeddingTable;

/// Central-difference step.
pub const EPS: f64 = 1e-3;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).expect("shape matches data")
}

/// `sum(op(inputs) * w)` for a fixed random `w`, so every output entry
/// carries a distinct weight.
struct Probe<F> {
    op: F,
    weight: Tensor<f64>,
}

trait Op {
    fn apply<T: Scalar>(&self, tape: &mut Tape<T>, x: &[Var]) -> Result<Var>;
}

impl<F: Op> TapeFn for Probe<F> {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var> {
        let y = self.op.apply(tape, inputs)?;
        let w = tape.constant(self.weight.cast());
        let p = tape.mul(y, w)?;
        Ok(tape.sum(p))
    }
}

macro_rules! op {
    ($name:ident, |$tape:ident, $x:ident| $body:expr) => {
        #[derive(Clone, Copy)]
        struct $name;
        impl Op for $name {
            fn apply<T: Scalar>(&self, $tape: &mut Tape<T>, $x: &[Var]) -> Result<Var> {
                $body
            }
        }
    };
}

op!(MatMul, |t, x| t.matmul(x[0], x[1]));
op!(Add, |t, x| t.add(x[0], x[1]));
op!(Sub, |t, x| t.sub(x[0], x[1]));
op!(Mul, |t, x| t.mul(x[0], x[1]));
op!(ScalarScale, |t, x| Ok(t.scalar_scale(x[0], T::of(-1.7))));
op!(ScaleBy, |t, x| t.scale_by(x[0], x[1]));
op!(MulRows, |t, x| t.mul_rows(x[0], x[1]));
op!(RowSoftmax, |t, x| Ok(t.row_softmax(x[0])));
op!(Gelu, |t, x| Ok(t.gelu(x[0])));
op!(L2Normalize, |t, x| Ok(t.l2_normalize(x[0])));
op!(Dot, |t, x| t.dot(x[0], x[1]));
op!(Concat, |t, x| t.concat(&[x[0], x[1], x[0]]));
op!(ConcatRows, |t, x| t.concat_rows(&[x[0], x[1]]));
op!(LogSumExp, |t, x| Ok(t.log_sum_exp(x[0])));
op!(GatherRows, |t, x| t.gather_rows(x[0], Arc::from(vec![2, 0, 2, 1])));
op!(SliceCols, |t, x| t.slice_cols(x[0], 1, 2));
op!(Reshape, |t, x| t.reshape(x[0], 2, 6));
op!(SegmentSoftmax, |t, x| t.segment_softmax(x[0], Arc::from(vec![0, 3, 3, 6])));
op!(SegmentSoftmax2, |t, x| t.segment_softmax(x[0], Arc::from(vec![0, 2, 5])));
op!(BlockDiag, |t, x| t.block_diag(&[x[0], x[1], x[0]]));
op!(SegmentSum, |t, x| t.segment_sum(x[0], Arc::from(vec![0, 1, 4, 4])));
op!(Sum, |t, x| Ok(t.sum(x[0])));
op!(Mean, |t, x| Ok(t.mean(x[0])));

fn worst_over_seeds<F: Op + Copy>(op: F, shapes: &[(usize, usize)], out: (usize, usize), seeds: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<_> = shapes.iter().map(|&(r, c)| random(&mut rng, r, c)).collect();
        let probe = Probe {
            op,
            weight: random(&mut rng, out.0, out.1),
        };
        worst = worst.max(grad_check::<f32, _>(&probe, &inputs, EPS)?);
    }
    Ok(worst)
}

/// Worst relative error per primitive over seeds `0..seeds`.
pub fn primitive_errors(seeds: u64) -> Result<Vec<(&'static str, f64)>> {
    Ok(vec![
        ("matmul", worst_over_seeds(MatMul, &[(3, 4), (4, 2)], (3, 2), seeds)?),
        ("add", worst_over_seeds(Add, &[(2, 3), (2, 3)], (2, 3), seeds)?),
        ("sub", worst_over_seeds(Sub, &[(2, 3), (2, 3)], (2, 3), seeds)?),
        ("mul", worst_over_seeds(Mul, &[(2, 3), (2, 3)], (2, 3), seeds)?),
        ("scalar_scale", worst_over_seeds(ScalarScale, &[(2, 3)], (2, 3), seeds)?),
        ("scale_by", worst_over_seeds(ScaleBy, &[(2, 3), (1, 1)], (2, 3), seeds)?),
        ("mul_rows", worst_over_seeds(MulRows, &[(3, 2), (3, 1)], (3, 2), seeds)?),
        ("row_softmax", worst_over_seeds(RowSoftmax, &[(3, 4)], (3, 4), seeds)?),
        ("gelu", worst_over_seeds(Gelu, &[(3, 4)], (3, 4), seeds)?),
        ("l2_normalize", worst_over_seeds(L2Normalize, &[(3, 4)], (3, 4), seeds)?),
        ("dot", worst_over_seeds(Dot, &[(3, 4), (3, 4)], (3, 1), seeds)?),
        ("concat", worst_over_seeds(Concat, &[(2, 3), (2, 1)], (2, 7), seeds)?),
        ("concat_rows", worst_over_seeds(ConcatRows, &[(2, 3), (1, 3)], (3, 3), seeds)?),
        ("log_sum_exp", worst_over_seeds(LogSumExp, &[(3, 5)], (3, 1), seeds)?),
        ("gather_rows", worst_over_seeds(GatherRows, &[(3, 2)], (4, 2), seeds)?),
        ("slice_cols", worst_over_seeds(SliceCols, &[(3, 4)], (3, 2), seeds)?),
        ("reshape", worst_over_seeds(Reshape, &[(3, 4)], (2, 6), seeds)?),
        ("segment_softmax", worst_over_seeds(SegmentSoftmax, &[(6, 1)], (6, 1), seeds)?),
        ("segment_softmax_columns", worst_over_seeds(SegmentSoftmax2, &[(5, 3)], (5, 3), seeds)?),
        ("block_diag", worst_over_seeds(BlockDiag, &[(2, 2), (1, 3)], (5, 7), seeds)?),
        ("segment_sum", worst_over_seeds(SegmentSum, &[(4, 3)], (3, 3), seeds)?),
        ("sum", worst_over_seeds(Sum, &[(3, 4)], (1, 1), seeds)?),
        ("mean", worst_over_seeds(Mean, &[(3, 4)], (1, 1), seeds)?),
    ])
}

/// Four authors and one paper; every relation (including the derived one)
/// is present so all weight groups receive gradient.
fn toy_graph() -> HeteroGraph {
    let nodes = vec![
        NodeRecord::new("a0", AUTHOR),
        NodeRecord::new("a1", AUTHOR),
        NodeRecord::new("a2", AUTHOR),
        NodeRecord::new("a3", AUTHOR),
        NodeRecord::new("p0", PAPER),
    ];
    let edges = [
        EdgeRecord::new("a0", "a1", COAUTHOR, 2019),
        EdgeRecord::new("a1", "a2", COAUTHOR, 2020),
        EdgeRecord::new("a0", "p0", WRITES, 2020),
        EdgeRecord::new("a2", "p0", WRITES, 2021),
        EdgeRecord::new("a3", "a1", SEM_NN, 2022),
        EdgeRecord::new("a3", "a0", SEM_NN, 2022),
    ];
    build_graph(nodes, &edges, RelationSchema::academic()).expect("toy graph is valid")
}

struct Cvcl {
    params: HgtParams<f64>,
    graph: HeteroGraph,
    features: EmbeddingTable<f32>,
    negatives: Vec<[usize; 2]>,
}

impl TapeFn for Cvcl {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var> {
        let p = self.params.cast::<T>();
        let mg = MessageGraph::new(&self.graph, &p)?;
        let feats = node_features::<T>(&self.graph, &self.features)?;
        let authors = [0, 1, 2, 3];
        let enc = hgt_forward(tape, &p, inputs, &mg, &feats, &authors)?;
        let rows = |pick: &dyn Fn(usize) -> usize| {
            let r: Vec<&[T]> = enc.nodes.iter().map(|&n| feats.row(pick(n))).collect();
            Tensor::from_rows(&r)
        };
        let pos = rows(&|n| n)?;
        let negs = vec![rows(&|n| self.negatives[n][0])?, rows(&|n| self.negatives[n][1])?];
        let (loss, _) = infonce_on_tape(tape, enc.output, &pos, &negs, T::of(0.1), false)?;
        Ok(loss)
    }
}

/// Worst relative error of the contrastive loss gradient with respect to
/// every encoder weight, over seeds `0..seeds`.
pub fn cvcl_toy_error(seeds: u64) -> Result<f64> {
    let graph = toy_graph();
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut features = EmbeddingTable::new(4);
        for id in graph.ids() {
            let v: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            features.push(id, &v)?;
        }
        let cfg = HgtConfig {
            layers: 2,
            heads: 2,
            hidden: 4,
            seed,
        };
        let mut params = HgtParams::<f64>::init(cfg, 4, RelationSchema::academic())?;
        // Move the priors off 1 so their gradients are generic.
        for r in 0..params.message_relations().len() {
            let i = params.mu_index(r);
            params.tensors_mut()[i] = Tensor::scalar(rng.random_range(0.5..1.5));
        }
        let negatives = (0..4)
            .map(|a| {
                let pick = |rng: &mut ChaCha8Rng| loop {
                    let n = rng.random_range(0..4);
                    if n != a {
                        break n;
                    }
                };
                [pick(&mut rng), pick(&mut rng)]
            })
            .collect();
        let inputs = params.tensors().to_vec();
        let f = Cvcl {
            params,
            graph: graph.clone(),
            features,
            negatives,
        };
        worst = worst.max(grad_check::<f32, _>(&f, &inputs, EPS)?);
    }
    Ok(worst)
}
