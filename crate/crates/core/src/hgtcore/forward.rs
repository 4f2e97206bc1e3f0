use std::sync::Arc;

use super::params::{HgtParams, Proj};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::HeteroGraph;
use crate::scalar::Scalar;
use crate::semfactory::EmbeddingTable;

/// Incoming messages of every node, as `(message relation, source)` pairs
/// sorted ascending. The fixed order makes aggregation independent of edge
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageGraph {
    inbox: Vec<Vec<(u32, u32)>>,
    types: Vec<usize>,
    n_rels: usize,
}

impl MessageGraph {
    pub fn new<T: Scalar>(g: &HeteroGraph, params: &HgtParams<T>) -> Result<Self> {
        if g.schema() != params.schema() {
            return Err(Error::Schema("graph and model schemas differ".into()));
        }
        let rels = params.message_relations();
        let find = |rel: usize, reverse: bool| {
            rels.iter()
                .position(|m| m.relation == rel && m.reverse == reverse)
        };
        let mut inbox = vec![Vec::new(); g.node_count()];
        for e in g.edges() {
            let fwd = find(e.rel, false).expect("every relation has a forward direction");
            inbox[e.dst].push((fwd as u32, e.src as u32));
            let back = find(e.rel, true).unwrap_or(fwd);
            inbox[e.src].push((back as u32, e.dst as u32));
        }
        for list in &mut inbox {
            list.sort_unstable();
        }
        Ok(MessageGraph {
            inbox,
            types: (0..g.node_count()).map(|i| g.type_of(i)).collect(),
            n_rels: rels.len(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.inbox.len()
    }

    pub fn inbox(&self, node: usize) -> &[(u32, u32)] {
        &self.inbox[node]
    }

    pub fn node_type(&self, node: usize) -> usize {
        self.types[node]
    }
}

/// One row per graph node, in node order.
pub fn node_features<T: Scalar>(
    g: &HeteroGraph,
    table: &EmbeddingTable<f32>,
) -> Result<Tensor<T>> {
    let dim = table.dim();
    let mut data = Vec::with_capacity(g.node_count() * dim);
    for id in g.ids() {
        data.extend(table.require(id)?.iter().map(|&x| T::of(x as f64)));
    }
    Tensor::new(g.node_count(), dim, data)
}

/// Attention of one layer. Messages are grouped by target; the messages of
/// `targets[i]` are `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone)]
pub struct LayerAttention {
    pub targets: Vec<usize>,
    pub offsets: Vec<usize>,
    pub sources: Vec<usize>,
    pub relations: Vec<usize>,
    /// `E x heads` weights; `None` when the layer has no messages.
    pub weights: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    /// Node indices of the output rows, sorted by (type, index).
    pub nodes: Vec<usize>,
    /// Unit-norm structural embeddings, one row per entry of `nodes`.
    pub output: Var,
    pub attention: Vec<LayerAttention>,
}

impl Encoded {
    pub fn row_of(&self, node: usize) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }
}

fn sort_by_type(mg: &MessageGraph, nodes: &mut Vec<usize>) {
    nodes.sort_unstable_by_key(|&n| (mg.types[n], n));
    nodes.dedup();
}

/// Applies the per-type weight to each type block of `x` (rows aligned with
/// `nodes`, which are sorted by type).
fn project<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    nodes: &[usize],
    mg: &MessageGraph,
    weight: impl Fn(usize) -> Var,
) -> Result<Var> {
    let mut parts = Vec::new();
    let mut start = 0;
    while start < nodes.len() {
        let t = mg.types[nodes[start]];
        let end = start
            + nodes[start..]
                .iter()
                .take_while(|&&n| mg.types[n] == t)
                .count();
        let block = if start == 0 && end == nodes.len() {
            x
        } else {
            tape.gather_rows(x, (start..end).collect::<Vec<_>>().into())?
        };
        parts.push(tape.matmul(block, weight(t))?);
        start = end;
    }
    match parts.as_slice() {
        [] => Err(Error::Empty("node set".into())),
        [one] => Ok(*one),
        _ => tape.concat_rows(&parts),
    }
}

/// Structural embeddings for `targets` from their full receptive field.
///
/// `vars` are the parameter leaves from [`HgtParams::to_tape`]; `features`
/// holds one row per graph node.
pub fn hgt_forward<T: Scalar>(
    tape: &mut Tape<T>,
    params: &HgtParams<T>,
    vars: &[Var],
    mg: &MessageGraph,
    features: &Tensor<T>,
    targets: &[usize],
) -> Result<Encoded> {
    let cfg = params.config();
    if features.cols() != params.in_dim() {
        return Err(Error::DimMismatch {
            expected: params.in_dim(),
            found: features.cols(),
        });
    }
    if features.rows() != mg.node_count() {
        return Err(Error::shape(
            "hgt_forward",
            format!("{} feature rows for {} nodes", features.rows(), mg.node_count()),
        ));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= mg.node_count()) {
        return Err(Error::UnknownNode(format!("#{bad}")));
    }
    if targets.is_empty() {
        return Err(Error::Empty("target set".into()));
    }

    // sets[l] holds the nodes whose layer-l state is needed.
    let layers = cfg.layers;
    let mut sets = vec![Vec::new(); layers + 1];
    sets[layers] = targets.to_vec();
    sort_by_type(mg, &mut sets[layers]);
    for l in (0..layers).rev() {
        let mut s = sets[l + 1].clone();
        for &n in &sets[l + 1] {
            s.extend(mg.inbox[n].iter().map(|&(_, src)| src as usize));
        }
        sort_by_type(mg, &mut s);
        sets[l] = s;
    }

    let mut x = Vec::with_capacity(sets[0].len() * features.cols());
    for &n in &sets[0] {
        x.extend_from_slice(features.row(n));
    }
    let x = tape.constant(Tensor::new(sets[0].len(), features.cols(), x)?);
    let mut h = project(tape, x, &sets[0], mg, |t| vars[params.input_index(t)])?;

    let dk = cfg.head_dim();
    let inv_sqrt = T::one() / T::of(dk as f64).sqrt();
    let mut pos = vec![usize::MAX; mg.node_count()];
    let mut attention = Vec::with_capacity(layers);
    for l in 0..layers {
        let (prev, cur) = (&sets[l], &sets[l + 1]);
        for (i, &n) in prev.iter().enumerate() {
            pos[n] = i;
        }
        let cur_rows: Vec<usize> = cur.iter().map(|&n| pos[n]).collect();
        let hc = tape.gather_rows(h, cur_rows.into())?;

        let mut offsets = vec![0];
        let mut src_rows = Vec::new();
        let mut dst_rows = Vec::new();
        let mut rels = Vec::new();
        for (ti, &t) in cur.iter().enumerate() {
            for &(r, s) in &mg.inbox[t] {
                src_rows.push(pos[s as usize]);
                dst_rows.push(ti);
                rels.push(r as usize);
            }
            offsets.push(src_rows.len());
        }
        let mut layer_att = LayerAttention {
            targets: cur.clone(),
            offsets: offsets.clone(),
            sources: src_rows.iter().map(|&r| prev[r]).collect(),
            relations: rels.clone(),
            weights: None,
        };
        for &n in prev {
            pos[n] = usize::MAX;
        }
        if src_rows.is_empty() {
            attention.push(layer_att);
            h = hc;
            continue;
        }

        let k = project(tape, h, prev, mg, |t| vars[params.proj_index(l, Proj::K, t)])?;
        let v = project(tape, h, prev, mg, |t| vars[params.proj_index(l, Proj::V, t)])?;
        let q = project(tape, hc, cur, mg, |t| vars[params.proj_index(l, Proj::Q, t)])?;

        // Heads are handled together: block-diagonal relation weights, and
        // an indicator matrix that sums each head's slice of a row.
        let mut ind = Tensor::zeros(cfg.hidden, cfg.heads);
        for c in 0..cfg.hidden {
            ind.row_mut(c)[c / dk] = T::one();
        }
        let ind_t = {
            let mut t = Tensor::zeros(cfg.heads, cfg.hidden);
            for c in 0..cfg.hidden {
                t.row_mut(c / dk)[c] = T::one();
            }
            t
        };
        let head_sum = tape.constant(ind);
        let head_spread = tape.constant(ind_t);

        // Per relation, then restored to message order.
        let mut score_parts = Vec::new();
        let mut msg_parts = Vec::new();
        let mut order = Vec::with_capacity(rels.len());
        for r in 0..mg.n_rels {
            let idx: Vec<usize> = (0..rels.len()).filter(|&e| rels[e] == r).collect();
            if idx.is_empty() {
                continue;
            }
            order.extend_from_slice(&idx);
            let mut uniq: Vec<usize> = idx.iter().map(|&e| src_rows[e]).collect();
            uniq.sort_unstable();
            uniq.dedup();
            let local: Arc<[usize]> = idx
                .iter()
                .map(|&e| uniq.binary_search(&src_rows[e]).expect("present"))
                .collect();
            let dsts: Arc<[usize]> = idx.iter().map(|&e| dst_rows[e]).collect();
            let uniq: Arc<[usize]> = uniq.into();

            let att: Vec<Var> = (0..cfg.heads).map(|h| vars[params.att_index(l, r, h)]).collect();
            let msg: Vec<Var> = (0..cfg.heads).map(|h| vars[params.msg_index(l, r, h)]).collect();
            let att = tape.block_diag(&att)?;
            let msg = tape.block_diag(&msg)?;
            let ku = tape.gather_rows(k, uniq.clone())?;
            let ka = tape.matmul(ku, att)?;
            let ka = tape.gather_rows(ka, local.clone())?;
            let vu = tape.gather_rows(v, uniq)?;
            let vm = tape.matmul(vu, msg)?;
            msg_parts.push(tape.gather_rows(vm, local)?);
            let qe = tape.gather_rows(q, dsts)?;
            let prod = tape.mul(ka, qe)?;
            let s = tape.matmul(prod, head_sum)?;
            let s = tape.scale_by(s, vars[params.mu_index(r)])?;
            score_parts.push(tape.scalar_scale(s, inv_sqrt));
        }
        let mut perm = vec![0; order.len()];
        for (i, &e) in order.iter().enumerate() {
            perm[e] = i;
        }
        let identity = perm.iter().enumerate().all(|(i, &p)| i == p);
        let perm: Arc<[usize]> = perm.into();
        let offsets: Arc<[usize]> = offsets.into();

        let mut scores = tape.concat_rows(&score_parts)?;
        let mut msgs = tape.concat_rows(&msg_parts)?;
        if !identity {
            scores = tape.gather_rows(scores, perm.clone())?;
            msgs = tape.gather_rows(msgs, perm)?;
        }
        let weights = tape.segment_softmax(scores, offsets.clone())?;
        layer_att.weights = Some(weights);
        let spread = tape.matmul(weights, head_spread)?;
        let weighted = tape.mul(msgs, spread)?;
        let agg = tape.segment_sum(weighted, offsets)?;
        let act = tape.gelu(agg);
        let upd = project(tape, act, cur, mg, |t| vars[params.proj_index(l, Proj::A, t)])?;
        h = tape.add(hc, upd)?;
        attention.push(layer_att);
    }

    Ok(Encoded {
        nodes: sets[layers].clone(),
        output: tape.l2_normalize(h),
        attention,
    })
}
