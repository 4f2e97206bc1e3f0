use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::RelationSchema;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct HgtConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for HgtConfig {
    fn default() -> Self {
        HgtConfig {
            layers: 2,
            heads: 4,
            hidden: 64,
            seed: 0,
        }
    }
}

impl HgtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.hidden == 0 {
            return Err(Error::Config("layers, heads and hidden must be positive".into()));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden dim {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

/// A direction in which messages flow along a schema relation. Symmetric
/// relations have one; directed relations have a forward and a reverse one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRelation {
    pub relation: usize,
    pub reverse: bool,
    pub src_type: usize,
    pub dst_type: usize,
}

pub fn message_relations(schema: &RelationSchema) -> Vec<MessageRelation> {
    let ty = |n: &str| schema.type_id(n).expect("validated schema");
    let mut out = Vec::new();
    for (id, r) in schema.relations().iter().enumerate() {
        let (s, t) = (ty(&r.source), ty(&r.target));
        out.push(MessageRelation {
            relation: id,
            reverse: false,
            src_type: s,
            dst_type: t,
        });
        if !r.symmetric {
            out.push(MessageRelation {
                relation: id,
                reverse: true,
                src_type: t,
                dst_type: s,
            });
        }
    }
    out
}

/// Encoder weights.
///
/// Tensors are kept in one flat list, in this order: the input projection
/// of every node type; then for each layer the K, Q, V and A projections of
/// every node type (all `K` first, then all `Q`, ...); then for each layer,
/// message relation and head the attention matrix, followed by the message
/// matrices in the same order; finally one `1 x 1` prior per message
/// relation.
#[derive(Debug, Clone, PartialEq)]
pub struct HgtParams<T> {
    config: HgtConfig,
    in_dim: usize,
    schema: RelationSchema,
    msg_rels: Vec<MessageRelation>,
    tensors: Vec<Tensor<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proj {
    K = 0,
    Q = 1,
    V = 2,
    A = 3,
}

impl<T: Scalar> HgtParams<T> {
    /// Glorot-uniform weights, priors set to 1.
    pub fn init(config: HgtConfig, in_dim: usize, schema: RelationSchema) -> Result<Self> {
        config.validate()?;
        if in_dim == 0 {
            return Err(Error::Config("input dim must be positive".into()));
        }
        let msg_rels = message_relations(&schema);
        let mut p = HgtParams {
            config,
            in_dim,
            schema,
            msg_rels,
            tensors: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(p.config.seed);
        p.tensors = p
            .shapes()
            .into_iter()
            .enumerate()
            .map(|(i, (r, c))| {
                if i >= p.mu_index(0) {
                    return Tensor::scalar(T::one());
                }
                let bound = (6.0 / (r + c) as f64).sqrt();
                let data = (0..r * c)
                    .map(|_| T::of(rng.random_range(-bound..bound)))
                    .collect();
                Tensor::new(r, c, data).expect("shape")
            })
            .collect();
        Ok(p)
    }

    /// Assembles parameters from explicit tensors, checking every shape.
    pub fn from_tensors(
        config: HgtConfig,
        in_dim: usize,
        schema: RelationSchema,
        tensors: Vec<Tensor<T>>,
    ) -> Result<Self> {
        config.validate()?;
        let msg_rels = message_relations(&schema);
        let mut p = HgtParams {
            config,
            in_dim,
            schema,
            msg_rels,
            tensors: Vec::new(),
        };
        let shapes = p.shapes();
        if shapes.len() != tensors.len() {
            return Err(Error::shape(
                "params",
                format!("expected {} tensors, got {}", shapes.len(), tensors.len()),
            ));
        }
        for (i, (want, t)) in shapes.iter().zip(&tensors).enumerate() {
            if *want != t.shape() {
                return Err(Error::shape(
                    "params",
                    format!("tensor {i} is {:?}, expected {want:?}", t.shape()),
                ));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("tensor {i}")));
            }
        }
        p.tensors = tensors;
        Ok(p)
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let n_types = self.n_types();
        let d = self.config.hidden;
        let dk = self.config.head_dim();
        let mut s = vec![(self.in_dim, d); n_types];
        s.extend(std::iter::repeat_n((d, d), self.config.layers * 4 * n_types));
        let per_layer = self.msg_rels.len() * self.config.heads;
        s.extend(std::iter::repeat_n((dk, dk), 2 * self.config.layers * per_layer));
        s.extend(std::iter::repeat_n((1, 1), self.msg_rels.len()));
        s
    }

    pub fn config(&self) -> &HgtConfig {
        &self.config
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn schema(&self) -> &RelationSchema {
        &self.schema
    }

    pub fn message_relations(&self) -> &[MessageRelation] {
        &self.msg_rels
    }

    pub fn n_types(&self) -> usize {
        self.schema.node_types().len()
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn input_index(&self, node_type: usize) -> usize {
        node_type
    }

    /// `layer` counts from 0.
    pub fn proj_index(&self, layer: usize, proj: Proj, node_type: usize) -> usize {
        let t = self.n_types();
        t + layer * 4 * t + proj as usize * t + node_type
    }

    fn rel_base(&self) -> usize {
        self.n_types() * (1 + 4 * self.config.layers)
    }

    pub fn att_index(&self, layer: usize, msg_rel: usize, head: usize) -> usize {
        let per_layer = self.msg_rels.len() * self.config.heads;
        self.rel_base() + layer * per_layer + msg_rel * self.config.heads + head
    }

    pub fn msg_index(&self, layer: usize, msg_rel: usize, head: usize) -> usize {
        let per_layer = self.msg_rels.len() * self.config.heads;
        self.att_index(layer, msg_rel, head) + self.config.layers * per_layer
    }

    pub fn mu_index(&self, msg_rel: usize) -> usize {
        let per_layer = self.msg_rels.len() * self.config.heads;
        self.rel_base() + 2 * self.config.layers * per_layer + msg_rel
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor as a leaf; trainable leaves receive gradients.
    pub fn to_tape(&self, tape: &mut Tape<T>, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> HgtParams<U> {
        HgtParams {
            config: self.config.clone(),
            in_dim: self.in_dim,
            schema: self.schema.clone(),
            msg_rels: self.msg_rels.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn academic_message_relations() {
        let m = message_relations(&RelationSchema::academic());
        // writes, writes reversed, coauthor, sem_nn, sem_nn reversed
        assert_eq!(m.len(), 5);
        assert!(m[1].reverse && m[1].src_type == 1 && m[1].dst_type == 0);
        assert!(!m[2].reverse);
    }

    #[test]
    fn layout_covers_every_tensor_once() {
        let cfg = HgtConfig {
            layers: 2,
            heads: 2,
            hidden: 8,
            seed: 3,
        };
        let p = HgtParams::<f32>::init(cfg, 5, RelationSchema::academic()).unwrap();
        let mut seen = vec![false; p.tensors().len()];
        let mut mark = |i: usize| {
            assert!(!seen[i], "index {i} used twice");
            seen[i] = true;
        };
        for t in 0..2 {
            mark(p.input_index(t));
            for l in 0..2 {
                for pr in [Proj::K, Proj::Q, Proj::V, Proj::A] {
                    mark(p.proj_index(l, pr, t));
                }
            }
        }
        for r in 0..5 {
            mark(p.mu_index(r));
            for l in 0..2 {
                for h in 0..2 {
                    mark(p.att_index(l, r, h));
                    mark(p.msg_index(l, r, h));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(p.tensors()[p.input_index(1)].shape(), (5, 8));
        assert_eq!(p.tensors()[p.att_index(1, 4, 1)].shape(), (4, 4));
        assert_eq!(p.tensors()[p.mu_index(3)].item(), 1.0);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = HgtConfig::default();
        let a = HgtParams::<f32>::init(cfg.clone(), 64, RelationSchema::academic()).unwrap();
        let b = HgtParams::<f32>::init(cfg, 64, RelationSchema::academic()).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f32 / 128.0).sqrt();
        assert!(a.tensors()[0].data().iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn rejects_indivisible_heads() {
        let cfg = HgtConfig {
            hidden: 10,
            heads: 4,
            ..Default::default()
        };
        assert!(matches!(
            HgtParams::<f32>::init(cfg, 4, RelationSchema::academic()),
            Err(Error::Config(_))
        ));
    }
}
