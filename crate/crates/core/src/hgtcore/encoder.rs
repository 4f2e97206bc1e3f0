use super::forward::{hgt_forward, node_features, MessageGraph};
use super::params::HgtParams;
use super::tape::Tape;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, AUTHOR};
use crate::scalar::Scalar;
use crate::semfactory::EmbeddingTable;

/// Frozen weights bound to one graph, for inference.
#[derive(Debug, Clone)]
pub struct StructuralEncoder<T> {
    params: HgtParams<T>,
    graph: HeteroGraph,
    messages: MessageGraph,
    features: Tensor<T>,
}

/// Rows encoded per tape during bulk inference.
const CHUNK: usize = 512;

impl<T: Scalar> StructuralEncoder<T> {
    pub fn new(params: HgtParams<T>, graph: HeteroGraph, features: &EmbeddingTable<f32>) -> Result<Self> {
        if features.dim() != params.in_dim() {
            return Err(Error::DimMismatch {
                expected: params.in_dim(),
                found: features.dim(),
            });
        }
        let messages = MessageGraph::new(&graph, &params)?;
        let features = node_features(&graph, features)?;
        Ok(StructuralEncoder {
            params,
            graph,
            messages,
            features,
        })
    }

    pub fn params(&self) -> &HgtParams<T> {
        &self.params
    }

    pub fn graph(&self) -> &HeteroGraph {
        &self.graph
    }

    /// Structural embeddings of `nodes`, one row each, in the given order.
    pub fn encode_nodes(&self, nodes: &[usize]) -> Result<Tensor<T>> {
        let dim = self.params.config().hidden;
        let mut out = Tensor::zeros(nodes.len(), dim);
        for (c, chunk) in nodes.chunks(CHUNK).enumerate() {
            let mut tape = Tape::new();
            let vars = self.params.to_tape(&mut tape, false);
            let enc = hgt_forward(&mut tape, &self.params, &vars, &self.messages, &self.features, chunk)?;
            let value = tape.value(enc.output);
            for (i, &n) in chunk.iter().enumerate() {
                let row = enc.nodes.binary_search_by_key(&(self.messages.node_type(n), n), |&m| {
                    (self.messages.node_type(m), m)
                });
                let row = row.expect("target is in the output set");
                out.row_mut(c * CHUNK + i).copy_from_slice(value.row(row));
            }
        }
        Ok(out)
    }

    pub fn encode(&self, ids: &[&str]) -> Result<Tensor<T>> {
        let nodes = ids
            .iter()
            .map(|id| {
                self.graph
                    .index_of(id)
                    .ok_or_else(|| Error::UnknownNode(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.encode_nodes(&nodes)
    }

    /// `h_struct` for every author, in node order.
    pub fn encode_authors(&self) -> Result<EmbeddingTable<T>> {
        let authors = self.graph.nodes_of_type(AUTHOR);
        let enc = self.encode_nodes(authors)?;
        let mut table = EmbeddingTable::new(enc.cols());
        for (r, &n) in authors.iter().enumerate() {
            table.push(self.graph.id(n), enc.row(r))?;
        }
        Ok(table)
    }
}
