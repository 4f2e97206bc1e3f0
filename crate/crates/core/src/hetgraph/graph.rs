use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::schema::RelationSchema;
use crate::error::{Error, Result};

/// One line of the nodes file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default = "empty_attrs")]
    pub attrs: serde_json::Value,
}

fn empty_attrs() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, node_type: impl Into<String>) -> Self {
        NodeRecord {
            id: id.into(),
            node_type: node_type.into(),
            attrs: empty_attrs(),
        }
    }
}

/// One line of the edges file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub relation: String,
    pub year: i32,
}

impl EdgeRecord {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, relation: &str, year: i32) -> Self {
        EdgeRecord {
            src: src.into(),
            dst: dst.into(),
            relation: relation.to_string(),
            year,
        }
    }
}

/// An edge between node indices. `rel` indexes the schema's relation list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
    pub year: i32,
}

/// Typed nodes with timestamped typed edges. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    schema: RelationSchema,
    ids: Vec<String>,
    types: Vec<usize>,
    attrs: Vec<serde_json::Value>,
    lookup: HashMap<String, usize>,
    by_type: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
}

pub struct GraphBuilder {
    graph: HeteroGraph,
    seen: HashSet<(usize, usize, usize, i32)>,
}

impl GraphBuilder {
    pub fn new(schema: RelationSchema) -> Self {
        let n_types = schema.node_types().len();
        GraphBuilder {
            graph: HeteroGraph {
                schema,
                ids: Vec::new(),
                types: Vec::new(),
                attrs: Vec::new(),
                lookup: HashMap::new(),
                by_type: vec![Vec::new(); n_types],
                edges: Vec::new(),
                incident: Vec::new(),
            },
            seen: HashSet::new(),
        }
    }

    pub fn add_node(&mut self, rec: NodeRecord) -> Result<usize> {
        let g = &mut self.graph;
        let ty = g
            .schema
            .type_id(&rec.node_type)
            .ok_or_else(|| Error::UnknownNodeType(rec.node_type.clone()))?;
        if g.lookup.contains_key(&rec.id) {
            return Err(Error::DuplicateNode(rec.id));
        }
        let idx = g.ids.len();
        g.lookup.insert(rec.id.clone(), idx);
        g.ids.push(rec.id);
        g.types.push(ty);
        g.attrs.push(rec.attrs);
        g.by_type[ty].push(idx);
        g.incident.push(Vec::new());
        Ok(idx)
    }

    pub fn add_edge(&mut self, rec: &EdgeRecord) -> Result<()> {
        let g = &mut self.graph;
        let rel = g
            .schema
            .relation_id(&rec.relation)
            .ok_or_else(|| Error::UnknownRelation(rec.relation.clone()))?;
        let relation = g.schema.relation(rel);
        let endpoint = |id: &str, expected: &str| -> Result<usize> {
            let idx = *g.lookup.get(id).ok_or_else(|| Error::MissingEndpoint {
                id: id.to_string(),
                relation: relation.name.clone(),
            })?;
            let actual = &g.schema.node_types()[g.types[idx]];
            if actual != expected {
                return Err(Error::EndpointType {
                    id: id.to_string(),
                    relation: relation.name.clone(),
                    expected: expected.to_string(),
                    actual: actual.clone(),
                });
            }
            Ok(idx)
        };
        let mut src = endpoint(&rec.src, &relation.source)?;
        let mut dst = endpoint(&rec.dst, &relation.target)?;
        if relation.symmetric {
            if src == dst {
                return Err(Error::SelfLoop {
                    id: rec.src.clone(),
                    relation: relation.name.clone(),
                });
            }
            if g.ids[src] > g.ids[dst] {
                std::mem::swap(&mut src, &mut dst);
            }
        }
        if !self.seen.insert((src, dst, rel, rec.year)) {
            return Err(Error::DuplicateEdge(format!(
                "{} -> {} [{}, {}]",
                g.ids[src], g.ids[dst], relation.name, rec.year
            )));
        }
        let e = g.edges.len();
        g.edges.push(Edge {
            src,
            dst,
            rel,
            year: rec.year,
        });
        g.incident[src].push(e);
        if dst != src {
            g.incident[dst].push(e);
        }
        Ok(())
    }

    pub fn build(self) -> HeteroGraph {
        self.graph
    }
}

/// Validates records against `schema` and assembles a graph. Node order is
/// record order.
pub fn build_graph<'a>(
    nodes: impl IntoIterator<Item = NodeRecord>,
    edges: impl IntoIterator<Item = &'a EdgeRecord>,
    schema: RelationSchema,
) -> Result<HeteroGraph> {
    let mut b = GraphBuilder::new(schema);
    for n in nodes {
        b.add_node(n)?;
    }
    for e in edges {
        b.add_edge(e)?;
    }
    Ok(b.build())
}

impl HeteroGraph {
    pub fn schema(&self) -> &RelationSchema {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn type_of(&self, idx: usize) -> usize {
        self.types[idx]
    }

    pub fn type_name(&self, idx: usize) -> &str {
        &self.schema.node_types()[self.types[idx]]
    }

    /// Node indices of the named type, in insertion order.
    pub fn nodes_of_type(&self, name: &str) -> &[usize] {
        match self.schema.type_id(name) {
            Some(t) => &self.by_type[t],
            None => &[],
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Indices into [`edges`](Self::edges) touching `idx`, in insertion order.
    pub fn incident(&self, idx: usize) -> &[usize] {
        &self.incident[idx]
    }

    /// Incident edges over all relations.
    pub fn degree(&self, id: &str) -> Result<usize> {
        Ok(self.incident[self.require(id)?].len())
    }

    /// Incident edges over non-derived relations only.
    pub fn observed_degree(&self, idx: usize) -> usize {
        self.incident[idx]
            .iter()
            .filter(|&&e| !self.schema.relation(self.edges[e].rel).derived)
            .count()
    }

    /// The other endpoint of every `relation` edge touching `id`, in edge
    /// insertion order.
    pub fn neighbors(&self, id: &str, relation: &str) -> Result<Vec<&str>> {
        let idx = self.require(id)?;
        let rel = self
            .schema
            .relation_id(relation)
            .ok_or_else(|| Error::UnknownRelation(relation.to_string()))?;
        Ok(self.incident[idx]
            .iter()
            .map(|&e| &self.edges[e])
            .filter(|e| e.rel == rel)
            .map(|e| {
                let other = if e.src == idx { e.dst } else { e.src };
                self.ids[other].as_str()
            })
            .collect())
    }

    pub fn node_records(&self) -> Vec<NodeRecord> {
        (0..self.node_count())
            .map(|i| NodeRecord {
                id: self.ids[i].clone(),
                node_type: self.type_name(i).to_string(),
                attrs: self.attrs[i].clone(),
            })
            .collect()
    }

    pub fn edge_record(&self, e: &Edge) -> EdgeRecord {
        EdgeRecord {
            src: self.ids[e.src].clone(),
            dst: self.ids[e.dst].clone(),
            relation: self.schema.relation(e.rel).name.clone(),
            year: e.year,
        }
    }

    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        self.edges.iter().map(|e| self.edge_record(e)).collect()
    }

    /// Same nodes, keeping only edges for which `keep` holds.
    pub fn filter_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> HeteroGraph {
        let edges: Vec<Edge> = self.edges.iter().copied().filter(|e| keep(e)).collect();
        let mut incident = vec![Vec::new(); self.node_count()];
        for (i, e) in edges.iter().enumerate() {
            incident[e.src].push(i);
            if e.dst != e.src {
                incident[e.dst].push(i);
            }
        }
        HeteroGraph {
            edges,
            incident,
            ..self.clone()
        }
    }

    /// Copy of this graph with `extra` edges appended and validated.
    pub fn with_edges<'a>(
        &self,
        extra: impl IntoIterator<Item = &'a EdgeRecord>,
    ) -> Result<HeteroGraph> {
        let mut b = GraphBuilder {
            seen: self
                .edges
                .iter()
                .map(|e| (e.src, e.dst, e.rel, e.year))
                .collect(),
            graph: self.clone(),
        };
        for e in extra {
            b.add_edge(e)?;
        }
        Ok(b.build())
    }
}
