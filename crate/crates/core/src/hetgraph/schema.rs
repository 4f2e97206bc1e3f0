use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AUTHOR: &str = "author";
pub const PAPER: &str = "paper";
pub const WRITES: &str = "writes";
pub const COAUTHOR: &str = "coauthor";
pub const SEM_NN: &str = "sem_nn";

/// A typed relation `source -[name]-> target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub source: String,
    pub name: String,
    pub target: String,
    /// Stored once per unordered pair, endpoints in ascending id order.
    #[serde(default)]
    pub symmetric: bool,
    /// Edges synthesized from embeddings rather than observed interactions.
    /// They do not count toward a node's observed training degree.
    #[serde(default)]
    pub derived: bool,
}

impl Relation {
    pub fn new(source: &str, name: &str, target: &str) -> Self {
        Relation {
            source: source.to_string(),
            name: name.to_string(),
            target: target.to_string(),
            symmetric: false,
            derived: false,
        }
    }

    pub fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }

    pub fn derived(mut self) -> Self {
        self.derived = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    node_types: Vec<String>,
    relations: Vec<Relation>,
}

impl RelationSchema {
    pub fn new(node_types: Vec<String>, relations: Vec<Relation>) -> Result<Self> {
        let mut seen_types = HashSet::new();
        for t in &node_types {
            if !seen_types.insert(t.as_str()) {
                return Err(Error::Schema(format!("duplicate node type {t:?}")));
            }
        }
        let mut seen_rel = HashSet::new();
        for r in &relations {
            if !seen_rel.insert(r.name.as_str()) {
                return Err(Error::Schema(format!("duplicate relation {:?}", r.name)));
            }
            for t in [&r.source, &r.target] {
                if !seen_types.contains(t.as_str()) {
                    return Err(Error::Schema(format!(
                        "relation {:?} references undeclared node type {t:?}",
                        r.name
                    )));
                }
            }
            if r.symmetric && r.source != r.target {
                return Err(Error::Schema(format!(
                    "symmetric relation {:?} must connect a type to itself",
                    r.name
                )));
            }
        }
        Ok(RelationSchema {
            node_types,
            relations,
        })
    }

    /// Authors and papers; `writes`, `coauthor` (symmetric) and `sem_nn`
    /// (derived, cold author to warm author).
    pub fn academic() -> Self {
        RelationSchema::new(
            vec![AUTHOR.to_string(), PAPER.to_string()],
            vec![
                Relation::new(AUTHOR, WRITES, PAPER),
                Relation::new(AUTHOR, COAUTHOR, AUTHOR).symmetric(),
                Relation::new(AUTHOR, SEM_NN, AUTHOR).derived(),
            ],
        )
        .expect("academic schema is valid")
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn type_id(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn relation(&self, id: usize) -> &Relation {
        &self.relations[id]
    }
}

impl Default for RelationSchema {
    fn default() -> Self {
        Self::academic()
    }
}
