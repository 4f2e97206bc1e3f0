//! Heterogeneous temporal graph storage, the temporal train/test splitter
//! and the leakage guard.

mod graph;
mod io;
mod schema;
mod split;

pub use graph::{build_graph, Edge, EdgeRecord, GraphBuilder, HeteroGraph, NodeRecord};
pub use io::{read_edges, read_graph, read_nodes, write_edges, write_nodes};
pub use schema::{Relation, RelationSchema, AUTHOR, COAUTHOR, PAPER, SEM_NN, WRITES};
pub use split::{assert_no_leakage, time_machine_split, TemporalSplit};
