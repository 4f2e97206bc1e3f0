//! Line-delimited node and edge files.
//!
//! Nodes: one JSON object per line, `{"id": .., "type": .., "attrs": {..}}`.
//! Edges: tab-separated `src_id  dst_id  relation  year`, no header.
//! Errors carry 1-based line numbers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::graph::{EdgeRecord, GraphBuilder, HeteroGraph, NodeRecord};
use super::schema::RelationSchema;
use crate::error::{Error, Result};

fn at(line: usize, e: impl ToString) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn parse_nodes(reader: impl BufRead) -> Result<Vec<NodeRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| at(i + 1, e))?);
    }
    Ok(out)
}

pub fn parse_edges(reader: impl BufRead) -> Result<Vec<EdgeRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(at(i + 1, format!("expected 4 columns, found {}", cols.len())));
        }
        let year = cols[3]
            .trim()
            .parse::<i32>()
            .map_err(|e| at(i + 1, format!("bad year {:?}: {e}", cols[3])))?;
        out.push(EdgeRecord::new(cols[0], cols[1], cols[2], year));
    }
    Ok(out)
}

pub fn read_nodes(path: &Path) -> Result<Vec<NodeRecord>> {
    parse_nodes(BufReader::new(File::open(path)?))
}

pub fn read_edges(path: &Path) -> Result<Vec<EdgeRecord>> {
    parse_edges(BufReader::new(File::open(path)?))
}

pub fn write_nodes(path: &Path, nodes: &[NodeRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for n in nodes {
        serde_json::to_writer(&mut w, n).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges(path: &Path, edges: &[EdgeRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in edges {
        writeln!(w, "{}\t{}\t{}\t{}", e.src, e.dst, e.relation, e.year)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and validates both files; validation errors name the offending line.
pub fn read_graph(nodes: &Path, edges: &Path, schema: RelationSchema) -> Result<HeteroGraph> {
    let mut b = GraphBuilder::new(schema);
    for (i, n) in read_nodes(nodes)?.into_iter().enumerate() {
        b.add_node(n).map_err(|e| at(i + 1, e))?;
    }
    for (i, e) in read_edges(edges)?.iter().enumerate() {
        b.add_edge(e).map_err(|err| at(i + 1, err))?;
    }
    Ok(b.build())
}
