use std::collections::{BTreeMap, BTreeSet};

use super::graph::{EdgeRecord, HeteroGraph};
use super::schema::{AUTHOR, COAUTHOR};
use crate::error::{Error, Result};

/// Train view, held-out coauthorships and the cold query set.
///
/// Edges with `train_cutoff_year < year < test_start_year` belong to
/// neither side.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSplit {
    train_cutoff_year: i32,
    test_start_year: i32,
    train_view: HeteroGraph,
    test_positives: BTreeMap<String, BTreeSet<String>>,
    cold_queries: BTreeSet<String>,
}

impl TemporalSplit {
    /// Assembles a split without checking any invariant. Run
    /// [`assert_no_leakage`] before consuming it.
    pub fn from_parts(
        train_cutoff_year: i32,
        test_start_year: i32,
        train_view: HeteroGraph,
        test_positives: BTreeMap<String, BTreeSet<String>>,
        cold_queries: BTreeSet<String>,
    ) -> Self {
        TemporalSplit {
            train_cutoff_year,
            test_start_year,
            train_view,
            test_positives,
            cold_queries,
        }
    }

    pub fn train_cutoff_year(&self) -> i32 {
        self.train_cutoff_year
    }

    pub fn test_start_year(&self) -> i32 {
        self.test_start_year
    }

    pub fn train_view(&self) -> &HeteroGraph {
        &self.train_view
    }

    pub fn test_positives(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.test_positives
    }

    pub fn cold_queries(&self) -> &BTreeSet<String> {
        &self.cold_queries
    }

    /// Authors with at least one observed training edge, in node order.
    pub fn warm_authors(&self) -> Vec<usize> {
        let g = &self.train_view;
        g.nodes_of_type(AUTHOR)
            .iter()
            .copied()
            .filter(|&i| g.observed_degree(i) > 0)
            .collect()
    }

    /// The same split with `extra` edges added to the train view. Cold query
    /// membership is carried over unchanged.
    pub fn with_train_edges<'a>(
        &self,
        extra: impl IntoIterator<Item = &'a EdgeRecord>,
    ) -> Result<TemporalSplit> {
        Ok(TemporalSplit {
            train_view: self.train_view.with_edges(extra)?,
            ..self.clone()
        })
    }
}

pub fn time_machine_split(
    g: &HeteroGraph,
    train_cutoff_year: i32,
    test_start_year: i32,
) -> Result<TemporalSplit> {
    if test_start_year <= train_cutoff_year {
        return Err(Error::SplitYears {
            cutoff: train_cutoff_year,
            test_start: test_start_year,
        });
    }
    let train_view = g.filter_edges(|e| e.year <= train_cutoff_year);

    let mut test_positives: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    if let Some(coauthor) = g.schema().relation_id(COAUTHOR) {
        for e in g.edges() {
            if e.rel == coauthor && e.year >= test_start_year {
                let (s, d) = (g.id(e.src), g.id(e.dst));
                test_positives
                    .entry(s.to_string())
                    .or_default()
                    .insert(d.to_string());
                test_positives
                    .entry(d.to_string())
                    .or_default()
                    .insert(s.to_string());
            }
        }
    }

    let cold_queries = test_positives
        .keys()
        .filter(|id| {
            let idx = train_view.index_of(id).expect("positive ids come from g");
            train_view.observed_degree(idx) == 0
        })
        .cloned()
        .collect();

    Ok(TemporalSplit {
        train_cutoff_year,
        test_start_year,
        train_view,
        test_positives,
        cold_queries,
    })
}

/// Fails if any train edge is dated after the cutoff, or any cold query has
/// an observed training edge or no held-out positive.
pub fn assert_no_leakage(split: &TemporalSplit) -> Result<()> {
    if split.test_start_year <= split.train_cutoff_year {
        return Err(Error::SplitYears {
            cutoff: split.train_cutoff_year,
            test_start: split.test_start_year,
        });
    }
    let g = &split.train_view;
    for e in g.edges() {
        if e.year > split.train_cutoff_year {
            let r = g.edge_record(e);
            return Err(Error::Leakage(format!(
                "train edge {} -> {} [{}, {}] is after the train cutoff {}",
                r.src, r.dst, r.relation, r.year, split.train_cutoff_year
            )));
        }
    }
    for id in &split.cold_queries {
        let idx = g
            .index_of(id)
            .ok_or_else(|| Error::Leakage(format!("cold query {id:?} is not in the train view")))?;
        let deg = g.observed_degree(idx);
        if deg != 0 {
            return Err(Error::Leakage(format!(
                "cold query {id:?} has train degree {deg}"
            )));
        }
        if split.test_positives.get(id).is_none_or(|p| p.is_empty()) {
            return Err(Error::Leakage(format!(
                "cold query {id:?} has no held-out positive"
            )));
        }
    }
    Ok(())
}
