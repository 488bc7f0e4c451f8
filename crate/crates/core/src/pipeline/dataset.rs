use rayon::prelude::*;

use super::{align_gold, candidate_universe, query_node, PipelineError, QueryRecord, UniverseMode};
use crate::embedding::EmbeddingTable;
use crate::expansion::{expand, select_anchors, ExpansionConfig};
use crate::graph::{NodeId, Rsg};
use crate::predictor::{QueryNode, TrainingSample, UniverseKind};

/// A record resolved against a graph: query node, gold and candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub id: String,
    pub query: QueryNode,
    pub gold: NodeId,
    /// Ascending node ids.
    pub candidates: Vec<NodeId>,
    pub universe: UniverseKind,
    pub gold_expanded: bool,
}

impl PreparedQuery {
    pub fn training_sample<'a>(&self, graph: &'a Rsg, table: &'a EmbeddingTable) -> TrainingSample<'a> {
        TrainingSample {
            graph,
            table,
            query: self.query.clone(),
            gold: self.gold,
            candidates: self.candidates.clone(),
        }
    }
}

/// The record's gold node: an explicit id, else the best Jaccard match of
/// its gold snippet.
pub fn resolve_gold(graph: &Rsg, record: &QueryRecord) -> Result<NodeId, String> {
    if let Some(id) = record.gold_node {
        return if id < graph.len() {
            Ok(NodeId(id))
        } else {
            Err(format!("{}: gold node {id} is outside the graph", record.id))
        };
    }
    let snippet = record
        .gold_snippet
        .as_deref()
        .ok_or_else(|| format!("{}: no gold node or gold snippet", record.id))?;
    align_gold(graph, snippet)
        .map(|(n, _)| n)
        .ok_or_else(|| format!("{}: gold snippet matches no node above the Jaccard threshold", record.id))
}

/// Resolves records in input order. Records whose gold cannot be aligned
/// are dropped with a diagnostic. With `force_gold` the gold joins the
/// candidates even when expansion missed it (training).
pub fn prepare_queries(
    graph: &Rsg,
    table: &EmbeddingTable,
    records: &[QueryRecord],
    expansion: &ExpansionConfig,
    mode: UniverseMode,
    force_gold: bool,
) -> Result<(Vec<PreparedQuery>, Vec<String>), PipelineError> {
    expansion.validate()?;
    let results: Vec<Result<Result<PreparedQuery, String>, PipelineError>> = records
        .par_iter()
        .map(|r| {
            let gold = match resolve_gold(graph, r) {
                Ok(g) => g,
                Err(d) => return Ok(Err(d)),
            };
            let query = query_node(graph, table, &r.query, &r.query_file)?;
            let anchors = select_anchors(graph, table, &query.embedding, expansion.k)?;
            let sub = expand(graph, &anchors, expansion)?;
            let (mut candidates, universe) = candidate_universe(graph, &r.query_file, &sub, mode);
            let gold_expanded = sub.contains(gold);
            if force_gold {
                if let Err(pos) = candidates.binary_search(&gold) {
                    candidates.insert(pos, gold);
                }
            }
            Ok(Ok(PreparedQuery {
                id: r.id.clone(),
                query,
                gold,
                candidates,
                universe,
                gold_expanded,
            }))
        })
        .collect();
    let mut prepared = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r? {
            Ok(p) => prepared.push(p),
            Err(d) => dropped.push(d),
        }
    }
    Ok((prepared, dropped))
}
