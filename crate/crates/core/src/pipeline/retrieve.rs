use std::collections::BTreeSet;

use super::{assemble_prompt, AssembledPrompt, ContextBlock, Ordering, PipelineError};
use crate::embedding::{encode, tokenize, BaselineEmbedder, EmbeddingTable};
use crate::expansion::{expand, select_anchors, ExpandedSubgraph, ExpansionConfig};
use crate::graph::{NodeId, NodeKind, RelationKind, Rsg};
use crate::predictor::{
    cosine_rerank, rank, select_top, GnnModel, QueryNode, RankedContexts, RankedEntry, UniverseKind,
};

/// How many ranked contexts reach the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextPolicy {
    /// The top `n` (fewer when the universe is smaller).
    Fixed(usize),
    /// As many as fit in the token budget, in rank order.
    TokenBudget(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UniverseMode {
    /// Expanded nodes tied to the query file's imports.
    #[default]
    Imported,
    /// Every expanded node.
    Expanded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRequest {
    pub id: String,
    pub query: String,
    pub query_file: String,
    pub expansion: ExpansionConfig,
    pub policy: ContextPolicy,
    pub ordering: Ordering,
    pub universe: UniverseMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub expanded: ExpandedSubgraph,
    pub ranked: RankedContexts,
    pub selected: Vec<RankedEntry>,
    pub prompt: AssembledPrompt,
}

/// Identifiers directly followed by `(`.
fn called_names(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_alphabetic() || bytes[i] == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let mut j = i;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'(' {
                out.insert(text[start..i].to_string());
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Relations of the query resolvable from its file: the file's imports,
/// plus invocations in the query of imported or same-file callables.
pub fn known_edges(graph: &Rsg, query_file: &str, query: &str) -> Vec<(RelationKind, NodeId)> {
    let Some(script) = graph.script_for(query_file) else {
        return Vec::new();
    };
    let mut edges: Vec<(RelationKind, NodeId)> = graph
        .targets(script, RelationKind::Imports)
        .map(|n| (RelationKind::Imports, n))
        .collect();
    let calls = called_names(query);
    let reachable = graph
        .targets(script, RelationKind::Imports)
        .chain(graph.targets(script, RelationKind::Encloses));
    for n in reachable {
        let node = &graph.nodes()[n.0];
        if node.kind == NodeKind::Function && calls.contains(&node.name) {
            edges.push((RelationKind::Invokes, n));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Nodes importable into `query_file`: its import targets, entities
/// enclosed by imported scripts and methods owned by imported classes.
fn import_related(graph: &Rsg, query_file: &str) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let Some(script) = graph.script_for(query_file) else {
        return out;
    };
    for t in graph.targets(script, RelationKind::Imports) {
        out.insert(t);
        match graph.nodes()[t.0].kind {
            NodeKind::Script => out.extend(graph.targets(t, RelationKind::Encloses)),
            NodeKind::Class => out.extend(graph.targets(t, RelationKind::Owns)),
            _ => {}
        }
    }
    out
}

/// Expanded nodes to score, in ascending id order, and which rule chose them.
pub fn candidate_universe(
    graph: &Rsg,
    query_file: &str,
    expanded: &ExpandedSubgraph,
    mode: UniverseMode,
) -> (Vec<NodeId>, UniverseKind) {
    let all: Vec<NodeId> = expanded.records.keys().copied().collect();
    if mode == UniverseMode::Expanded {
        return (all, UniverseKind::Expanded);
    }
    let related = import_related(graph, query_file);
    let filtered: Vec<NodeId> = all.iter().copied().filter(|n| related.contains(n)).collect();
    if filtered.is_empty() {
        (all, UniverseKind::ImportFallback)
    } else {
        (filtered, UniverseKind::Imported)
    }
}

/// Embeds the query with the table's encoder and attaches its known edges.
pub fn query_node(
    graph: &Rsg,
    table: &EmbeddingTable,
    query: &str,
    query_file: &str,
) -> Result<QueryNode, PipelineError> {
    let encoder = BaselineEmbedder::from_provenance(table.provenance())
        .ok_or_else(|| PipelineError::UnknownEncoder(table.provenance().to_string()))?;
    if tokenize(query).is_empty() {
        return Err(PipelineError::Record {
            line: 0,
            message: "query has no tokens".into(),
        });
    }
    let embedding = encode(&encoder, query)?;
    Ok(QueryNode::new(query, embedding).with_edges(known_edges(graph, query_file, query)))
}

/// encode, anchor, expand, rank (link predictor, or cosine without a
/// model), select and assemble the prompt.
pub fn retrieve(
    graph: &Rsg,
    table: &EmbeddingTable,
    model: Option<&GnnModel>,
    request: &RetrievalRequest,
) -> Result<RetrievalResult, PipelineError> {
    table.check_covers(graph)?;
    let query = query_node(graph, table, &request.query, &request.query_file)?;
    let anchors = select_anchors(graph, table, &query.embedding, request.expansion.k)?;
    let expanded = expand(graph, &anchors, &request.expansion)?;
    let (candidates, kind) = candidate_universe(graph, &request.query_file, &expanded, request.universe);
    let ranked = match model {
        Some(m) => rank(m, graph, table, &query, &candidates, kind)?,
        None => cosine_rerank(&query.embedding, &candidates, table, kind)?,
    };
    let (selected, prompt) = match request.policy {
        ContextPolicy::Fixed(n) => {
            let selected = select_top(&ranked, n.clamp(1, ranked.len()))?;
            let blocks: Vec<ContextBlock> = selected
                .iter()
                .map(|e| ContextBlock::from_node(graph, e.node))
                .collect();
            let prompt = assemble_prompt(&request.query, &blocks, request.ordering, None)?;
            (selected, prompt)
        }
        ContextPolicy::TokenBudget(budget) => {
            let blocks: Vec<ContextBlock> = ranked
                .entries
                .iter()
                .map(|e| ContextBlock::from_node(graph, e.node))
                .collect();
            let prompt = assemble_prompt(&request.query, &blocks, request.ordering, Some(budget))?;
            let selected = ranked.entries[..prompt.blocks.len()].to_vec();
            (selected, prompt)
        }
    };
    Ok(RetrievalResult {
        expanded,
        ranked,
        selected,
        prompt,
    })
}
