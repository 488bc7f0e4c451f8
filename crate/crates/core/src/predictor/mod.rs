//! Link-prediction re-ranking: query attachment, mean-aggregation message
//! passing, concat scoring and cross-entropy training.

mod forward;
mod matrix;
mod model;
mod train;

use std::collections::BTreeSet;

use thiserror::Error;

pub use forward::{backward_local, forward_local, ForwardCache, LocalGraph};
pub use matrix::Matrix;
pub use model::{
    Activation, GnnModel, Layer, DEFAULT_EPOCHS, DEFAULT_LAYERS, DEFAULT_LEARNING_RATE,
};
pub use train::{sample_gradient, train, TrainConfig, TrainingSample};

use crate::embedding::{dot, EmbeddingTable, EmbeddingVector};
use crate::graph::{Direction, Neighbor, NodeId, RelationKind, Rsg};

/// Probability clamp used by [`loss`].
pub const LOSS_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("known edge ({relation}, {node}) references a node outside the graph")]
    DanglingEdge { relation: RelationKind, node: NodeId },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("candidate {0} is not a graph node")]
    UnknownCandidate(NodeId),
    #[error("length mismatch: {predictions} predictions, {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("label {0} is not 0 or 1")]
    BadLabel(f64),
    #[error("gold node {gold} of sample {sample} is not among its candidates")]
    GoldNotCandidate { sample: usize, gold: NodeId },
    #[error("non-finite loss on sample {sample}")]
    NonFiniteLoss { sample: usize },
    #[error("top-N {n} outside 1..={len}")]
    BadTopN { n: usize, len: usize },
    #[error("model was trained on `{model}` embeddings, table is `{table}`")]
    Provenance { model: String, table: String },
}

/// The code being completed, as a node to attach to the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryNode {
    pub text: String,
    pub embedding: EmbeddingVector,
    /// Relations already resolvable from the in-file context, with the
    /// query as source.
    pub known_edges: Vec<(RelationKind, NodeId)>,
}

impl QueryNode {
    pub fn new(text: impl Into<String>, embedding: EmbeddingVector) -> Self {
        QueryNode {
            text: text.into(),
            embedding,
            known_edges: Vec::new(),
        }
    }

    pub fn with_edges(mut self, edges: Vec<(RelationKind, NodeId)>) -> Self {
        self.known_edges = edges;
        self
    }
}

/// A read-only view of a graph plus one query node with id `|V|`.
#[derive(Debug, Clone)]
pub struct AugmentedGraph<'a> {
    base: &'a Rsg,
    query: QueryNode,
    /// Sorted, deduplicated `(relation, node)` pairs of the query.
    edges: Vec<(RelationKind, NodeId)>,
    /// Distinct base nodes adjacent to the query, ascending.
    linked: Vec<NodeId>,
}

pub fn attach_query(graph: &Rsg, query: QueryNode) -> Result<AugmentedGraph<'_>, PredictorError> {
    for &(relation, node) in &query.known_edges {
        if !graph.contains(node) {
            return Err(PredictorError::DanglingEdge { relation, node });
        }
    }
    let edges: Vec<(RelationKind, NodeId)> = query
        .known_edges
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let linked: Vec<NodeId> = edges
        .iter()
        .map(|&(_, n)| n)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    Ok(AugmentedGraph {
        base: graph,
        query,
        edges,
        linked,
    })
}

impl<'a> AugmentedGraph<'a> {
    pub fn base(&self) -> &'a Rsg {
        self.base
    }

    pub fn query(&self) -> &QueryNode {
        &self.query
    }

    pub fn query_id(&self) -> NodeId {
        NodeId(self.base.len())
    }

    /// Node count including the query.
    pub fn len(&self) -> usize {
        self.base.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Typed neighbors in both directions, ordered by relation, node id,
    /// then direction.
    pub fn neighbors(&self, node: NodeId) -> Vec<Neighbor> {
        if node == self.query_id() {
            return self
                .edges
                .iter()
                .map(|&(relation, n)| Neighbor {
                    node: n,
                    relation,
                    direction: Direction::Forward,
                })
                .collect();
        }
        let mut out = self
            .base
            .neighbors(node, crate::graph::RelationSet::all(), crate::graph::DirectionFilter::Both)
            .unwrap_or_default();
        for &(relation, n) in &self.edges {
            if n == node {
                out.push(Neighbor {
                    node: self.query_id(),
                    relation,
                    direction: Direction::Reverse,
                });
            }
        }
        out.sort_unstable_by_key(|n| (n.relation, n.node, n.direction));
        out
    }

    /// Distinct adjacent nodes over all relations and directions, ascending.
    pub fn undirected_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        if node == self.query_id() {
            return self.linked.clone();
        }
        let mut out = self.base.undirected_neighbors(node);
        if self.linked.binary_search(&node).is_ok() {
            out.push(self.query_id());
        }
        out
    }

    /// Initial embeddings of every node, the query last.
    pub fn initial_embeddings(&self, table: &EmbeddingTable) -> Result<Matrix, PredictorError> {
        check_dimensions(self, table)?;
        let d = table.dimension();
        let mut m = Matrix::zeros(self.len(), d);
        for i in 0..self.base.len() {
            m.row_mut(i).copy_from_slice(table.get(NodeId(i)));
        }
        m.row_mut(self.base.len())
            .copy_from_slice(self.query.embedding.values());
        Ok(m)
    }
}

fn check_dimensions(view: &AugmentedGraph<'_>, table: &EmbeddingTable) -> Result<(), PredictorError> {
    let d = table.dimension();
    let q = view.query.embedding.dimension();
    if q != d {
        return Err(PredictorError::DimensionMismatch { expected: d, actual: q });
    }
    if table.len() != view.base.len() {
        return Err(PredictorError::DimensionMismatch {
            expected: view.base.len(),
            actual: table.len(),
        });
    }
    Ok(())
}

fn check_model(model: &GnnModel, table: &EmbeddingTable) -> Result<(), PredictorError> {
    if model.input_dim() != table.dimension() {
        return Err(PredictorError::DimensionMismatch {
            expected: model.input_dim(),
            actual: table.dimension(),
        });
    }
    if let Some(p) = model.encoder_provenance() {
        if p != table.provenance() {
            return Err(PredictorError::Provenance {
                model: p.to_string(),
                table: table.provenance().to_string(),
            });
        }
    }
    Ok(())
}

/// Final embeddings of every node of the view (query row last).
pub fn forward(
    model: &GnnModel,
    view: &AugmentedGraph<'_>,
    table: &EmbeddingTable,
) -> Result<Matrix, PredictorError> {
    check_model(model, table)?;
    let inputs = view.initial_embeddings(table)?;
    let local = LocalGraph::full(view, model.num_layers());
    let cache = forward_local(model, &local, inputs);
    Ok(cache.outputs.into_iter().last().expect("input layer"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UniverseKind {
    /// Every expanded node.
    Expanded,
    /// Expanded nodes related to the query file's imports.
    Imported,
    /// Import filter was empty, so every expanded node.
    ImportFallback,
    /// Supplied by the caller.
    Explicit,
}

impl UniverseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UniverseKind::Expanded => "expanded",
            UniverseKind::Imported => "imported",
            UniverseKind::ImportFallback => "import-fallback",
            UniverseKind::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedEntry {
    pub node: NodeId,
    pub score: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedContexts {
    /// Score descending, ties by ascending node id.
    pub entries: Vec<RankedEntry>,
    pub universe: UniverseKind,
}

impl RankedContexts {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.entries.iter().map(|e| e.node).collect()
    }

    /// 1-based rank of `node`, if scored.
    pub fn rank_of(&self, node: NodeId) -> Option<usize> {
        self.entries.iter().position(|e| e.node == node).map(|i| i + 1)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ranked(mut entries: Vec<RankedEntry>, universe: UniverseKind) -> RankedContexts {
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    RankedContexts { entries, universe }
}

fn dedup_candidates(candidates: &[NodeId]) -> Result<Vec<NodeId>, PredictorError> {
    if candidates.is_empty() {
        return Err(PredictorError::EmptyCandidates);
    }
    Ok(candidates
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect())
}

/// Linking scores `s_i = w · [z_i ; z_Q]` over rows of `z`, which is
/// indexed by node id.
pub fn score(
    model: &GnnModel,
    z: &Matrix,
    candidates: &[NodeId],
    query: NodeId,
) -> Result<RankedContexts, PredictorError> {
    let candidates = dedup_candidates(candidates)?;
    let h = model.output_dim();
    if z.cols() != h {
        return Err(PredictorError::DimensionMismatch {
            expected: h,
            actual: z.cols(),
        });
    }
    for &c in candidates.iter().chain([&query]) {
        if c.0 >= z.rows() {
            return Err(PredictorError::UnknownCandidate(c));
        }
    }
    let (w_node, w_query) = model.score.split_at(h);
    let query_term = dot(w_query, z.row(query.0));
    let entries = candidates
        .iter()
        .map(|&c| {
            let s = dot(w_node, z.row(c.0)) + query_term;
            RankedEntry {
                node: c,
                score: s,
                probability: sigmoid(s),
            }
        })
        .collect();
    Ok(ranked(entries, UniverseKind::Explicit))
}

/// Attaches the query, runs the model over the receptive field of the
/// candidates and ranks them.
pub fn rank(
    model: &GnnModel,
    graph: &Rsg,
    table: &EmbeddingTable,
    query: &QueryNode,
    candidates: &[NodeId],
    universe: UniverseKind,
) -> Result<RankedContexts, PredictorError> {
    let candidates = dedup_candidates(candidates)?;
    if let Some(&c) = candidates.iter().find(|c| !graph.contains(**c)) {
        return Err(PredictorError::UnknownCandidate(c));
    }
    check_model(model, table)?;
    let view = attach_query(graph, query.clone())?;
    check_dimensions(&view, table)?;
    let mut targets = candidates.clone();
    targets.push(view.query_id());
    let local = LocalGraph::receptive_field(&view, &targets, model.num_layers());
    let inputs = local.inputs(&view, table);
    let cache = forward_local(model, &local, inputs);
    let z = cache.final_embeddings();
    let local_ids: Vec<NodeId> = (0..candidates.len()).map(NodeId).collect();
    let mut out = score(model, z, &local_ids, NodeId(candidates.len()))?;
    for e in &mut out.entries {
        e.node = candidates[e.node.0];
    }
    Ok(ranked(out.entries, universe))
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[LOSS_EPSILON, 1 - LOSS_EPSILON]`.
pub fn loss(predictions: &[f64], labels: &[f64]) -> Result<f64, PredictorError> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(PredictorError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if y != 0.0 && y != 1.0 {
            return Err(PredictorError::BadLabel(y));
        }
        let p = p.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total / predictions.len() as f64)
}

/// The first `n` ranked contexts.
pub fn select_top(ranked: &RankedContexts, n: usize) -> Result<Vec<RankedEntry>, PredictorError> {
    if n == 0 || n > ranked.len() {
        return Err(PredictorError::BadTopN { n, len: ranked.len() });
    }
    Ok(ranked.entries[..n].to_vec())
}

/// Orders candidates by cosine similarity of their initial embeddings to
/// the query; the similarity is reported as the score.
pub fn cosine_rerank(
    query: &EmbeddingVector,
    candidates: &[NodeId],
    table: &EmbeddingTable,
    universe: UniverseKind,
) -> Result<RankedContexts, PredictorError> {
    let candidates = dedup_candidates(candidates)?;
    if query.dimension() != table.dimension() {
        return Err(PredictorError::DimensionMismatch {
            expected: table.dimension(),
            actual: query.dimension(),
        });
    }
    let entries = candidates
        .iter()
        .map(|&c| {
            if c.0 >= table.len() {
                return Err(PredictorError::UnknownCandidate(c));
            }
            let s = dot(query.values(), table.get(c));
            Ok(RankedEntry {
                node: c,
                score: s,
                probability: sigmoid(s),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ranked(entries, universe))
}
