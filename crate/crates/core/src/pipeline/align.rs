use std::collections::HashSet;

use crate::embedding::tokenize;
use crate::graph::{NodeId, Rsg};

pub const GOLD_JACCARD_THRESHOLD: f64 = 0.5;

/// Token-set Jaccard similarity; two empty sets score 0.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: HashSet<String> = tokenize(a).into_iter().collect();
    let b: HashSet<String> = tokenize(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// The node whose source text best matches `snippet`, lowest id on ties,
/// or `None` when the best similarity is under the threshold.
pub fn align_gold(graph: &Rsg, snippet: &str) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for node in graph.nodes() {
        let s = jaccard(snippet, &node.source_text);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((node.id, s));
        }
    }
    best.filter(|&(_, s)| s >= GOLD_JACCARD_THRESHOLD)
}
