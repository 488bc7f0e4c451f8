use super::PipelineError;
use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOutcome {
    pub id: String,
    pub gold: NodeId,
    /// Ranked node ids, best first.
    pub ranked: Vec<NodeId>,
}

/// Percentage of outcomes whose gold is within the first `k` ranks.
pub fn acc_at_k(outcomes: &[RetrievalOutcome], k: usize) -> Result<f64, PipelineError> {
    if k == 0 {
        return Err(PipelineError::BadK);
    }
    if outcomes.is_empty() {
        return Ok(0.0);
    }
    let hits = outcomes
        .iter()
        .filter(|o| o.ranked.iter().take(k).any(|&n| n == o.gold))
        .count();
    Ok(100.0 * hits as f64 / outcomes.len() as f64)
}

/// Trims the ends and collapses inner whitespace runs to one space.
pub fn normalize_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Percentage of `(prediction, gold)` pairs equal after normalization.
pub fn exact_match(pairs: &[(&str, &str)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|(p, g)| normalize_line(p) == normalize_line(g))
        .count();
    100.0 * hits as f64 / pairs.len() as f64
}
