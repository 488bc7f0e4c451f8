use std::cmp::Ordering;

use super::{dot, EmbeddingError, EmbeddingTable, EmbeddingVector};
use crate::graph::NodeId;

fn rank_order(a: &(NodeId, f64), b: &(NodeId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Exact top-K by cosine similarity, descending, ties by ascending id.
pub fn knn_search(
    table: &EmbeddingTable,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(NodeId, f64)>, EmbeddingError> {
    if k == 0 || k > table.len() {
        return Err(EmbeddingError::BadK { k, len: table.len() });
    }
    if query.dimension() != table.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: table.dimension(),
            got: query.dimension(),
        });
    }
    let mut scored: Vec<(NodeId, f64)> = table
        .rows()
        .enumerate()
        .map(|(i, row)| (NodeId(i), dot(query.values(), row)))
        .collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    Ok(scored)
}
