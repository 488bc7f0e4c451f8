//! Search-then-expand: kNN anchors, bounded BFS over the graph (exhaustive
//! or filtered by mined path types) and hits/coverage measurement.

mod bfs;
mod mining;
mod path;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{knn_search, EmbeddingError, EmbeddingTable, EmbeddingVector};
use crate::graph::{NodeId, Rsg};

pub use bfs::{expand, exhausted_expand, pattern_expand, ExpandedSubgraph, PathRecord};
pub use mining::{measure_hits_coverage, mine_path_patterns, HitsCoverage, MiningSample};
pub use path::{PathStep, PathType, PathTypeSet};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExpansionError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("invalid expansion config: {0}")]
    Config(String),
    #[error("pattern set is empty")]
    EmptyPatternSet,
    #[error("no training sample reached its gold node (D or M too small?)")]
    NoGoldReached,
    #[error("no runs to measure")]
    NoRuns,
    #[error("path type format error on line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub enum Strategy {
    /// Anchors only, no expansion.
    Knn,
    Exhausted,
    Pattern,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Knn => "knn",
            Strategy::Exhausted => "exhausted",
            Strategy::Pattern => "pattern",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(Strategy::Knn),
            "exhausted" => Ok(Strategy::Exhausted),
            "pattern" => Ok(Strategy::Pattern),
            _ => Err(format!("unknown strategy `{s}` (knn|exhausted|pattern)")),
        }
    }
}

/// Whether the node budget M applies to each anchor's BFS or to the union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, Default)]
pub enum BudgetScope {
    #[default]
    PerAnchor,
    Global,
}

impl FromStr for BudgetScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per-anchor" => Ok(BudgetScope::PerAnchor),
            "global" => Ok(BudgetScope::Global),
            _ => Err(format!("unknown budget scope `{s}` (per-anchor|global)")),
        }
    }
}

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_DEPTH: usize = 4;
pub const DEFAULT_BUDGET: usize = 1000;
pub const DEFAULT_COVERAGE_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionConfig {
    pub k: usize,
    pub depth: usize,
    pub budget: usize,
    pub strategy: Strategy,
    pub pattern_set: Option<PathTypeSet>,
    pub budget_scope: BudgetScope,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            k: DEFAULT_K,
            depth: DEFAULT_DEPTH,
            budget: DEFAULT_BUDGET,
            strategy: Strategy::Exhausted,
            pattern_set: None,
            budget_scope: BudgetScope::PerAnchor,
        }
    }
}

impl ExpansionConfig {
    pub fn validate(&self) -> Result<(), ExpansionError> {
        if self.k == 0 {
            return Err(ExpansionError::Config("K must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(ExpansionError::Config("M must be at least 1".into()));
        }
        if self.strategy == Strategy::Pattern {
            match &self.pattern_set {
                None => {
                    return Err(ExpansionError::Config(
                        "pattern strategy requires a pattern set".into(),
                    ))
                }
                Some(p) if p.is_empty() => return Err(ExpansionError::EmptyPatternSet),
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// The K nodes most similar to the query embedding.
pub fn select_anchors(
    graph: &Rsg,
    table: &EmbeddingTable,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(NodeId, f64)>, ExpansionError> {
    table.check_covers(graph)?;
    Ok(knn_search(table, query, k)?)
}
