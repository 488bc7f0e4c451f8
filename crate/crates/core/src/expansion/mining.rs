use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{exhausted_expand, select_anchors, ExpandedSubgraph, ExpansionError, PathType, PathTypeSet};
use crate::embedding::{EmbeddingTable, EmbeddingVector};
use crate::graph::{NodeId, Rsg};

/// One training query for pattern mining.
#[derive(Debug, Clone, Copy)]
pub struct MiningSample<'a> {
    pub graph: &'a Rsg,
    pub table: &'a EmbeddingTable,
    pub query: &'a EmbeddingVector,
    pub gold: NodeId,
}

/// Mines the most frequent first-visit path types from anchors to gold
/// nodes under exhaustive expansion.
///
/// Gold nodes that are themselves anchors contribute no path. The retained
/// set is the smallest prefix of the frequency ranking (frequency desc,
/// path asc) whose cumulative count reaches `quantile` of all observed
/// paths, always at least one path, then closed under prefixes.
pub fn mine_path_patterns(
    samples: &[MiningSample<'_>],
    k: usize,
    depth: usize,
    budget: usize,
    quantile: f64,
) -> Result<PathTypeSet, ExpansionError> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(ExpansionError::Config(format!("quantile {quantile} outside [0, 1]")));
    }
    let observed: Vec<Option<PathType>> = samples
        .par_iter()
        .map(|s| -> Result<Option<PathType>, ExpansionError> {
            let anchors = select_anchors(s.graph, s.table, s.query, k)?;
            let sub = exhausted_expand(s.graph, &anchors, depth, budget);
            Ok(sub
                .records
                .get(&s.gold)
                .filter(|r| !r.path.is_empty())
                .map(|r| r.path.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut counts: BTreeMap<PathType, u64> = BTreeMap::new();
    for p in observed.into_iter().flatten() {
        *counts.entry(p).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(ExpansionError::NoGoldReached);
    }
    let mut ranked: Vec<(PathType, u64)> = counts.clone().into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let target = quantile * total as f64;
    let mut retained = Vec::new();
    let mut cumulative = 0u64;
    for (p, f) in ranked {
        if !retained.is_empty() && cumulative as f64 >= target {
            break;
        }
        cumulative += f;
        retained.push(p);
    }

    // frequency of every retained path and prefix is its support over all
    // observed gold paths
    let mut entries: BTreeMap<PathType, u64> = BTreeMap::new();
    for p in &retained {
        for prefix in p.prefixes() {
            entries.entry(prefix).or_insert(0);
        }
    }
    for (entry, freq) in entries.iter_mut() {
        *freq = counts
            .iter()
            .filter(|(p, _)| entry.is_prefix_of(p))
            .map(|(_, c)| c)
            .sum();
    }
    let mut set = PathTypeSet::from_entries(entries);
    set.quantile = quantile;
    set.depth = depth;
    set.budget = budget;
    set.k = k;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitsCoverage {
    /// Fraction of runs whose gold node is in A_exp.
    pub hit_rate: f64,
    /// Mean of |A_exp| / |V| over runs.
    pub coverage: f64,
}

/// `runs` holds each expansion with its gold node and graph size |V|.
pub fn measure_hits_coverage(
    runs: &[(&ExpandedSubgraph, NodeId, usize)],
) -> Result<HitsCoverage, ExpansionError> {
    if runs.is_empty() {
        return Err(ExpansionError::NoRuns);
    }
    let n = runs.len() as f64;
    let hits = runs.iter().filter(|(sub, gold, _)| sub.contains(*gold)).count() as f64;
    let coverage: f64 = runs
        .iter()
        .map(|(sub, _, size)| sub.len() as f64 / *size as f64)
        .sum();
    Ok(HitsCoverage {
        hit_rate: hits / n,
        coverage: coverage / n,
    })
}
