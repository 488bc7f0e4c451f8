use std::fmt::Write as _;

use rayon::prelude::*;

use super::PipelineError;
use crate::embedding::{EmbeddingTable, EmbeddingVector};
use crate::expansion::{
    expand, measure_hits_coverage, select_anchors, ExpansionConfig, PathTypeSet, Strategy,
};
use crate::graph::{NodeId, Rsg};

/// Anchor count of a grid point: fixed, or a fraction of |V|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridK {
    Fixed(usize),
    Fraction(f64),
}

impl GridK {
    pub fn resolve(self, graph_len: usize) -> usize {
        match self {
            GridK::Fixed(k) => k,
            GridK::Fraction(f) => ((f * graph_len as f64).round() as usize).max(1),
        }
        .min(graph_len)
    }

    fn label(self) -> String {
        match self {
            GridK::Fixed(k) => k.to_string(),
            GridK::Fraction(f) => format!("{f}*|V|"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub strategy: Strategy,
    pub depth: usize,
    pub budget: usize,
    pub k: GridK,
}

impl GridPoint {
    /// Parses `<strategy> <D> <M> <K>` lines; `K` is an integer or
    /// `<fraction>*|V|`. Blank lines and `#` comments are skipped.
    pub fn parse_grid(text: &str) -> Result<Vec<GridPoint>, PipelineError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PipelineError::Grid { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [s, d, m, k] = fields[..] else {
                return Err(err("expected `<strategy> <D> <M> <K>`".into()));
            };
            let strategy = s.parse().map_err(err)?;
            let depth = d.parse().map_err(|_| err(format!("bad D `{d}`")))?;
            let budget = m.parse().map_err(|_| err(format!("bad M `{m}`")))?;
            let k = match k.strip_suffix("*|V|") {
                Some(f) => GridK::Fraction(f.parse().map_err(|_| err(format!("bad K `{k}`")))?),
                None => GridK::Fixed(k.parse().map_err(|_| err(format!("bad K `{k}`")))?),
            };
            out.push(GridPoint { strategy, depth, budget, k });
        }
        if out.is_empty() {
            return Err(PipelineError::EmptyGrid);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityQuery<'a> {
    pub graph: &'a Rsg,
    pub table: &'a EmbeddingTable,
    pub query: EmbeddingVector,
    pub gold: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub point: GridPoint,
    pub hits: f64,
    pub coverage: f64,
}

impl SensitivityRow {
    pub fn tsv_header() -> &'static str {
        "strategy\tD\tM\tK\thits\tcoverage\n"
    }

    pub fn to_tsv(rows: &[SensitivityRow]) -> String {
        let mut out = String::from(Self::tsv_header());
        for r in rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                r.point.strategy.as_str(),
                r.point.depth,
                r.point.budget,
                r.point.k.label(),
                r.hits,
                r.coverage
            )
            .unwrap();
        }
        out
    }
}

/// Hits and mean coverage of every grid point over all queries.
pub fn run_sensitivity(
    queries: &[SensitivityQuery<'_>],
    grid: &[GridPoint],
    patterns: Option<&PathTypeSet>,
) -> Result<Vec<SensitivityRow>, PipelineError> {
    if grid.is_empty() {
        return Err(PipelineError::EmptyGrid);
    }
    grid.iter()
        .map(|&point| {
            let runs = queries
                .par_iter()
                .map(|q| {
                    let config = ExpansionConfig {
                        k: point.k.resolve(q.graph.len()),
                        depth: point.depth,
                        budget: point.budget,
                        strategy: point.strategy,
                        pattern_set: patterns.cloned(),
                        ..ExpansionConfig::default()
                    };
                    let anchors = select_anchors(q.graph, q.table, &q.query, config.k)?;
                    Ok((expand(q.graph, &anchors, &config)?, q.gold, q.graph.len()))
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            let refs: Vec<_> = runs.iter().map(|(s, g, n)| (s, *g, *n)).collect();
            let m = measure_hits_coverage(&refs)?;
            Ok(SensitivityRow {
                point,
                hits: m.hit_rate,
                coverage: m.coverage,
            })
        })
        .collect()
}
