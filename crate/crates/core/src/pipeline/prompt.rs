use std::str::FromStr;

use super::PipelineError;
use crate::graph::{NodeId, Rsg};

/// Lines above the prediction line kept by the in-file baseline.
pub const IN_FILE_WINDOW: usize = 30;

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Best context first.
    H2L,
    /// Best context last, next to the query.
    #[default]
    L2H,
}

impl FromStr for Ordering {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "h2l" => Ok(Ordering::H2L),
            "l2h" => Ok(Ordering::L2H),
            _ => Err(format!("unknown ordering `{s}` (l2h|h2l)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextBlock {
    pub node: Option<NodeId>,
    pub file_path: String,
    pub text: String,
}

impl ContextBlock {
    pub fn from_node(graph: &Rsg, node: NodeId) -> Self {
        let n = &graph.nodes()[node.0];
        ContextBlock {
            node: Some(node),
            file_path: n.file_path.clone(),
            text: n.source_text.clone(),
        }
    }

    /// `# <path>` header line, the source, and a trailing newline.
    pub fn render(&self) -> String {
        let mut out = format!("# {}\n{}", self.file_path, self.text);
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out
    }

    pub fn tokens(&self) -> usize {
        estimate_tokens(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPrompt {
    /// In prompt order.
    pub blocks: Vec<ContextBlock>,
    pub query: String,
    pub tokens: usize,
}

impl AssembledPrompt {
    pub fn text(&self) -> String {
        let mut out: String = self.blocks.iter().map(ContextBlock::render).collect();
        out.push_str(&self.query);
        out
    }
}

/// Packs `ranked` (best first) greedily until the next block would exceed
/// `budget`, then orders the kept blocks per `ordering`, query last.
pub fn assemble_prompt(
    query: &str,
    ranked: &[ContextBlock],
    ordering: Ordering,
    budget: Option<usize>,
) -> Result<AssembledPrompt, PipelineError> {
    let mut tokens = estimate_tokens(query);
    let budget = budget.unwrap_or(usize::MAX);
    if tokens > budget {
        return Err(PipelineError::BudgetTooSmall { budget, query: tokens });
    }
    let mut blocks = Vec::new();
    for block in ranked {
        let t = block.tokens();
        if tokens + t > budget {
            break;
        }
        tokens += t;
        blocks.push(block.clone());
    }
    if ordering == Ordering::L2H {
        blocks.reverse();
    }
    Ok(AssembledPrompt {
        blocks,
        query: query.to_string(),
        tokens,
    })
}

/// The gold context alone, then the query.
pub fn gold_only_prompt(query: &str, gold: ContextBlock) -> AssembledPrompt {
    let tokens = estimate_tokens(query) + gold.tokens();
    AssembledPrompt {
        blocks: vec![gold],
        query: query.to_string(),
        tokens,
    }
}

/// At most [`IN_FILE_WINDOW`] lines directly above 1-based `line`.
pub fn in_file_only_prompt(source: &str, line: usize) -> AssembledPrompt {
    let lines: Vec<&str> = source.lines().collect();
    let end = line.saturating_sub(1).min(lines.len());
    let start = end.saturating_sub(IN_FILE_WINDOW);
    let mut query = lines[start..end].join("\n");
    if !query.is_empty() {
        query.push('\n');
    }
    AssembledPrompt {
        blocks: Vec::new(),
        tokens: estimate_tokens(&query),
        query,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(name: &str, len: usize) -> ContextBlock {
        ContextBlock {
            node: None,
            file_path: name.into(),
            text: "x".repeat(len),
        }
    }

    #[test]
    fn orderings() {
        let ranked = [block("best", 3), block("second", 3), block("third", 3)];
        let names = |p: &AssembledPrompt| p.blocks.iter().map(|b| b.file_path.clone()).collect::<Vec<_>>();
        let l2h = assemble_prompt("q", &ranked, Ordering::L2H, None).unwrap();
        assert_eq!(names(&l2h), ["third", "second", "best"]);
        assert!(l2h.text().ends_with("# best\nxxx\nq"));
        let h2l = assemble_prompt("q", &ranked, Ordering::H2L, None).unwrap();
        assert_eq!(names(&h2l), ["best", "second", "third"]);
    }

    #[test]
    fn budget_admits_best_only() {
        // "# best\nxxx\n" is 11 chars = 3 tokens; query 1 token
        let ranked = [block("best", 3), block("second", 3)];
        for o in [Ordering::L2H, Ordering::H2L] {
            let p = assemble_prompt("q", &ranked, o, Some(5)).unwrap();
            assert_eq!(p.blocks.len(), 1);
            assert_eq!(p.blocks[0].file_path, "best");
            assert_eq!(p.tokens, 4);
        }
        assert!(matches!(
            assemble_prompt("query text", &ranked, Ordering::L2H, Some(2)),
            Err(PipelineError::BudgetTooSmall { budget: 2, query: 3 })
        ));
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn baselines() {
        let src: String = (1..=120).map(|i| format!("line{i}\n")).collect();
        let p = in_file_only_prompt(&src, 10);
        assert_eq!(p.query.lines().count(), 9);
        assert!(p.query.starts_with("line1\n"));
        let p = in_file_only_prompt(&src, 100);
        assert_eq!(p.query.lines().count(), 30);
        assert!(p.query.starts_with("line70\n") && p.query.ends_with("line99\n"));
        assert!(p.blocks.is_empty());
        assert_eq!(in_file_only_prompt(&src, 1).query, "");
        assert_eq!(gold_only_prompt("q", block("g", 2)).blocks.len(), 1);
    }
}
