use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{check_edge_kinds, GraphError, NodeId, NodeKind, RelationKind, Rsg, RsgEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ViolationKind {
    NonDenseId,
    InvertedSpan,
    SignatureOnNonCallable,
    DuplicateScript,
    MissingScript,
    DuplicateQualifiedName,
    DanglingEdge,
    EdgeKindConstraint,
    DuplicateEdge,
    AdjacencyMismatch,
    EnclosesParentCount,
    OwnsParentCount,
    InheritanceCycle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<RsgEdge>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

impl Violation {
    fn new(kind: ViolationKind, nodes: Vec<NodeId>, edges: Vec<RsgEdge>, detail: String) -> Self {
        Violation {
            kind,
            nodes,
            edges,
            detail,
        }
    }
}

impl Rsg {
    /// Checks every structural invariant and returns the violations found.
    /// An empty report means the graph is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.nodes.len();

        let mut scripts: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
        let mut files: BTreeMap<&str, ()> = BTreeMap::new();
        let mut qualified: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
        for (index, node) in self.nodes.iter().enumerate() {
            let at = NodeId(index);
            if node.id != at {
                out.push(Violation::new(
                    ViolationKind::NonDenseId,
                    vec![at],
                    vec![],
                    format!("node at index {index} carries id {}", node.id.0),
                ));
            }
            if node.span.start_line == 0 || node.span.start_line > node.span.end_line {
                out.push(Violation::new(
                    ViolationKind::InvertedSpan,
                    vec![at],
                    vec![],
                    format!(
                        "`{}` has span ({}, {})",
                        node.qualified_name, node.span.start_line, node.span.end_line
                    ),
                ));
            }
            if !node.kind.is_callable() && !node.signature.is_empty() {
                out.push(Violation::new(
                    ViolationKind::SignatureOnNonCallable,
                    vec![at],
                    vec![],
                    format!("{} `{}` has a signature", node.kind, node.qualified_name),
                ));
            }
            files.insert(&node.file_path, ());
            if node.kind == NodeKind::Script {
                scripts.entry(&node.file_path).or_default().push(at);
            }
            qualified.entry(&node.qualified_name).or_default().push(at);
        }
        for file in files.keys() {
            match scripts.get(file) {
                None => out.push(Violation::new(
                    ViolationKind::MissingScript,
                    vec![],
                    vec![],
                    format!("file `{file}` has no Script node"),
                )),
                Some(ids) if ids.len() > 1 => out.push(Violation::new(
                    ViolationKind::DuplicateScript,
                    ids.clone(),
                    vec![],
                    format!("file `{file}` has {} Script nodes", ids.len()),
                )),
                Some(_) => {}
            }
        }
        for (name, ids) in &qualified {
            if ids.len() > 1 {
                out.push(Violation::new(
                    ViolationKind::DuplicateQualifiedName,
                    ids.clone(),
                    vec![],
                    format!("qualified name `{name}` used by {} nodes", ids.len()),
                ));
            }
        }

        let mut seen = HashSet::new();
        let mut unique_edges = Vec::new();
        for &edge in &self.edges {
            if edge.src.0 >= n || edge.dst.0 >= n {
                out.push(Violation::new(
                    ViolationKind::DanglingEdge,
                    vec![],
                    vec![edge],
                    format!(
                        "{} edge {} -> {} references a missing node",
                        edge.relation, edge.src, edge.dst
                    ),
                ));
                continue;
            }
            if !seen.insert(edge) {
                out.push(Violation::new(
                    ViolationKind::DuplicateEdge,
                    vec![edge.src, edge.dst],
                    vec![edge],
                    format!("{} edge {} -> {} stored twice", edge.relation, edge.src, edge.dst),
                ));
                continue;
            }
            unique_edges.push(edge);
            if let Err(GraphError::KindConstraint { constraint, .. }) =
                check_edge_kinds(edge, &self.nodes[edge.src.0], &self.nodes[edge.dst.0])
            {
                out.push(Violation::new(
                    ViolationKind::EdgeKindConstraint,
                    vec![edge.src, edge.dst],
                    vec![edge],
                    constraint.to_string(),
                ));
            }
        }

        self.check_adjacency(&unique_edges, &mut out);

        let mut encloses_in = vec![0usize; n];
        let mut owns_in = vec![0usize; n];
        for edge in &unique_edges {
            match edge.relation {
                RelationKind::Encloses => encloses_in[edge.dst.0] += 1,
                RelationKind::Owns => owns_in[edge.dst.0] += 1,
                _ => {}
            }
        }
        for (index, node) in self.nodes.iter().enumerate() {
            if node.kind != NodeKind::Script && encloses_in[index] != 1 {
                out.push(Violation::new(
                    ViolationKind::EnclosesParentCount,
                    vec![NodeId(index)],
                    vec![],
                    format!(
                        "{} `{}` has {} inbound Encloses edges, expected 1",
                        node.kind, node.qualified_name, encloses_in[index]
                    ),
                ));
            }
            if node.kind == NodeKind::Method && owns_in[index] != 1 {
                out.push(Violation::new(
                    ViolationKind::OwnsParentCount,
                    vec![NodeId(index)],
                    vec![],
                    format!(
                        "Method `{}` has {} inbound Owns edges, expected 1",
                        node.qualified_name, owns_in[index]
                    ),
                ));
            }
        }

        for cycle in inheritance_cycles(n, &unique_edges) {
            let names: Vec<&str> = cycle
                .iter()
                .map(|id| self.nodes[id.0].qualified_name.as_str())
                .collect();
            out.push(Violation::new(
                ViolationKind::InheritanceCycle,
                cycle,
                vec![],
                format!("inheritance cycle {}", names.join(" -> ")),
            ));
        }
        out
    }

    fn check_adjacency(&self, edges: &[RsgEdge], out: &mut Vec<Violation>) {
        let n = self.nodes.len();
        let mut forward = vec![Vec::new(); n];
        let mut reverse = vec![Vec::new(); n];
        for edge in edges {
            forward[edge.src.0].push((edge.relation, edge.dst));
            reverse[edge.dst.0].push((edge.relation, edge.src));
        }
        for rows in forward.iter_mut().chain(reverse.iter_mut()) {
            rows.sort_unstable();
        }
        for index in 0..n {
            let stored_fwd = self.forward_rows().get(index);
            let stored_rev = self.reverse_rows().get(index);
            if stored_fwd != Some(&forward[index]) || stored_rev != Some(&reverse[index]) {
                out.push(Violation::new(
                    ViolationKind::AdjacencyMismatch,
                    vec![NodeId(index)],
                    vec![],
                    format!("adjacency index of node {index} disagrees with the edge list"),
                ));
            }
        }
    }
}

/// One cycle per back edge found by an iterative depth-first search over
/// Inherits edges, each listed from the re-entered node along the DFS path.
fn inheritance_cycles(n: usize, edges: &[RsgEdge]) -> Vec<Vec<NodeId>> {
    let mut children = vec![Vec::new(); n];
    for edge in edges {
        if edge.relation == RelationKind::Inherits && edge.src != edge.dst {
            children[edge.src.0].push(edge.dst.0);
        }
    }
    for row in &mut children {
        row.sort_unstable();
        row.dedup();
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color = vec![Color::White; n];
    let mut cycles = Vec::new();
    for root in 0..n {
        if color[root] != Color::White || children[root].is_empty() {
            continue;
        }
        let mut path: Vec<usize> = vec![root];
        let mut cursor: Vec<usize> = vec![0];
        color[root] = Color::Gray;
        while let Some(&top) = path.last() {
            let next = cursor.last_mut().expect("cursor tracks path");
            if *next < children[top].len() {
                let child = children[top][*next];
                *next += 1;
                match color[child] {
                    Color::White => {
                        color[child] = Color::Gray;
                        path.push(child);
                        cursor.push(0);
                    }
                    Color::Gray => {
                        let start = path.iter().position(|&p| p == child).expect("gray on path");
                        cycles.push(path[start..].iter().map(|&i| NodeId(i)).collect());
                    }
                    Color::Black => {}
                }
            } else {
                color[top] = Color::Black;
                path.pop();
                cursor.pop();
            }
        }
    }
    cycles
}
