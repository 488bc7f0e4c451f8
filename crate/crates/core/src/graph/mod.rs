//! Repository semantic graph: typed code entities and the five relation
//! families connecting them.
//!
//! Edges are stored forward-only. Inverse labels (imported-by, caller,
//! owned-by, enclosed-by, inherited-by) are a traversal view produced by
//! [`Rsg::neighbors`] with [`DirectionFilter::Reverse`].

mod io;
mod validate;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{GraphDocument, MetaEntry, FORMAT_VERSION};
pub use validate::{Violation, ViolationKind};

/// Dense node index. Node ids are array positions in [`Rsg::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Function,
    Method,
    Class,
    Script,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [
        NodeKind::Function,
        NodeKind::Method,
        NodeKind::Class,
        NodeKind::Script,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Function => "Function",
            NodeKind::Method => "Method",
            NodeKind::Class => "Class",
            NodeKind::Script => "Script",
        }
    }

    pub fn is_callable(self) -> bool {
        matches!(self, NodeKind::Function | NodeKind::Method)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown node kind `{s}`"))
    }
}

/// Relation families. The declaration order is the ordinal used for
/// deterministic neighbor ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    Imports,
    Invokes,
    Owns,
    Encloses,
    Inherits,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        RelationKind::Imports,
        RelationKind::Invokes,
        RelationKind::Owns,
        RelationKind::Encloses,
        RelationKind::Inherits,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Imports => "Imports",
            RelationKind::Invokes => "Invokes",
            RelationKind::Owns => "Owns",
            RelationKind::Encloses => "Encloses",
            RelationKind::Inherits => "Inherits",
        }
    }

    /// Label of the relation when traversed from `dst` back to `src`.
    pub fn inverse_label(self) -> &'static str {
        match self {
            RelationKind::Imports => "ImportedBy",
            RelationKind::Invokes => "Caller",
            RelationKind::Owns => "OwnedBy",
            RelationKind::Encloses => "EnclosedBy",
            RelationKind::Inherits => "InheritedBy",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown relation kind `{s}`"))
    }
}

/// Small bit set over [`RelationKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RelationSet(u8);

impl RelationSet {
    pub const fn all() -> Self {
        RelationSet(0b1_1111)
    }

    pub const fn empty() -> Self {
        RelationSet(0)
    }

    pub fn only(kind: RelationKind) -> Self {
        RelationSet(1 << kind.ordinal())
    }

    pub fn with(mut self, kind: RelationKind) -> Self {
        self.0 |= 1 << kind.ordinal();
        self
    }

    pub fn contains(self, kind: RelationKind) -> bool {
        self.0 & (1 << kind.ordinal()) != 0
    }
}

impl FromIterator<RelationKind> for RelationSet {
    fn from_iter<I: IntoIterator<Item = RelationKind>>(iter: I) -> Self {
        iter.into_iter().fold(RelationSet::empty(), RelationSet::with)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionFilter {
    Forward,
    Reverse,
    Both,
}

impl DirectionFilter {
    fn forward(self) -> bool {
        matches!(self, DirectionFilter::Forward | DirectionFilter::Both)
    }

    fn reverse(self) -> bool {
        matches!(self, DirectionFilter::Reverse | DirectionFilter::Both)
    }
}

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: usize,
    pub end_line: usize,
}

impl Span {
    pub fn new(start_line: usize, end_line: usize) -> Self {
        Span {
            start_line,
            end_line,
        }
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start_line <= other.start_line && other.end_line <= self.end_line
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start_line <= other.end_line && other.start_line <= self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsgNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub name: String,
    pub qualified_name: String,
    pub file_path: String,
    pub span: Span,
    pub source_text: String,
    /// Name plus parameter list for functions and methods; empty otherwise.
    pub signature: String,
}

impl RsgNode {
    /// Node with a placeholder id; [`Rsg::add_node`] assigns the real one.
    pub fn new(
        kind: NodeKind,
        name: impl Into<String>,
        qualified_name: impl Into<String>,
        file_path: impl Into<String>,
        span: Span,
        source_text: impl Into<String>,
    ) -> Self {
        RsgNode {
            id: NodeId(usize::MAX),
            kind,
            name: name.into(),
            qualified_name: qualified_name.into(),
            file_path: file_path.into(),
            span,
            source_text: source_text.into(),
            signature: String::new(),
        }
    }

    pub fn with_signature(mut self, signature: impl Into<String>) -> Self {
        self.signature = signature.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RsgEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: RelationKind,
}

impl RsgEdge {
    pub fn new(src: NodeId, dst: NodeId, relation: RelationKind) -> Self {
        RsgEdge { src, dst, relation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbor {
    pub node: NodeId,
    pub relation: RelationKind,
    pub direction: Direction,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("file `{file_path}` already has a Script node ({existing})")]
    DuplicateScript { file_path: String, existing: NodeId },
    #[error("qualified name `{0}` is already taken even after span disambiguation")]
    DuplicateQualifiedName(String),
    #[error("malformed node `{qualified_name}`: {reason}")]
    MalformedNode {
        qualified_name: String,
        reason: String,
    },
    #[error("{relation} edge {src} -> {dst} violates constraint: {constraint}")]
    KindConstraint {
        relation: RelationKind,
        src: NodeId,
        dst: NodeId,
        constraint: &'static str,
    },
    #[error("graph format: {0}")]
    Format(String),
}

/// The repository semantic graph.
///
/// Built in a single-writer phase through [`Rsg::add_node`] and
/// [`Rsg::add_edge`]; afterwards all queries take `&self`.
#[derive(Debug, Clone, Default)]
pub struct Rsg {
    nodes: Vec<RsgNode>,
    edges: Vec<RsgEdge>,
    edge_set: HashSet<RsgEdge>,
    /// Per node, `(relation, dst)` sorted ascending.
    forward: Vec<Vec<(RelationKind, NodeId)>>,
    /// Per node, `(relation, src)` sorted ascending.
    reverse: Vec<Vec<(RelationKind, NodeId)>>,
    file_index: BTreeMap<String, NodeId>,
    qualified_index: HashSet<String>,
}

impl Rsg {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[RsgNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RsgEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Result<&RsgNode, GraphError> {
        self.nodes.get(id.0).ok_or(GraphError::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    pub fn script_for(&self, file_path: &str) -> Option<NodeId> {
        self.file_index.get(file_path).copied()
    }

    pub fn file_index(&self) -> &BTreeMap<String, NodeId> {
        &self.file_index
    }

    pub fn has_edge(&self, edge: &RsgEdge) -> bool {
        self.edge_set.contains(edge)
    }

    /// Appends `node` under the next dense id.
    ///
    /// A qualified name that collides with an existing node is suffixed
    /// with `#<start_line>`.
    pub fn add_node(&mut self, mut node: RsgNode) -> Result<NodeId, GraphError> {
        if node.span.start_line == 0 || node.span.start_line > node.span.end_line {
            return Err(GraphError::MalformedNode {
                qualified_name: node.qualified_name,
                reason: format!(
                    "span ({}, {}) is not a 1-based ordered range",
                    node.span.start_line, node.span.end_line
                ),
            });
        }
        if !node.kind.is_callable() && !node.signature.is_empty() {
            return Err(GraphError::MalformedNode {
                qualified_name: node.qualified_name,
                reason: format!("{} nodes carry no signature", node.kind),
            });
        }
        if node.kind == NodeKind::Script {
            if let Some(&existing) = self.file_index.get(&node.file_path) {
                return Err(GraphError::DuplicateScript {
                    file_path: node.file_path,
                    existing,
                });
            }
        }
        if self.qualified_index.contains(&node.qualified_name) {
            let suffixed = format!("{}#{}", node.qualified_name, node.span.start_line);
            if self.qualified_index.contains(&suffixed) {
                return Err(GraphError::DuplicateQualifiedName(suffixed));
            }
            node.qualified_name = suffixed;
        }

        let id = NodeId(self.nodes.len());
        node.id = id;
        if node.kind == NodeKind::Script {
            self.file_index.insert(node.file_path.clone(), id);
        }
        self.qualified_index.insert(node.qualified_name.clone());
        self.nodes.push(node);
        self.forward.push(Vec::new());
        self.reverse.push(Vec::new());
        Ok(id)
    }

    /// Stores `edge`. Returns `false` when the triple was already present.
    pub fn add_edge(&mut self, edge: RsgEdge) -> Result<bool, GraphError> {
        let src = self.node(edge.src)?;
        let dst = self.node(edge.dst)?;
        check_edge_kinds(edge, src, dst)?;
        if !self.edge_set.insert(edge) {
            return Ok(false);
        }
        self.edges.push(edge);
        self.index_edge(edge);
        Ok(true)
    }

    fn index_edge(&mut self, edge: RsgEdge) {
        let fwd = &mut self.forward[edge.src.0];
        let key = (edge.relation, edge.dst);
        if let Err(pos) = fwd.binary_search(&key) {
            fwd.insert(pos, key);
        }
        let rev = &mut self.reverse[edge.dst.0];
        let key = (edge.relation, edge.src);
        if let Err(pos) = rev.binary_search(&key) {
            rev.insert(pos, key);
        }
    }

    /// Neighbors of `node`, ordered by relation ordinal, then node id, then
    /// direction (forward before reverse).
    pub fn neighbors(
        &self,
        node: NodeId,
        relations: RelationSet,
        direction: DirectionFilter,
    ) -> Result<Vec<Neighbor>, GraphError> {
        if !self.contains(node) {
            return Err(GraphError::UnknownNode(node));
        }
        let mut out = Vec::new();
        self.for_each_neighbor(node, relations, direction, |n| out.push(n));
        if direction == DirectionFilter::Both {
            out.sort_unstable_by_key(|n| (n.relation, n.node, n.direction));
        }
        Ok(out)
    }

    /// Unsorted-across-direction visitor used on hot paths. Within each
    /// direction the visit order is `(relation, node id)`.
    pub(crate) fn for_each_neighbor(
        &self,
        node: NodeId,
        relations: RelationSet,
        direction: DirectionFilter,
        mut visit: impl FnMut(Neighbor),
    ) {
        if direction.forward() {
            for &(relation, dst) in &self.forward[node.0] {
                if relations.contains(relation) {
                    visit(Neighbor {
                        node: dst,
                        relation,
                        direction: Direction::Forward,
                    });
                }
            }
        }
        if direction.reverse() {
            for &(relation, src) in &self.reverse[node.0] {
                if relations.contains(relation) {
                    visit(Neighbor {
                        node: src,
                        relation,
                        direction: Direction::Reverse,
                    });
                }
            }
        }
    }

    /// Forward targets of `node` under `relation`, ascending.
    pub fn targets(&self, node: NodeId, relation: RelationKind) -> impl Iterator<Item = NodeId> + '_ {
        self.forward[node.0]
            .iter()
            .filter(move |(r, _)| *r == relation)
            .map(|&(_, n)| n)
    }

    /// Reverse sources of `node` under `relation`, ascending.
    pub fn sources(&self, node: NodeId, relation: RelationKind) -> impl Iterator<Item = NodeId> + '_ {
        self.reverse[node.0]
            .iter()
            .filter(move |(r, _)| *r == relation)
            .map(|&(_, n)| n)
    }

    /// Distinct nodes adjacent to `node` over any relation in either
    /// direction, excluding `node` itself. Ascending order.
    pub fn undirected_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.forward[node.0]
            .iter()
            .chain(self.reverse[node.0].iter())
            .map(|&(_, n)| n)
            .filter(|&n| n != node)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Rebuilds a graph from raw parts without enforcing edge constraints.
    /// Edges whose endpoints are out of range are kept in the edge list but
    /// not indexed, so [`Rsg::validate`] can report them.
    pub(crate) fn from_parts(nodes: Vec<RsgNode>, edges: Vec<RsgEdge>) -> Self {
        let n = nodes.len();
        let mut graph = Rsg {
            forward: vec![Vec::new(); n],
            reverse: vec![Vec::new(); n],
            ..Rsg::default()
        };
        for node in &nodes {
            if node.kind == NodeKind::Script {
                graph
                    .file_index
                    .entry(node.file_path.clone())
                    .or_insert(node.id);
            }
            graph.qualified_index.insert(node.qualified_name.clone());
        }
        graph.nodes = nodes;
        for edge in edges {
            let in_range = edge.src.0 < n && edge.dst.0 < n;
            if graph.edge_set.insert(edge) && in_range {
                graph.index_edge(edge);
            }
            graph.edges.push(edge);
        }
        graph
    }

    pub(crate) fn forward_rows(&self) -> &[Vec<(RelationKind, NodeId)>] {
        &self.forward
    }

    pub(crate) fn reverse_rows(&self) -> &[Vec<(RelationKind, NodeId)>] {
        &self.reverse
    }
}

/// Checks the per-relation kind constraints of a single edge.
pub(crate) fn check_edge_kinds(
    edge: RsgEdge,
    src: &RsgNode,
    dst: &RsgNode,
) -> Result<(), GraphError> {
    use NodeKind::*;
    let violated = |constraint| {
        Err(GraphError::KindConstraint {
            relation: edge.relation,
            src: edge.src,
            dst: edge.dst,
            constraint,
        })
    };
    match edge.relation {
        RelationKind::Imports => {
            if src.kind != Script {
                return violated("Imports source must be a Script");
            }
            if !matches!(dst.kind, Script | Function | Class) {
                return violated("Imports target must be a Script, Function or Class");
            }
        }
        RelationKind::Invokes => {
            if !src.kind.is_callable() {
                return violated("Invokes source must be a Function or Method");
            }
            if !dst.kind.is_callable() {
                return violated("Invokes target must be a Function or Method");
            }
        }
        RelationKind::Owns => {
            if src.kind != Class {
                return violated("Owns source must be a Class");
            }
            if dst.kind != Method {
                return violated("Owns target must be a Method");
            }
        }
        RelationKind::Encloses => {
            if src.kind != Script {
                return violated("Encloses source must be a Script");
            }
            if dst.kind == Script {
                return violated("Encloses target must be a Function, Method or Class");
            }
            if src.file_path != dst.file_path {
                return violated("Encloses endpoints must share a file");
            }
        }
        RelationKind::Inherits => {
            if src.kind != Class || dst.kind != Class {
                return violated("Inherits endpoints must both be Classes");
            }
            if edge.src == edge.dst {
                return violated("a Class cannot inherit from itself");
            }
        }
    }
    Ok(())
}
