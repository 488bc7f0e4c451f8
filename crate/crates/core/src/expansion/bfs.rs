use std::collections::{BTreeMap, HashSet, VecDeque};

use super::{BudgetScope, ExpansionConfig, ExpansionError, PathStep, PathType, PathTypeSet, Strategy};
use crate::graph::{DirectionFilter, NodeId, RelationSet, Rsg, RsgEdge};

/// The anchor and path type by which a node was first reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub anchor: NodeId,
    pub path: PathType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedSubgraph {
    pub anchors: Vec<(NodeId, f64)>,
    /// A_exp in discovery order.
    pub nodes: Vec<NodeId>,
    pub records: BTreeMap<NodeId, PathRecord>,
    /// Nodes reached by each anchor's BFS, anchor included.
    pub per_anchor_reached: Vec<usize>,
    /// Edges of the graph with both ends in A_exp.
    pub edges: Vec<RsgEdge>,
}

impl ExpandedSubgraph {
    pub fn contains(&self, node: NodeId) -> bool {
        self.records.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn anchor_ids(&self) -> Vec<NodeId> {
        self.anchors.iter().map(|a| a.0).collect()
    }
}

/// BFS from each anchor over all relations in both directions, at most
/// `depth` hops and `budget` reached nodes per anchor (anchor included).
pub fn exhausted_expand(
    graph: &Rsg,
    anchors: &[(NodeId, f64)],
    depth: usize,
    budget: usize,
) -> ExpandedSubgraph {
    run(graph, anchors, depth, budget, BudgetScope::PerAnchor, None)
}

/// As [`exhausted_expand`] but a node is admitted only when the path type
/// of the step that reaches it is admitted by `patterns`.
pub fn pattern_expand(
    graph: &Rsg,
    anchors: &[(NodeId, f64)],
    depth: usize,
    budget: usize,
    patterns: &PathTypeSet,
) -> Result<ExpandedSubgraph, ExpansionError> {
    if patterns.is_empty() {
        return Err(ExpansionError::EmptyPatternSet);
    }
    Ok(run(graph, anchors, depth, budget, BudgetScope::PerAnchor, Some(patterns)))
}

/// Expansion per `config`'s strategy and budget scope.
pub fn expand(
    graph: &Rsg,
    anchors: &[(NodeId, f64)],
    config: &ExpansionConfig,
) -> Result<ExpandedSubgraph, ExpansionError> {
    config.validate()?;
    Ok(match config.strategy {
        Strategy::Knn => run(graph, anchors, 0, usize::MAX, config.budget_scope, None),
        Strategy::Exhausted => run(graph, anchors, config.depth, config.budget, config.budget_scope, None),
        Strategy::Pattern => run(
            graph,
            anchors,
            config.depth,
            config.budget,
            config.budget_scope,
            config.pattern_set.as_ref(),
        ),
    })
}

fn run(
    graph: &Rsg,
    anchors: &[(NodeId, f64)],
    depth: usize,
    budget: usize,
    scope: BudgetScope,
    filter: Option<&PathTypeSet>,
) -> ExpandedSubgraph {
    let mut out = ExpandedSubgraph {
        anchors: anchors.to_vec(),
        nodes: Vec::new(),
        records: BTreeMap::new(),
        per_anchor_reached: Vec::with_capacity(anchors.len()),
        edges: Vec::new(),
    };
    for &(a, _) in anchors {
        if let std::collections::btree_map::Entry::Vacant(slot) = out.records.entry(a) {
            slot.insert(PathRecord {
                anchor: a,
                path: PathType::origin(graph.nodes()[a.0].kind),
            });
            out.nodes.push(a);
        }
    }

    for &(anchor, _) in anchors {
        let origin = PathType::origin(graph.nodes()[anchor.0].kind);
        let mut visited: HashSet<NodeId> = HashSet::from([anchor]);
        let mut reached = 1usize;
        let mut queue = VecDeque::from([(anchor, origin)]);
        let full = |reached: usize, total: usize| match scope {
            BudgetScope::PerAnchor => reached >= budget,
            BudgetScope::Global => total >= budget,
        };
        'bfs: while let Some((u, path)) = queue.pop_front() {
            if path.len() >= depth {
                continue;
            }
            let neighbors = graph
                .neighbors(u, RelationSet::all(), DirectionFilter::Both)
                .expect("expansion visits existing nodes");
            for nb in neighbors {
                if visited.contains(&nb.node) {
                    continue;
                }
                let step = PathStep {
                    relation: nb.relation,
                    direction: nb.direction,
                    kind: graph.nodes()[nb.node.0].kind,
                };
                let next = path.extended(step);
                if let Some(p) = filter {
                    if !p.admits(&next) {
                        continue;
                    }
                }
                let is_new = !out.records.contains_key(&nb.node);
                if full(reached, out.nodes.len()) && (scope == BudgetScope::PerAnchor || is_new) {
                    break 'bfs;
                }
                visited.insert(nb.node);
                reached += 1;
                if is_new {
                    out.records.insert(
                        nb.node,
                        PathRecord {
                            anchor,
                            path: next.clone(),
                        },
                    );
                    out.nodes.push(nb.node);
                }
                queue.push_back((nb.node, next));
            }
        }
        out.per_anchor_reached.push(reached);
    }

    for &n in &out.nodes {
        for edge in graph
            .neighbors(n, RelationSet::all(), DirectionFilter::Forward)
            .expect("existing node")
        {
            if out.records.contains_key(&edge.node) {
                out.edges.push(RsgEdge::new(n, edge.node, edge.relation));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeKind, RelationKind, RsgNode, Span};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use proptest::strategy::Strategy as _;
    use std::collections::BTreeSet;

    fn script(g: &mut Rsg, name: &str) -> NodeId {
        g.add_node(RsgNode::new(NodeKind::Script, name, name, format!("{name}.py"), Span::new(1, 1), ""))
            .unwrap()
    }

    fn func(g: &mut Rsg, s: NodeId, name: &str, line: usize) -> NodeId {
        let file = g.nodes()[s.0].file_path.clone();
        let f = g
            .add_node(
                RsgNode::new(NodeKind::Function, name, format!("{file}:{name}"), &file, Span::new(line, line), "")
                    .with_signature(format!("{name}()")),
            )
            .unwrap();
        g.add_edge(RsgEdge::new(s, f, RelationKind::Encloses)).unwrap();
        f
    }

    /// Functions a-b-c-d chained by Invokes, each in its own file.
    fn chain() -> (Rsg, Vec<NodeId>) {
        let mut g = Rsg::new();
        let mut fs = Vec::new();
        for name in ["a", "b", "c", "d"] {
            let s = script(&mut g, name);
            fs.push(func(&mut g, s, name, 2));
        }
        for w in fs.windows(2) {
            g.add_edge(RsgEdge::new(w[0], w[1], RelationKind::Invokes)).unwrap();
        }
        (g, fs)
    }

    #[test]
    fn chain_depth_two() {
        let (g, fs) = chain();
        let anchors = [(fs[0], 1.0)];
        let only_invokes: Vec<NodeId> = exhausted_expand(&g, &anchors, 2, 10)
            .nodes
            .into_iter()
            .filter(|n| g.nodes()[n.0].kind == NodeKind::Function)
            .collect();
        assert_eq!(only_invokes, vec![fs[0], fs[1], fs[2]]);
    }

    /// Bare Invokes chain without scripts, so only the four functions exist.
    #[test]
    fn bare_invokes_chain_depth_two() {
        let nodes: Vec<RsgNode> = ["a", "b", "c", "d"]
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut node = RsgNode::new(NodeKind::Function, *n, *n, "m.py", Span::new(i + 1, i + 1), "");
                node.id = NodeId(i);
                node
            })
            .collect();
        let edges = (0..3)
            .map(|i| RsgEdge::new(NodeId(i), NodeId(i + 1), RelationKind::Invokes))
            .collect();
        let g = Rsg::from_parts(nodes, edges);
        let sub = exhausted_expand(&g, &[(NodeId(0), 1.0)], 2, 10);
        assert_eq!(sub.nodes, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(sub.records[&NodeId(2)].path.to_string(), "Function -Invokes-> Function -Invokes-> Function");
    }

    #[test]
    fn zero_depth_is_identity() {
        let (g, fs) = chain();
        let sub = exhausted_expand(&g, &[(fs[1], 1.0), (fs[3], 0.5)], 0, 10);
        assert_eq!(sub.nodes, vec![fs[1], fs[3]]);
    }

    #[test]
    fn star_budget_counts_anchor() {
        let mut g = Rsg::new();
        let center = script(&mut g, "center");
        let leaves: Vec<NodeId> = (0..10).map(|i| func(&mut g, center, &format!("leaf{i}"), i + 2)).collect();
        let sub = exhausted_expand(&g, &[(center, 1.0)], 1, 5);
        assert_eq!(sub.nodes, vec![center, leaves[0], leaves[1], leaves[2], leaves[3]]);
        assert_eq!(sub.per_anchor_reached, vec![5]);
    }

    /// Script s imports f from t.py and is imported by u; class C in s
    /// inherits from D in t.py.
    fn branches() -> (Rsg, BTreeMap<&'static str, NodeId>) {
        let mut g = Rsg::new();
        let s = script(&mut g, "s");
        let t = script(&mut g, "t");
        let f = func(&mut g, t, "f", 2);
        let class = |g: &mut Rsg, sc: NodeId, name: &str| {
            let file = g.nodes()[sc.0].file_path.clone();
            let c = g
                .add_node(RsgNode::new(NodeKind::Class, name, format!("{file}:{name}"), &file, Span::new(5, 6), ""))
                .unwrap();
            g.add_edge(RsgEdge::new(sc, c, RelationKind::Encloses)).unwrap();
            c
        };
        let c = class(&mut g, s, "C");
        let d = class(&mut g, t, "D");
        g.add_edge(RsgEdge::new(s, f, RelationKind::Imports)).unwrap();
        g.add_edge(RsgEdge::new(c, d, RelationKind::Inherits)).unwrap();
        (g, BTreeMap::from([("s", s), ("t", t), ("f", f), ("C", c), ("D", d)]))
    }

    #[test]
    fn pattern_keeps_only_the_import_branch() {
        let (g, ids) = branches();
        let p = PathTypeSet::from_entries([("Script -Imports-> Function".parse().unwrap(), 1)]);
        let sub = pattern_expand(&g, &[(ids["s"], 1.0)], 3, 100, &p).unwrap();
        assert_eq!(sub.nodes, vec![ids["s"], ids["f"]]);
        let all = exhausted_expand(&g, &[(ids["s"], 1.0)], 3, 100);
        assert!(all.contains(ids["C"]) && all.contains(ids["D"]));
    }

    #[test]
    fn no_conforming_step_leaves_anchors() {
        let (g, ids) = branches();
        let p = PathTypeSet::from_entries([("Method <-Owns- Class".parse().unwrap(), 1)]);
        let sub = pattern_expand(&g, &[(ids["s"], 1.0)], 3, 100, &p).unwrap();
        assert_eq!(sub.nodes, vec![ids["s"]]);
        assert!(pattern_expand(&g, &[(ids["s"], 1.0)], 3, 100, &PathTypeSet::default()).is_err());
    }

    #[test]
    fn induced_edges_and_global_budget() {
        let (g, ids) = branches();
        let sub = exhausted_expand(&g, &[(ids["s"], 1.0)], 1, 100);
        assert!(sub.edges.contains(&RsgEdge::new(ids["s"], ids["f"], RelationKind::Imports)));
        assert!(!sub.edges.iter().any(|e| e.relation == RelationKind::Inherits));
        let config = ExpansionConfig {
            depth: 4,
            budget: 3,
            budget_scope: BudgetScope::Global,
            ..Default::default()
        };
        let sub = expand(&g, &[(ids["s"], 1.0), (ids["t"], 0.5)], &config).unwrap();
        assert_eq!(sub.len(), 3);
    }

    /// Random schema-valid graphs: files with functions, classes and
    /// methods, then random typed edges accepted by the graph.
    pub(crate) fn random_graph(files: usize, per_file: usize, extra: &[(usize, usize, usize)]) -> Rsg {
        let mut g = Rsg::new();
        let mut ids = Vec::new();
        for f in 0..files {
            let path = format!("f{f}.py");
            let s = g
                .add_node(RsgNode::new(NodeKind::Script, "s", format!("f{f}"), &path, Span::new(1, 1), ""))
                .unwrap();
            ids.push(s);
            let mut last_class = None;
            for e in 0..per_file {
                let kind = match (e % 3, last_class) {
                    (0, _) | (2, None) => NodeKind::Function,
                    (1, _) => NodeKind::Class,
                    _ => NodeKind::Method,
                };
                let mut node = RsgNode::new(kind, "e", format!("f{f}.e{e}"), &path, Span::new(e + 2, e + 2), "");
                if kind.is_callable() {
                    node = node.with_signature("e()");
                }
                let id = g.add_node(node).unwrap();
                g.add_edge(RsgEdge::new(s, id, RelationKind::Encloses)).unwrap();
                if kind == NodeKind::Class {
                    last_class = Some(id);
                }
                if kind == NodeKind::Method {
                    g.add_edge(RsgEdge::new(last_class.unwrap(), id, RelationKind::Owns)).unwrap();
                }
                ids.push(id);
            }
        }
        for &(a, b, r) in extra {
            let _ = g.add_edge(RsgEdge::new(ids[a % ids.len()], ids[b % ids.len()], RelationKind::ALL[r % 5]));
        }
        g
    }

    fn arb_case() -> impl proptest::strategy::Strategy<Value = (Rsg, Vec<(NodeId, f64)>, usize, usize)> {
        (
            1usize..6,
            1usize..6,
            proptest::collection::vec((0usize..100, 0usize..100, 0usize..5), 0..60),
            proptest::collection::vec(0usize..100, 1..4),
            0usize..5,
            1usize..12,
        )
            .prop_map(|(files, per, extra, anchors, depth, budget)| {
                let g = random_graph(files, per, &extra);
                let mut seen = BTreeSet::new();
                let anchors: Vec<(NodeId, f64)> = anchors
                    .into_iter()
                    .map(|a| NodeId(a % g.len()))
                    .filter(|a| seen.insert(*a))
                    .map(|a| (a, 1.0))
                    .collect();
                (g, anchors, depth, budget)
            })
    }

    proptest! {
        #[test]
        fn depth_and_budget_bounds((g, anchors, depth, budget) in arb_case()) {
            let sub = exhausted_expand(&g, &anchors, depth, budget);
            prop_assert!(sub.records.values().all(|r| r.path.len() <= depth));
            prop_assert!(sub.per_anchor_reached.iter().all(|&c| c <= budget));
            for (a, _) in &anchors {
                prop_assert!(sub.contains(*a));
            }
        }

        #[test]
        fn pattern_subset_and_vacuous_equivalence((g, anchors, depth, _b) in arb_case(), pick in 0usize..1000) {
            let big = usize::MAX;
            let full = exhausted_expand(&g, &anchors, depth, big);
            let universal = PathTypeSet::universal(depth.max(1));
            let vacuous = pattern_expand(&g, &anchors, depth, big, &universal).unwrap();
            prop_assert_eq!(&vacuous, &full);
            let observed: Vec<PathType> = full.records.values().filter(|r| !r.path.is_empty()).map(|r| r.path.clone()).collect();
            if !observed.is_empty() {
                let p = PathTypeSet::from_entries([(observed[pick % observed.len()].clone(), 1)]);
                let filtered = pattern_expand(&g, &anchors, depth, big, &p).unwrap();
                prop_assert!(filtered.nodes.iter().all(|n| full.contains(*n)));
            }
        }

        #[test]
        fn monotone_in_depth((g, anchors, depth, _b) in arb_case()) {
            let small = exhausted_expand(&g, &anchors, depth, usize::MAX);
            let large = exhausted_expand(&g, &anchors, depth + 1, usize::MAX);
            prop_assert!(small.nodes.iter().all(|n| large.contains(*n)));
        }

        #[test]
        fn deterministic((g, anchors, depth, budget) in arb_case()) {
            prop_assert_eq!(exhausted_expand(&g, &anchors, depth, budget), exhausted_expand(&g, &anchors, depth, budget));
        }
    }
}
