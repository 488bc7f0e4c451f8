//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p rsg-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsg_core::embedding::{encode, knn_search, BaselineEmbedder, EmbeddingTable, EmbeddingVector};
use rsg_core::expansion::{
    exhausted_expand, measure_hits_coverage, mine_path_patterns, pattern_expand, select_anchors,
    ExpandedSubgraph, ExpansionConfig, MiningSample, PathTypeSet, Strategy,
};
use rsg_core::graph::{NodeId, NodeKind, RelationKind, Rsg, RsgEdge, RsgNode, Span};
use rsg_core::parser::{build_rsg, BuildOptions};
use rsg_core::pipeline::{
    acc_at_k, exact_match, prepare_queries, resolve_gold, RetrievalOutcome, UniverseMode,
};
use rsg_core::predictor::{
    attach_query, cosine_rerank, forward, loss, rank, sample_gradient, train, GnnModel, QueryNode,
    TrainConfig, TrainingSample, UniverseKind, DEFAULT_EPOCHS, DEFAULT_LAYERS, DEFAULT_LEARNING_RATE,
};
use rsg_core::synth::{link_corpus, planted_path_corpus};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/shop")
}

// ---------------------------------------------------------------- 1

fn graph_fidelity() -> Outcome {
    let root = fixture_dir();
    let expected = std::fs::read_to_string(root.join("inventory.txt")).map_err(|e| e.to_string())?;
    let mut want_nodes = Vec::new();
    let mut want_edges = BTreeSet::new();
    for line in expected.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f[0] {
            "node" => want_nodes.push(f[1..].join(" ")),
            "edge" => {
                want_edges.insert(f[1..].join(" "));
            }
            other => return Err(format!("bad inventory line kind `{other}`")),
        }
    }

    let build = || build_rsg(&root, &BuildOptions::default());
    let out = build().map_err(|e| e.to_string())?;
    let g = &out.graph;
    let got_nodes: Vec<String> = g
        .nodes()
        .iter()
        .map(|n| {
            format!(
                "{} {} {} {} {}-{}",
                n.id.0, n.kind, n.qualified_name, n.file_path, n.span.start_line, n.span.end_line
            )
        })
        .collect();
    let got_edges: BTreeSet<String> = g
        .edges()
        .iter()
        .map(|e| {
            format!(
                "{} {} {}",
                g.nodes()[e.src.0].qualified_name,
                e.relation,
                g.nodes()[e.dst.0].qualified_name
            )
        })
        .collect();
    for (w, h) in want_nodes.iter().zip(&got_nodes) {
        ensure(w == h, || format!("node mismatch: expected `{w}`, built `{h}`"))?;
    }
    ensure(want_nodes.len() == got_nodes.len(), || {
        format!("{} nodes expected, {} built", want_nodes.len(), got_nodes.len())
    })?;
    let missing: Vec<_> = want_edges.difference(&got_edges).collect();
    let extra: Vec<_> = got_edges.difference(&want_edges).collect();
    ensure(missing.is_empty() && extra.is_empty(), || {
        format!("edges missing {missing:?}, unexpected {extra:?}")
    })?;
    ensure(g.edges().len() == got_edges.len(), || "duplicate edges".into())?;
    let relations: BTreeSet<RelationKind> = g.edges().iter().map(|e| e.relation).collect();
    ensure(relations.len() == 5, || format!("only {relations:?} present"))?;
    let violations = g.validate();
    ensure(violations.is_empty(), || format!("violations: {violations:?}"))?;
    let first = g.to_json(out.meta.clone());
    let again = build().map_err(|e| e.to_string())?;
    ensure(first == again.graph.to_json(again.meta.clone()), || "rebuild differs".into())?;
    Ok(format!(
        "{} nodes, {} edges, 0 violations, rebuild byte-identical",
        got_nodes.len(),
        got_edges.len()
    ))
}

// ---------------------------------------------------------------- 2

/// Brute force: score every row, sort by score descending then id.
fn brute_force_knn(table: &EmbeddingTable, query: &EmbeddingVector, k: usize) -> Vec<(NodeId, f64)> {
    let mut all: Vec<(NodeId, f64)> = (0..table.len())
        .map(|i| {
            let row = table.get(NodeId(i));
            let mut s = 0.0;
            for (q, r) in query.values().iter().zip(row) {
                s += q * r;
            }
            (NodeId(i), s)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn knn_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checks = 0;
    for trial in 0..100 {
        let n = rng.random_range(10..=500);
        let d = rng.random_range(2..=64);
        let mut vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        // exact duplicates exercise the id tie-break
        for _ in 0..n / 10 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            vectors[b] = vectors[a].clone();
        }
        let table = EmbeddingTable::from_vectors("trial", d, vectors).map_err(|e| e.to_string())?;
        let query = if trial % 4 == 0 {
            table.vector(NodeId(rng.random_range(0..n)))
        } else {
            EmbeddingVector::from_raw((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .map_err(|e| e.to_string())?
        };
        for k in [1, 3, 5, 10] {
            let got = knn_search(&table, &query, k).map_err(|e| e.to_string())?;
            let want = brute_force_knn(&table, &query, k);
            ensure(got == want, || format!("trial {trial} (n={n}, d={d}, K={k}) differs"))?;
            checks += 1;
        }
    }
    Ok(format!("{checks} searches identical to brute force"))
}

// ---------------------------------------------------------------- 3

/// Scripts enclosing classes (with methods) and functions, plus random
/// imports, invocations and acyclic inheritance.
fn random_graph(rng: &mut ChaCha8Rng) -> Rsg {
    let mut g = Rsg::new();
    let mut scripts = Vec::new();
    let mut classes = Vec::new();
    let mut callables = Vec::new();
    // import targets: scripts, classes and functions
    let mut all = Vec::new();
    let files = rng.random_range(2..=10);
    let mut line = 1;
    for f in 0..files {
        let path = format!("m{f}.py");
        let s = g
            .add_node(RsgNode::new(NodeKind::Script, format!("m{f}"), format!("m{f}"), &path, Span::new(1, 1), ""))
            .unwrap();
        scripts.push(s);
        for e in 0..rng.random_range(1..=6) {
            line += 1;
            if rng.random_bool(0.4) {
                let c = g
                    .add_node(RsgNode::new(NodeKind::Class, "C", format!("m{f}.C{e}"), &path, Span::new(line, line), ""))
                    .unwrap();
                g.add_edge(RsgEdge::new(s, c, RelationKind::Encloses)).unwrap();
                classes.push(c);
                all.push(c);
                for m in 0..rng.random_range(0..=3) {
                    let id = g
                        .add_node(
                            RsgNode::new(NodeKind::Method, "m", format!("m{f}.C{e}.m{m}"), &path, Span::new(line, line), "")
                                .with_signature("m(self)"),
                        )
                        .unwrap();
                    g.add_edge(RsgEdge::new(s, id, RelationKind::Encloses)).unwrap();
                    g.add_edge(RsgEdge::new(c, id, RelationKind::Owns)).unwrap();
                    callables.push(id);
                }
            } else {
                let id = g
                    .add_node(
                        RsgNode::new(NodeKind::Function, "f", format!("m{f}.f{e}"), &path, Span::new(line, line), "")
                            .with_signature("f()"),
                    )
                    .unwrap();
                g.add_edge(RsgEdge::new(s, id, RelationKind::Encloses)).unwrap();
                callables.push(id);
                all.push(id);
            }
        }
    }
    for _ in 0..rng.random_range(0..=2 * callables.len()) {
        let a = callables[rng.random_range(0..callables.len())];
        let b = callables[rng.random_range(0..callables.len())];
        g.add_edge(RsgEdge::new(a, b, RelationKind::Invokes)).unwrap();
    }
    for _ in 0..rng.random_range(0..=files * 2) {
        let s = scripts[rng.random_range(0..scripts.len())];
        let target = if rng.random_bool(0.3) {
            scripts[rng.random_range(0..scripts.len())]
        } else {
            all[rng.random_range(0..all.len())]
        };
        if g.nodes()[target.0].file_path != g.nodes()[s.0].file_path {
            g.add_edge(RsgEdge::new(s, target, RelationKind::Imports)).unwrap();
        }
    }
    for i in 1..classes.len() {
        if rng.random_bool(0.5) {
            let parent = classes[rng.random_range(0..i)];
            g.add_edge(RsgEdge::new(classes[i], parent, RelationKind::Inherits)).unwrap();
        }
    }
    g
}

/// Undirected hop distance from `from` to every reachable node.
fn hop_distances(g: &Rsg, from: NodeId) -> BTreeMap<NodeId, usize> {
    let mut dist = BTreeMap::from([(from, 0)]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        for m in g.undirected_neighbors(n) {
            if !dist.contains_key(&m) {
                dist.insert(m, dist[&n] + 1);
                queue.push_back(m);
            }
        }
    }
    dist
}

fn node_set(s: &ExpandedSubgraph) -> BTreeSet<NodeId> {
    s.nodes.iter().copied().collect()
}

fn expansion_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked_nodes = 0;
    for trial in 0..50 {
        let g = random_graph(&mut rng);
        ensure(g.validate().is_empty(), || format!("graph {trial} is invalid"))?;
        let d = 16;
        let vectors = (0..g.len())
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let table = EmbeddingTable::from_vectors("rand", d, vectors).map_err(|e| e.to_string())?;
        let query = EmbeddingVector::from_raw((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .map_err(|e| e.to_string())?;
        let k = rng.random_range(1..=3.min(g.len()));
        let anchors = select_anchors(&g, &table, &query, k).map_err(|e| e.to_string())?;
        let depth = rng.random_range(0..=4);
        let budget = rng.random_range(1..=20);

        let sub = exhausted_expand(&g, &anchors, depth, budget);
        for (i, &reached) in sub.per_anchor_reached.iter().enumerate() {
            ensure(reached <= budget, || format!("graph {trial}: anchor {i} reached {reached} > M={budget}"))?;
        }
        for (node, record) in &sub.records {
            ensure(record.path.len() <= depth, || format!("graph {trial}: path longer than D"))?;
            let hops = hop_distances(&g, record.anchor);
            ensure(hops.get(node).is_some_and(|&h| h <= depth), || {
                format!("graph {trial}: {node:?} farther than D={depth} from its anchor")
            })?;
            checked_nodes += 1;
        }

        // filtered search never leaves the unfiltered result
        let unbounded = exhausted_expand(&g, &anchors, depth, usize::MAX);
        let observed: Vec<_> = unbounded.records.values().filter(|r| !r.path.is_empty()).map(|r| r.path.clone()).collect();
        if !observed.is_empty() {
            let pick = (0..=observed.len() / 2).map(|_| (observed[rng.random_range(0..observed.len())].clone(), 1));
            let patterns = PathTypeSet::from_entries(pick);
            let filtered = pattern_expand(&g, &anchors, depth, usize::MAX, &patterns).map_err(|e| e.to_string())?;
            ensure(node_set(&filtered).is_subset(&node_set(&unbounded)), || {
                format!("graph {trial}: pattern expansion left the exhausted set")
            })?;
        }

        // a filter admitting every path type changes nothing
        let vacuous = pattern_expand(&g, &anchors, depth, budget, &PathTypeSet::universal(depth.max(1)))
            .map_err(|e| e.to_string())?;
        ensure(vacuous == sub, || format!("graph {trial}: vacuous filter changed the expansion"))?;

        // deeper search only adds nodes
        let deeper = exhausted_expand(&g, &anchors, depth + 1, usize::MAX);
        ensure(node_set(&unbounded).is_subset(&node_set(&deeper)), || {
            format!("graph {trial}: D+1 lost nodes")
        })?;
    }
    Ok(format!("50 graphs, {checked_nodes} expanded nodes within bounds"))
}

// ---------------------------------------------------------------- 4

fn pattern_tradeoff() -> Outcome {
    let corpus = planted_path_corpus(200, 200, 30, 11);
    let g = rsg_core::parser::build_from_units(corpus.units.clone()).map_err(|e| e.to_string())?.graph;
    let encoder = BaselineEmbedder::new(64).map_err(|e| e.to_string())?;
    let table = EmbeddingTable::build(&g, &encoder);
    let resolve = |records: &[rsg_core::pipeline::QueryRecord]| -> Result<Vec<(EmbeddingVector, NodeId)>, String> {
        records
            .iter()
            .map(|r| Ok((encode(&encoder, &r.query).map_err(|e| e.to_string())?, resolve_gold(&g, r)?)))
            .collect()
    };
    let train = resolve(&corpus.train)?;
    let eval = resolve(&corpus.eval)?;
    let config = ExpansionConfig::default();
    let samples: Vec<MiningSample> = train
        .iter()
        .map(|(q, gold)| MiningSample { graph: &g, table: &table, query: q, gold: *gold })
        .collect();
    let patterns = mine_path_patterns(&samples, config.k, config.depth, config.budget, 0.9)
        .map_err(|e| e.to_string())?;
    let mut exhausted = Vec::new();
    let mut pattern = Vec::new();
    for (q, gold) in &eval {
        let anchors = select_anchors(&g, &table, q, config.k).map_err(|e| e.to_string())?;
        exhausted.push((exhausted_expand(&g, &anchors, config.depth, config.budget), *gold));
        pattern.push((
            pattern_expand(&g, &anchors, config.depth, config.budget, &patterns).map_err(|e| e.to_string())?,
            *gold,
        ));
    }
    let measure = |runs: &[(ExpandedSubgraph, NodeId)]| {
        let refs: Vec<_> = runs.iter().map(|(s, gold)| (s, *gold, g.len())).collect();
        measure_hits_coverage(&refs).map_err(|e| e.to_string())
    };
    let ex = measure(&exhausted)?;
    let pa = measure(&pattern)?;
    let detail = format!(
        "{} queries: exhausted hits {:.1}% coverage {:.3}%, pattern hits {:.1}% coverage {:.3}%",
        eval.len(),
        100.0 * ex.hit_rate,
        100.0 * ex.coverage,
        100.0 * pa.hit_rate,
        100.0 * pa.coverage
    );
    ensure(ex.hit_rate - pa.hit_rate <= 0.05, || format!("hit gap above 5 points; {detail}"))?;
    ensure(pa.coverage <= 0.8 * ex.coverage, || format!("coverage not 20% lower; {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 5

fn random_instance(rng: &mut ChaCha8Rng) -> (Rsg, EmbeddingTable, QueryNode, usize) {
    let n = rng.random_range(2..=19);
    let d = rng.random_range(2..=6);
    let mut g = Rsg::new();
    for i in 0..n {
        g.add_node(
            RsgNode::new(NodeKind::Function, "f", format!("m.f{i}"), "m.py", Span::new(i + 1, i + 1), "")
                .with_signature("f()"),
        )
        .unwrap();
    }
    for _ in 0..rng.random_range(0..=2 * n) {
        let a = NodeId(rng.random_range(0..n));
        let b = NodeId(rng.random_range(0..n));
        g.add_edge(RsgEdge::new(a, b, RelationKind::Invokes)).unwrap();
    }
    let vectors = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let table = EmbeddingTable::from_vectors("rand", d, vectors).unwrap();
    let links = (0..rng.random_range(0..=3))
        .map(|_| (RelationKind::Invokes, NodeId(rng.random_range(0..n))))
        .collect();
    let q = EmbeddingVector::from_raw((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    (g, table, QueryNode::new("q", q).with_edges(links), d)
}

/// Per layer `Z ← act(Z·W_self + Â·Z·W_nbr)` with dense matrices, `Â` the
/// row-normalized symmetric adjacency of G plus the query row.
fn dense_forward(model: &GnnModel, g: &Rsg, q: &QueryNode, table: &EmbeddingTable) -> Vec<Vec<f64>> {
    let n = g.len() + 1;
    let mut adj = vec![vec![0.0; n]; n];
    let mut link = |a: usize, b: usize| {
        if a != b {
            adj[a][b] = 1.0;
            adj[b][a] = 1.0;
        }
    };
    for e in g.edges() {
        link(e.src.0, e.dst.0);
    }
    for &(_, f) in &q.known_edges {
        link(n - 1, f.0);
    }
    for row in &mut adj {
        let deg: f64 = row.iter().sum();
        if deg > 0.0 {
            row.iter_mut().for_each(|a| *a /= deg);
        }
    }
    let mut z: Vec<Vec<f64>> = (0..g.len()).map(|i| table.get(NodeId(i)).to_vec()).collect();
    z.push(q.embedding.values().to_vec());
    let layers = model.layers.len();
    for (l, layer) in model.layers.iter().enumerate() {
        let d_in = z[0].len();
        let d_out = layer.w_self.cols();
        let az: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..d_in).map(|c| (0..n).map(|k| adj[i][k] * z[k][c]).sum()).collect())
            .collect();
        z = (0..n)
            .map(|i| {
                (0..d_out)
                    .map(|c| {
                        let mut v = 0.0;
                        for k in 0..d_in {
                            v += z[i][k] * layer.w_self[(k, c)] + az[i][k] * layer.w_nbr[(k, c)];
                        }
                        if l + 1 < layers { v.max(0.0) } else { v }
                    })
                    .collect()
            })
            .collect();
    }
    z
}

fn gnn_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_forward: f64 = 0.0;
    for i in 0..20 {
        let (g, table, q, d) = random_instance(&mut rng);
        let layers = rng.random_range(1..=3);
        let hidden = rng.random_range(2..=6);
        let model = GnnModel::with_layers(d, layers, Some(hidden), i).map_err(|e| e.to_string())?;
        let view = attach_query(&g, q.clone()).map_err(|e| e.to_string())?;
        let got = forward(&model, &view, &table).map_err(|e| e.to_string())?;
        let want = dense_forward(&model, &g, &q, &table);
        for (r, row) in want.iter().enumerate() {
            for (c, &w) in row.iter().enumerate() {
                let diff = (got[(r, c)] - w).abs();
                worst_forward = worst_forward.max(diff);
                ensure(diff <= 1e-9, || format!("instance {i}: forward differs by {diff:e} at ({r}, {c})"))?;
            }
        }
    }

    let mut worst_grad: f64 = 0.0;
    let mut draws = 0;
    while draws < 24 {
        let (g, table, q, d) = random_instance(&mut rng);
        let n = g.len();
        let model = GnnModel::with_layers(d, rng.random_range(1..=3), Some(rng.random_range(2..=5)), draws)
            .map_err(|e| e.to_string())?;
        let gold = NodeId(rng.random_range(0..n));
        let mut candidates: Vec<NodeId> = (0..n).map(NodeId).filter(|_| rng.random_bool(0.5)).collect();
        candidates.push(gold);
        candidates.sort();
        candidates.dedup();
        let sample = TrainingSample { graph: &g, table: &table, query: q.clone(), gold, candidates: candidates.clone() };
        let (_, analytic) = sample_gradient(&model, &sample).map_err(|e| e.to_string())?;

        // loss through the inference path: ranked probabilities and BCE
        let eval_loss = |m: &GnnModel| -> Result<f64, String> {
            let ranked = rank(m, &g, &table, &q, &candidates, UniverseKind::Explicit).map_err(|e| e.to_string())?;
            let (p, y): (Vec<f64>, Vec<f64>) = ranked
                .entries
                .iter()
                .map(|e| (e.probability, if e.node == gold { 1.0 } else { 0.0 }))
                .unzip();
            loss(&p, &y).map_err(|e| e.to_string())
        };
        let base = model.flat();
        let h = 1e-5;
        let mut numeric = vec![0.0; base.len()];
        let mut probe = model.clone();
        for j in 0..base.len() {
            let mut p = base.clone();
            p[j] = base[j] + h;
            probe.set_flat(&p);
            let up = eval_loss(&probe)?;
            p[j] = base[j] - h;
            probe.set_flat(&p);
            let down = eval_loss(&probe)?;
            numeric[j] = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        if scale < 1e-8 {
            continue;
        }
        let rel = norm(&diff) / scale;
        worst_grad = worst_grad.max(rel);
        ensure(rel <= 1e-4, || format!("draw {draws}: gradient relative error {rel:e}"))?;
        draws += 1;
    }
    Ok(format!(
        "20 instances, max forward error {worst_forward:.1e}; {draws} gradient draws, max relative error {worst_grad:.1e}"
    ))
}

// ---------------------------------------------------------------- 6

fn learning_efficacy() -> Outcome {
    let seed = 7;
    let corpus = link_corpus(200, 100, seed);
    let g = rsg_core::parser::build_from_units(corpus.units.clone()).map_err(|e| e.to_string())?.graph;
    let table = EmbeddingTable::build(&g, &BaselineEmbedder::new(64).map_err(|e| e.to_string())?);
    let config = ExpansionConfig::default();
    let (train_set, _) = prepare_queries(&g, &table, &corpus.train, &config, UniverseMode::Imported, true)
        .map_err(|e| e.to_string())?;
    let (eval_set, dropped) = prepare_queries(&g, &table, &corpus.eval, &config, UniverseMode::Imported, false)
        .map_err(|e| e.to_string())?;
    ensure(eval_set.len() == 100 && dropped.is_empty(), || format!("{} eval queries resolved", eval_set.len()))?;
    let samples: Vec<_> = train_set.iter().map(|p| p.training_sample(&g, &table)).collect();
    let mut model = GnnModel::with_layers(table.dimension(), DEFAULT_LAYERS, None, seed).map_err(|e| e.to_string())?;
    model.set_meta("encoder", table.provenance());
    train(&mut model, &samples, &TrainConfig { epochs: DEFAULT_EPOCHS, learning_rate: DEFAULT_LEARNING_RATE, seed })
        .map_err(|e| e.to_string())?;
    let mut predictor = Vec::new();
    let mut cosine = Vec::new();
    for p in &eval_set {
        let r = rank(&model, &g, &table, &p.query, &p.candidates, p.universe).map_err(|e| e.to_string())?;
        predictor.push(RetrievalOutcome { id: p.id.clone(), gold: p.gold, ranked: r.nodes() });
        let c = cosine_rerank(&p.query.embedding, &p.candidates, &table, p.universe).map_err(|e| e.to_string())?;
        cosine.push(RetrievalOutcome { id: p.id.clone(), gold: p.gold, ranked: c.nodes() });
    }
    let a = acc_at_k(&predictor, 1).map_err(|e| e.to_string())? / 100.0;
    let b = acc_at_k(&cosine, 1).map_err(|e| e.to_string())? / 100.0;
    let detail = format!("acc@1 predictor {a:.2}, cosine {b:.2} on {} held-out queries", eval_set.len());
    ensure(a >= 0.90 && b <= 0.60, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 7

fn rsg(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rsg"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`rsg {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

/// index, embed, train, retrieve and both evals; returns the output files.
fn pipeline_run(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let inputs = ["--graph", "g.rsg", "--emb", "e.tbl"];
    rsg(dir, &["synth", "--kind", "link", "--train", "60", "--eval", "30", "--seed", "5", "-o", "corpus"])?;
    rsg(dir, &["index", "corpus/repo", "-o", "g.rsg"])?;
    rsg(dir, &["embed", "g.rsg", "--encoder", "baseline", "-o", "e.tbl"])?;
    rsg(dir, &[&["train", "corpus/train.jsonl"], &inputs[..], &["--seed", "5", "-o", "m.gnn"]].concat())?;
    rsg(dir, &[&["retrieve", "corpus/eval.jsonl"], &inputs[..], &["--model", "m.gnn", "--top", "3", "-o", "ranked.jsonl"]].concat())?;
    rsg(dir, &[&["eval", "--task", "retrieval", "corpus/eval.jsonl"], &inputs[..], &["--model", "m.gnn", "-o", "retrieval.tsv"]].concat())?;
    rsg(dir, &[&["eval", "--task", "completion", "corpus/eval.jsonl"], &inputs[..], &["--model", "m.gnn", "--budget", "400", "-o", "completion.tsv"]].concat())?;
    ["m.gnn", "ranked.jsonl", "retrieval.tsv", "completion.tsv"]
        .iter()
        .map(|f| Ok((f.to_string(), std::fs::read(dir.join(f)).map_err(|e| e.to_string())?)))
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline_run(a.path())?;
    let second = pipeline_run(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    let table = String::from_utf8_lossy(&first[2].1).into_owned();
    let acc1 = table.lines().find(|l| l.starts_with("acc@1")).unwrap_or("").replace('\t', " ");
    Ok(format!("2 runs, model, rankings and metric tables byte-identical ({acc1})"))
}

// ---------------------------------------------------------------- 8

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for set in 0..200 {
        let outcomes: Vec<RetrievalOutcome> = (0..rng.random_range(1..30))
            .map(|i| {
                let mut ranked: Vec<NodeId> = (0..rng.random_range(0..12)).map(NodeId).collect();
                for j in (1..ranked.len()).rev() {
                    ranked.swap(j, rng.random_range(0..=j));
                }
                RetrievalOutcome { id: i.to_string(), gold: NodeId(rng.random_range(0..15)), ranked }
            })
            .collect();
        let mut last = 0.0;
        for k in 1..=15 {
            let acc = acc_at_k(&outcomes, k).map_err(|e| e.to_string())?;
            ensure(acc >= last, || format!("set {set}: acc@{k} = {acc} < acc@{} = {last}", k - 1))?;
            last = acc;
        }
    }
    ensure(acc_at_k(&[], 0).is_err(), || "k = 0 accepted".into())?;

    let table: [(&str, &str, bool); 10] = [
        ("  x = f( a )", "x = f( a )", true),
        ("x=f(a)", "x = f(a)", false),
        ("", "return x", false),
        ("return x\t", "return x", true),
        ("return  x", "return x", true),
        ("\treturn x\n", "    return x", true),
        ("return x;", "return x", false),
        ("Return x", "return x", false),
        ("a  =  b  +  c", "a = b + c", true),
        ("   ", "", true),
    ];
    for (p, gold, hit) in table {
        let em = exact_match(&[(p, gold)]);
        ensure(em == if hit { 100.0 } else { 0.0 }, || format!("EM({p:?}, {gold:?}) = {em}"))?;
    }
    let pairs: Vec<(&str, &str)> = table.iter().map(|(p, g, _)| (*p, *g)).collect();
    let em = exact_match(&pairs);
    ensure(em == 60.0, || format!("table EM {em}, expected 60"))?;
    Ok("200 random record sets monotone in k; 10-pair EM table scores 60.0".into())
}

// ---------------------------------------------------------------- 9

fn defaults() -> Outcome {
    let c = ExpansionConfig::default();
    ensure((c.depth, c.budget, c.k) == (4, 1000, 3), || format!("expansion defaults D={} M={} K={}", c.depth, c.budget, c.k))?;
    ensure(c.strategy == Strategy::Exhausted, || "default strategy".into())?;
    let t = TrainConfig::default();
    ensure(DEFAULT_LAYERS == 3, || format!("L = {DEFAULT_LAYERS}"))?;
    ensure(t.learning_rate == 0.01 && DEFAULT_LEARNING_RATE == 0.01, || format!("lr = {}", t.learning_rate))?;
    ensure(t.epochs == 10 && DEFAULT_EPOCHS == 10, || format!("epochs = {}", t.epochs))?;
    let help = Command::new(env!("CARGO_BIN_EXE_rsg"))
        .args(["train", "--help"])
        .output()
        .map_err(|e| e.to_string())?;
    let help = String::from_utf8_lossy(&help.stdout);
    for flag in ["[default: 3]", "[default: 0.01]", "[default: 10]", "[default: 4]", "[default: 1000]"] {
        ensure(help.contains(flag), || format!("`rsg train --help` lacks {flag}"))?;
    }
    Ok("D=4, M=1000, K=3, L=3, lr=0.01, epochs=10 in library and CLI".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("graph construction fidelity", Duration::from_secs(2), graph_fidelity),
        ("kNN oracle equivalence", Duration::from_secs(10), knn_equivalence),
        ("expansion bounds and equivalences", Duration::from_secs(30), expansion_properties),
        ("pattern vs exhausted trade-off", Duration::from_secs(60), pattern_tradeoff),
        ("GNN numerical correctness", Duration::from_secs(30), gnn_numerics),
        ("learning efficacy", Duration::from_secs(120), learning_efficacy),
        ("end-to-end determinism", Duration::from_secs(180), end_to_end_determinism),
        ("metric correctness", Duration::from_secs(1), metric_correctness),
        ("hyperparameter defaults", Duration::from_secs(1), defaults),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; over the {}s limit", limit.as_secs())),
            other => other,
        };
        let (status, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{status} [{}] {name}: {detail} ({:.2}s, limit {}s)",
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
