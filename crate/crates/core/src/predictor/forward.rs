use std::collections::HashMap;

use super::{AugmentedGraph, GnnModel, Matrix};
use crate::embedding::EmbeddingTable;
use crate::graph::NodeId;

/// The L-hop receptive field of a set of target nodes in an augmented
/// graph, in local indices.
///
/// Nodes are ordered by hop distance from the targets (targets first), so
/// the nodes a layer must compute always form a prefix. Restricting the
/// computation to this field gives the same target outputs as running
/// every layer over the whole graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGraph {
    pub nodes: Vec<NodeId>,
    /// Deduplicated undirected neighbors (self excluded); filled for nodes
    /// closer than L hops, empty for the outermost ring.
    pub adj: Vec<Vec<usize>>,
    /// `active[l]`: nodes whose layer-l output is computed (l = 0..=L).
    pub active: Vec<usize>,
    pub targets: usize,
}

impl LocalGraph {
    pub fn receptive_field(view: &AugmentedGraph<'_>, targets: &[NodeId], layers: usize) -> Self {
        let mut index: HashMap<NodeId, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut dist = Vec::new();
        for &t in targets {
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(t) {
                e.insert(nodes.len());
                nodes.push(t);
                dist.push(0usize);
            }
        }
        let n_targets = nodes.len();
        let mut adj: Vec<Vec<usize>> = Vec::new();
        let mut head = 0;
        while head < nodes.len() {
            let v = nodes[head];
            let dv = dist[head];
            if dv < layers {
                let mut row = Vec::new();
                for u in view.undirected_neighbors(v) {
                    let local = *index.entry(u).or_insert_with(|| {
                        nodes.push(u);
                        dist.push(dv + 1);
                        nodes.len() - 1
                    });
                    row.push(local);
                }
                adj.push(row);
            } else {
                adj.push(Vec::new());
            }
            head += 1;
        }
        let active = (0..=layers)
            .map(|l| dist.iter().filter(|&&d| d + l <= layers).count())
            .collect();
        LocalGraph {
            nodes,
            adj,
            active,
            targets: n_targets,
        }
    }

    /// Every node of the view, each a target.
    pub fn full(view: &AugmentedGraph<'_>, layers: usize) -> Self {
        let nodes: Vec<NodeId> = (0..view.len()).map(NodeId).collect();
        let adj = nodes
            .iter()
            .map(|&v| view.undirected_neighbors(v).into_iter().map(|u| u.0).collect())
            .collect();
        let n = nodes.len();
        LocalGraph {
            nodes,
            adj,
            active: vec![n; layers + 1],
            targets: n,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Layer-0 inputs: table rows for graph nodes, `query` for the query node.
    pub fn inputs(&self, view: &AugmentedGraph<'_>, table: &EmbeddingTable) -> Matrix {
        let d = table.dimension();
        let mut m = Matrix::zeros(self.nodes.len(), d);
        for (i, &n) in self.nodes.iter().enumerate() {
            if n == view.query_id() {
                m.row_mut(i).copy_from_slice(view.query().embedding.values());
            } else {
                m.row_mut(i).copy_from_slice(table.get(n));
            }
        }
        m
    }
}

/// Per-layer values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `outputs[0]` is the input; `outputs[l]` has `active[l]` rows.
    pub outputs: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
    pub neighbor_means: Vec<Matrix>,
}

impl ForwardCache {
    /// Final embeddings of the targets (first `targets` rows).
    pub fn final_embeddings(&self) -> &Matrix {
        self.outputs.last().expect("at least the input layer")
    }
}

/// Mean-aggregation message passing:
/// `z_v ← act(z_v · W_self + mean_{u ∈ N(v)} z_u · W_nbr)`, with a zero
/// mean for isolated nodes.
pub fn forward_local(model: &GnnModel, local: &LocalGraph, inputs: Matrix) -> ForwardCache {
    assert_eq!(inputs.cols(), model.input_dim(), "input dimension");
    let mut outputs = vec![inputs];
    let mut pre_activations = Vec::with_capacity(model.num_layers());
    let mut neighbor_means = Vec::with_capacity(model.num_layers());
    for (l, layer) in model.layers.iter().enumerate() {
        let prev = &outputs[l];
        let rows = local.active[l + 1];
        let (h_in, h_out) = (model.dims[l], model.dims[l + 1]);
        let mut means = Matrix::zeros(rows, h_in);
        let mut pre = Matrix::zeros(rows, h_out);
        for v in 0..rows {
            let nbrs = &local.adj[v];
            if !nbrs.is_empty() {
                let mean = means.row_mut(v);
                for &u in nbrs {
                    for (m, x) in mean.iter_mut().zip(prev.row(u)) {
                        *m += x;
                    }
                }
                let inv = 1.0 / nbrs.len() as f64;
                mean.iter_mut().for_each(|m| *m *= inv);
            }
            let out = pre.row_mut(v);
            layer.w_self.vec_mul_acc(prev.row(v), out);
            layer.w_nbr.vec_mul_acc(means.row(v), out);
        }
        let act = model.activation(l);
        let mut z = pre.clone();
        z.as_mut_slice().iter_mut().for_each(|x| *x = act.apply(*x));
        pre_activations.push(pre);
        neighbor_means.push(means);
        outputs.push(z);
    }
    ForwardCache {
        outputs,
        pre_activations,
        neighbor_means,
    }
}

/// Gradients with the same layout as [`GnnModel::flat`].
pub fn backward_local(
    model: &GnnModel,
    local: &LocalGraph,
    cache: &ForwardCache,
    grad_output: &Matrix,
    grad_score: &[f64],
) -> Vec<f64> {
    let layers = model.num_layers();
    let mut grad_w: Vec<(Matrix, Matrix)> = model
        .layers
        .iter()
        .map(|l| {
            (
                Matrix::zeros(l.w_self.rows(), l.w_self.cols()),
                Matrix::zeros(l.w_nbr.rows(), l.w_nbr.cols()),
            )
        })
        .collect();
    let mut grad_z = grad_output.clone();
    for l in (0..layers).rev() {
        let act = model.activation(l);
        let pre = &cache.pre_activations[l];
        let rows = local.active[l + 1];
        let prev = &cache.outputs[l];
        let h_in = model.dims[l];
        let mut grad_prev = Matrix::zeros(local.active[l], h_in);
        let layer = &model.layers[l];
        let (gw_self, gw_nbr) = &mut grad_w[l];
        let mut ga = vec![0.0; model.dims[l + 1]];
        let mut back = vec![0.0; h_in];
        for v in 0..rows {
            let mut any = false;
            for ((g, &dz), &a) in ga.iter_mut().zip(grad_z.row(v)).zip(pre.row(v)) {
                *g = dz * act.derivative(a);
                any |= *g != 0.0;
            }
            if !any {
                continue;
            }
            gw_self.add_outer(prev.row(v), &ga);
            gw_nbr.add_outer(cache.neighbor_means[l].row(v), &ga);
            layer.w_self.mul_vec_acc(&ga, grad_prev.row_mut(v));
            let nbrs = &local.adj[v];
            if !nbrs.is_empty() {
                back.iter_mut().for_each(|b| *b = 0.0);
                layer.w_nbr.mul_vec_acc(&ga, &mut back);
                let inv = 1.0 / nbrs.len() as f64;
                for &u in nbrs {
                    for (g, b) in grad_prev.row_mut(u).iter_mut().zip(&back) {
                        *g += b * inv;
                    }
                }
            }
        }
        grad_z = grad_prev;
    }
    let mut flat = Vec::with_capacity(model.num_params());
    for (s, n) in &grad_w {
        flat.extend_from_slice(s.as_slice());
        flat.extend_from_slice(n.as_slice());
    }
    flat.extend_from_slice(grad_score);
    flat
}
