use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    attach_query, backward_local, check_dimensions, check_model, forward_local, sigmoid, GnnModel,
    LocalGraph, Matrix, PredictorError, QueryNode, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE,
    LOSS_EPSILON,
};
use crate::embedding::{dot, EmbeddingTable};
use crate::graph::{NodeId, Rsg};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// One query with its candidate universe; `gold` is the single positive.
#[derive(Debug, Clone)]
pub struct TrainingSample<'a> {
    pub graph: &'a Rsg,
    pub table: &'a EmbeddingTable,
    pub query: QueryNode,
    pub gold: NodeId,
    pub candidates: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
        }
    }
}

/// A sample resolved to its receptive field: candidates occupy local rows
/// `0..n`, the query row `n`.
struct Prepared {
    local: LocalGraph,
    inputs: Matrix,
    labels: Vec<f64>,
}

fn prepare(model: &GnnModel, index: usize, s: &TrainingSample<'_>) -> Result<Prepared, PredictorError> {
    check_model(model, s.table)?;
    let mut candidates = s.candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(PredictorError::EmptyCandidates);
    }
    if let Some(&c) = candidates.iter().find(|c| !s.graph.contains(**c)) {
        return Err(PredictorError::UnknownCandidate(c));
    }
    if candidates.binary_search(&s.gold).is_err() {
        return Err(PredictorError::GoldNotCandidate {
            sample: index,
            gold: s.gold,
        });
    }
    let view = attach_query(s.graph, s.query.clone())?;
    check_dimensions(&view, s.table)?;
    let labels = candidates
        .iter()
        .map(|&c| if c == s.gold { 1.0 } else { 0.0 })
        .collect();
    let mut targets = candidates;
    targets.push(view.query_id());
    let local = LocalGraph::receptive_field(&view, &targets, model.num_layers());
    let inputs = local.inputs(&view, s.table);
    Ok(Prepared {
        local,
        inputs,
        labels,
    })
}

/// Loss and flat gradient for one prepared sample.
fn loss_and_gradient(model: &GnnModel, p: &Prepared) -> (f64, Vec<f64>) {
    let cache = forward_local(model, &p.local, p.inputs.clone());
    let z = cache.final_embeddings();
    let h = model.output_dim();
    let n = p.labels.len();
    let q = n;
    let (w_node, w_query) = model.score.split_at(h);
    let query_term = dot(w_query, z.row(q));
    let mut total = 0.0;
    let mut grad_scores = vec![0.0; n];
    for (i, &y) in p.labels.iter().enumerate() {
        let s = dot(w_node, z.row(i)) + query_term;
        let prob = sigmoid(s);
        let clamped = prob.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
        total -= y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln();
        if clamped == prob {
            grad_scores[i] = (prob - y) / n as f64;
        }
    }
    let loss = total / n as f64;

    let mut grad_w = vec![0.0; 2 * h];
    let mut grad_z = Matrix::zeros(z.rows(), h);
    let g_sum: f64 = grad_scores.iter().sum();
    for (i, &g) in grad_scores.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (gw, zi) in grad_w[..h].iter_mut().zip(z.row(i)) {
            *gw += g * zi;
        }
        for (gz, w) in grad_z.row_mut(i).iter_mut().zip(w_node) {
            *gz += g * w;
        }
    }
    for (gw, zq) in grad_w[h..].iter_mut().zip(z.row(q)) {
        *gw += g_sum * zq;
    }
    for (gz, w) in grad_z.row_mut(q).iter_mut().zip(w_query) {
        *gz += g_sum * w;
    }
    let grad = backward_local(model, &p.local, &cache, &grad_z, &grad_w);
    (loss, grad)
}

/// Loss and gradient (in [`GnnModel::flat`] order) of a single sample.
pub fn sample_gradient(model: &GnnModel, sample: &TrainingSample<'_>) -> Result<(f64, Vec<f64>), PredictorError> {
    let p = prepare(model, 0, sample)?;
    Ok(loss_and_gradient(model, &p))
}

/// Adam over single-sample steps in a seeded per-epoch order. Returns the
/// mean loss of each epoch, each sample's loss taken before its update.
pub fn train(
    model: &mut GnnModel,
    samples: &[TrainingSample<'_>],
    config: &TrainConfig,
) -> Result<Vec<f64>, PredictorError> {
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(PredictorError::Config(format!(
            "learning rate {} must be finite and non-negative",
            config.learning_rate
        )));
    }
    if samples.is_empty() {
        return Err(PredictorError::Config("no training samples".into()));
    }
    let prepared: Vec<Prepared> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| prepare(model, i, s))
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = model.flat();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (loss, grad) = loss_and_gradient(model, &prepared[i]);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PredictorError::NonFiniteLoss { sample: i });
            }
            epoch_loss += loss;
            step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(step);
            let c2 = 1.0 - ADAM_BETA2.powi(step);
            for (((p, g), m), v) in params.iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
            }
            model.set_flat(&params);
        }
        trace.push(epoch_loss / prepared.len() as f64);
    }
    Ok(trace)
}
