//! End-to-end orchestration: records, retrieval, prompt assembly,
//! completion clients, metrics, sensitivity sweeps and artifact manifests.

mod align;
mod completion;
mod dataset;
mod manifest;
mod metrics;
mod prompt;
mod records;
mod retrieve;
mod sensitivity;

use thiserror::Error;

pub use align::{align_gold, jaccard, GOLD_JACCARD_THRESHOLD};
pub use completion::{
    complete, complete_all, CompletionClient, CompletionError, HttpClient, StubClient,
    ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub use dataset::{prepare_queries, resolve_gold, PreparedQuery};
pub use manifest::{sha256_hex, ArtifactRef, Manifest};
pub use metrics::{acc_at_k, exact_match, normalize_line, RetrievalOutcome};
pub use prompt::{
    assemble_prompt, estimate_tokens, gold_only_prompt, in_file_only_prompt, AssembledPrompt,
    ContextBlock, Ordering, IN_FILE_WINDOW,
};
pub use records::{parse_records, QueryRecord};
pub use retrieve::{
    candidate_universe, known_edges, query_node, retrieve, ContextPolicy, RetrievalRequest,
    RetrievalResult, UniverseMode,
};
pub use sensitivity::{run_sensitivity, GridPoint, GridK, SensitivityQuery, SensitivityRow};

use crate::embedding::EmbeddingError;
use crate::expansion::ExpansionError;
use crate::predictor::PredictorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("record line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("no encoder can be rebuilt from table provenance `{0}`")]
    UnknownEncoder(String),
    #[error("token budget {budget} is smaller than the query alone ({query} tokens)")]
    BudgetTooSmall { budget: usize, query: usize },
    #[error("record `{0}` has no gold snippet")]
    MissingGold(String),
    #[error("k must be at least 1")]
    BadK,
    #[error("empty sensitivity grid")]
    EmptyGrid,
    #[error("grid line {line}: {message}")]
    Grid { line: usize, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
}
