//! Unit-norm node and query vectors, the feature-hashing baseline encoder,
//! the embeddings table and exact cosine kNN.

mod knn;
mod table;

use thiserror::Error;

pub use knn::knn_search;
pub use table::EmbeddingTable;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("cannot encode empty text")]
    EmptyText,
    #[error("dimension {0} is not a power of two >= 16")]
    BadDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("record {record}: non-finite value")]
    NonFinite { record: usize },
    #[error("missing embedding for node {0}")]
    MissingNode(usize),
    #[error("duplicate embedding for node {0}")]
    DuplicateNode(usize),
    #[error("record {record} references node {node} outside the graph ({len} nodes)")]
    UnknownNode {
        record: usize,
        node: usize,
        len: usize,
    },
    #[error("K = {k} out of range for a table of {len} entries")]
    BadK { k: usize, len: usize },
    #[error("provenance mismatch: `{left}` vs `{right}`")]
    ProvenanceMismatch { left: String, right: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// A finite, unit-norm vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `values`; an all-zero input becomes basis vector 0.
    pub fn from_raw(mut values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { record: 0 });
        }
        normalize_in_place(&mut values);
        Ok(EmbeddingVector { values })
    }

    pub fn basis(d: usize, index: usize) -> Self {
        let mut values = vec![0.0; d];
        values[index] = 1.0;
        EmbeddingVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.values, other)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales to unit norm; zero vectors become basis vector 0.
pub(crate) fn normalize_in_place(values: &mut [f64]) {
    let norm = dot(values, values).sqrt();
    if norm == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        values[0] = 1.0;
    } else {
        values.iter_mut().for_each(|v| *v /= norm);
    }
}

/// A text encoder identified by a provenance string.
pub trait Encoder: Send + Sync {
    fn provenance(&self) -> String;
    fn dimension(&self) -> usize;
    /// Embeds arbitrary text, including empty text.
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Encodes a query or node text; empty text is rejected.
pub fn encode(encoder: &dyn Encoder, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
    if text.is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    Ok(encoder.embed(text))
}

pub const BASELINE_PROVENANCE_PREFIX: &str = "baseline-hash-v1";

/// Bag-of-tokens feature hashing: lowercase `[A-Za-z0-9_]+` tokens, FNV-1a
/// 64-bit hash, bucket = low bits, sign = top bit, term counts, L2 norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineEmbedder {
    d: usize,
}

impl BaselineEmbedder {
    pub fn new(d: usize) -> Result<Self, EmbeddingError> {
        if d < 16 || !d.is_power_of_two() {
            return Err(EmbeddingError::BadDimension(d));
        }
        Ok(BaselineEmbedder { d })
    }

    /// Recovers the embedder from a provenance string it produced.
    pub fn from_provenance(provenance: &str) -> Option<Self> {
        let mut parts = provenance.split_whitespace();
        if parts.next()? != BASELINE_PROVENANCE_PREFIX {
            return None;
        }
        let d = parts.next()?.strip_prefix("d=")?.parse().ok()?;
        BaselineEmbedder::new(d).ok()
    }
}

impl Encoder for BaselineEmbedder {
    fn provenance(&self) -> String {
        format!("{BASELINE_PROVENANCE_PREFIX} d={} text=source_text", self.d)
    }

    fn dimension(&self) -> usize {
        self.d
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        baseline_embed(text, self.d)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// (bucket, sign) of a token for dimension `d`.
pub fn token_slot(token: &str, d: usize) -> (usize, f64) {
    let h = fnv1a64(token.as_bytes());
    let bucket = (h as usize) & (d - 1);
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Baseline embedding at dimension `d` (a power of two >= 16). Text without
/// tokens maps to basis vector 0.
pub fn baseline_embed(text: &str, d: usize) -> EmbeddingVector {
    assert!(d >= 16 && d.is_power_of_two(), "bad dimension {d}");
    let mut values = vec![0.0; d];
    for token in tokenize(text) {
        let (bucket, sign) = token_slot(&token, d);
        values[bucket] += sign;
    }
    normalize_in_place(&mut values);
    EmbeddingVector { values }
}
