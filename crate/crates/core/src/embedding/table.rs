use std::fmt::Write as _;

use super::{normalize_in_place, EmbeddingError, EmbeddingVector, Encoder};
use crate::graph::{NodeId, Rsg};

const HEADER_TAG: &str = "rsg-embeddings";
const FORMAT_VERSION: u32 = 1;

/// Dense node-id indexed store of unit vectors sharing one dimension and
/// one encoder provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    d: usize,
    provenance: String,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Vectors for ids `0..vectors.len()`, each renormalized.
    pub fn from_vectors(
        provenance: impl Into<String>,
        d: usize,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self, EmbeddingError> {
        let mut data = Vec::with_capacity(vectors.len() * d);
        for (record, mut v) in vectors.into_iter().enumerate() {
            if v.len() != d {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite { record });
            }
            normalize_in_place(&mut v);
            data.extend(v);
        }
        Ok(EmbeddingTable {
            d,
            provenance: provenance.into(),
            data,
        })
    }

    /// Embeds every node's `source_text`.
    pub fn build(graph: &Rsg, encoder: &dyn Encoder) -> Self {
        let d = encoder.dimension();
        let mut data = Vec::with_capacity(graph.len() * d);
        for node in graph.nodes() {
            data.extend(encoder.embed(&node.source_text).into_values());
        }
        EmbeddingTable {
            d,
            provenance: encoder.provenance(),
            data,
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, id: NodeId) -> &[f64] {
        &self.data[id.0 * self.d..(id.0 + 1) * self.d]
    }

    pub fn vector(&self, id: NodeId) -> EmbeddingVector {
        EmbeddingVector {
            values: self.get(id).to_vec(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Errors when the table does not cover exactly the nodes of `graph`.
    pub fn check_covers(&self, graph: &Rsg) -> Result<(), EmbeddingError> {
        if self.len() < graph.len() {
            return Err(EmbeddingError::MissingNode(self.len()));
        }
        if self.len() > graph.len() {
            return Err(EmbeddingError::UnknownNode {
                record: graph.len(),
                node: graph.len(),
                len: graph.len(),
            });
        }
        Ok(())
    }

    pub fn check_provenance(&self, other: &str) -> Result<(), EmbeddingError> {
        if self.provenance != other {
            return Err(EmbeddingError::ProvenanceMismatch {
                left: self.provenance.clone(),
                right: other.to_string(),
            });
        }
        Ok(())
    }

    /// Wire format: `rsg-embeddings <version> <d> <provenance>` then one
    /// `<id> <v_1> .. <v_d>` line per node, 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_TAG} {FORMAT_VERSION} {} {}\n", self.d, self.provenance);
        for (id, row) in self.rows().enumerate() {
            out.push_str(&id.to_string());
            for v in row {
                write!(out, " {v:.8e}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the wire format. When `expected_nodes` is given every id in
    /// `0..expected_nodes` must appear exactly once.
    pub fn import_external(
        text: &str,
        expected_nodes: Option<usize>,
    ) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(EmbeddingError::Format {
            line: 1,
            message: "missing header".into(),
        })?;
        let mut parts = header.splitn(4, ' ');
        let bad_header = |message: &str| EmbeddingError::Format {
            line: 1,
            message: message.into(),
        };
        if parts.next() != Some(HEADER_TAG) {
            return Err(bad_header("expected `rsg-embeddings` header"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad_header("bad version"))?;
        if version != FORMAT_VERSION {
            return Err(bad_header(&format!("unsupported version {version}")));
        }
        let d: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| bad_header("bad dimension"))?;
        let provenance = parts.next().unwrap_or("").trim().to_string();

        let mut rows: Vec<Option<Vec<f64>>> = Vec::new();
        for (record, (line_no, line)) in lines.enumerate() {
            let mut fields = line.split_whitespace();
            let id: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| EmbeddingError::Format {
                    line: line_no + 1,
                    message: "bad node id".into(),
                })?;
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| EmbeddingError::Format {
                        line: line_no + 1,
                        message: format!("bad number `{f}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if values.len() != d {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: d,
                    got: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite { record });
            }
            if let Some(len) = expected_nodes {
                if id >= len {
                    return Err(EmbeddingError::UnknownNode {
                        record,
                        node: id,
                        len,
                    });
                }
            }
            if rows.len() <= id {
                rows.resize(id + 1, None);
            }
            if rows[id].is_some() {
                return Err(EmbeddingError::DuplicateNode(id));
            }
            rows[id] = Some(values);
        }
        let n = expected_nodes.unwrap_or(rows.len());
        rows.resize(n.max(rows.len()), None);
        let mut data = Vec::with_capacity(n * d);
        for (id, row) in rows.into_iter().enumerate() {
            let mut row = row.ok_or(EmbeddingError::MissingNode(id))?;
            let norm = super::dot(&row, &row).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                normalize_in_place(&mut row);
            }
            data.extend(row);
        }
        Ok(EmbeddingTable { d, provenance, data })
    }
}
