//! On-disk graph document: a JSON object holding `format_version` plus the
//! `nodes`, `edges` and `meta` arrays. Node ids are array indexes.

use serde::{Deserialize, Serialize};

use super::{GraphError, Rsg, RsgEdge, RsgNode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaEntry {
    pub key: String,
    pub value: String,
}

impl MetaEntry {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        MetaEntry {
            key: key.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub format_version: u32,
    pub nodes: Vec<RsgNode>,
    pub edges: Vec<RsgEdge>,
    pub meta: Vec<MetaEntry>,
}

impl Rsg {
    pub fn to_document(&self, meta: Vec<MetaEntry>) -> GraphDocument {
        GraphDocument {
            format_version: FORMAT_VERSION,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            meta,
        }
    }

    /// Serializes the graph; output is byte-stable for equal graphs and meta.
    pub fn to_json(&self, meta: Vec<MetaEntry>) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_document(meta))
            .expect("graph document is always serializable");
        text.push('\n');
        text
    }

    /// Loads a graph document without enforcing structural invariants, so
    /// corrupted files can still be inspected with [`Rsg::validate`].
    pub fn from_json(text: &str) -> Result<(Rsg, Vec<MetaEntry>), GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        Rsg::from_document(doc)
    }

    pub fn from_document(doc: GraphDocument) -> Result<(Rsg, Vec<MetaEntry>), GraphError> {
        if doc.format_version != FORMAT_VERSION {
            return Err(GraphError::Format(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        Ok((Rsg::from_parts(doc.nodes, doc.edges), doc.meta))
    }
}
