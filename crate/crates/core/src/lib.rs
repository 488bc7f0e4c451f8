//! Repository-level semantic graph retrieval for code completion.
//!
//! The crate builds a typed graph over a Python repository (functions,
//! methods, classes and per-file script residues joined by import, invoke,
//! ownership, enclosure and inheritance relations), anchors an incomplete
//! snippet in it with exact cosine kNN, expands the anchors with bounded
//! breadth-first search, re-ranks the expanded nodes with a GraphSAGE link
//! predictor and packs the winners into a completion prompt.

pub mod graph;
pub mod embedding;
pub mod expansion;
pub mod parser;
pub mod pipeline;
pub mod predictor;
pub mod synth;
