//! Reading and writing artifacts together with their manifest sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rsg_core::embedding::EmbeddingTable;
use rsg_core::expansion::PathTypeSet;
use rsg_core::graph::Rsg;
use rsg_core::pipeline::{parse_records, ArtifactRef, Manifest, QueryRecord};
use rsg_core::predictor::GnnModel;

pub struct Loaded<T> {
    pub value: T,
    pub reference: ArtifactRef,
    pub manifest: Manifest,
}

/// Writes `text` to `path` and its manifest next to it.
pub fn write_artifact(path: &Path, text: &str, manifest: Manifest) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    let sidecar = Manifest::sidecar_path(path);
    fs::write(&sidecar, manifest.to_json()).with_context(|| format!("writing {}", sidecar.display()))?;
    log::info!("wrote {} ({})", path.display(), manifest.artifact.sha256);
    Ok(())
}

/// Reads an artifact and checks it against its manifest.
fn read_verified(path: &Path, kind: &str) -> Result<(String, Manifest)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let sidecar = Manifest::sidecar_path(path);
    let text = fs::read_to_string(&sidecar)
        .with_context(|| format!("{} has no manifest at {}", path.display(), sidecar.display()))?;
    let manifest = Manifest::from_json(&text)?;
    if manifest.kind != kind {
        bail!("{} is a {} artifact, expected {kind}", path.display(), manifest.kind);
    }
    manifest.verify(&bytes)?;
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok((text, manifest))
}

pub fn load_graph(path: &Path) -> Result<Loaded<Rsg>> {
    let (text, manifest) = read_verified(path, "graph")?;
    let (graph, _) = Rsg::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Loaded {
        reference: manifest.artifact.clone(),
        value: graph,
        manifest,
    })
}

pub fn load_table(path: &Path, graph: &Loaded<Rsg>) -> Result<Loaded<EmbeddingTable>> {
    let (text, manifest) = read_verified(path, "embeddings")?;
    manifest.check_input("graph", &graph.reference.sha256)?;
    let table = EmbeddingTable::import_external(&text, Some(graph.value.len()))
        .with_context(|| format!("parsing {}", path.display()))?;
    table.check_covers(&graph.value)?;
    Ok(Loaded {
        reference: manifest.artifact.clone(),
        value: table,
        manifest,
    })
}

pub fn load_model(path: &Path, table: &Loaded<EmbeddingTable>) -> Result<Loaded<GnnModel>> {
    let (text, manifest) = read_verified(path, "model")?;
    manifest.check_input("embeddings", &table.reference.sha256)?;
    let model = GnnModel::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Loaded {
        reference: manifest.artifact.clone(),
        value: model,
        manifest,
    })
}

pub fn load_patterns(path: &Path, graph: &Loaded<Rsg>) -> Result<Loaded<PathTypeSet>> {
    let (text, manifest) = read_verified(path, "patterns")?;
    manifest.check_input("graph", &graph.reference.sha256)?;
    let set = PathTypeSet::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Loaded {
        reference: manifest.artifact.clone(),
        value: set,
        manifest,
    })
}

/// Reads records and rejects any that name a graph other than `graph_path`.
/// A record's graph path is taken relative to the records file.
pub fn load_records(path: &Path, graph_path: &Path) -> Result<Vec<QueryRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let records = parse_records(&text).with_context(|| format!("parsing {}", path.display()))?;
    let expected = canonical(graph_path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for r in &records {
        if let Some(g) = &r.graph {
            let named = canonical(&base.join(g))
                .with_context(|| format!("record `{}` names graph {g}", r.id))?;
            if named != expected {
                bail!(
                    "record `{}` refers to graph {g}, but this run uses {}",
                    r.id,
                    graph_path.display()
                );
            }
        }
    }
    Ok(records)
}

fn canonical(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))
}
