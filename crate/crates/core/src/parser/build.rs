use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use super::resolve::{module_path_for, RegisteredFile, SymbolTable};
use super::{parse_source_unit, Diagnostic, DiagnosticKind, ParsedEntities, SourceUnit};
use crate::graph::{
    GraphError, MetaEntry, NodeId, NodeKind, RelationKind, Rsg, RsgEdge, RsgNode, Span, Violation,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOptions {
    /// Glob patterns matched against repo-relative paths.
    pub include: Vec<String>,
    pub exclude: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            include: vec!["**/*.py".into()],
            exclude: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid glob `{pattern}`: {message}")]
    Glob { pattern: String, message: String },
    #[error("no parseable source files ({} diagnostics)", diagnostics.len())]
    NoParseableFiles { diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("built graph violates {} invariants; first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub graph: Rsg,
    pub diagnostics: Vec<Diagnostic>,
    pub meta: Vec<MetaEntry>,
}

impl BuildOutput {
    /// Diagnostics sidecar: one JSON record per line.
    pub fn diagnostics_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            out.push_str(&serde_json::to_string(d).expect("diagnostic serializes"));
            out.push('\n');
        }
        out
    }
}

fn glob_set(patterns: &[String]) -> Result<GlobSet, BuildError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|e| BuildError::Glob {
            pattern: p.clone(),
            message: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| BuildError::Glob {
        pattern: patterns.join(","),
        message: e.to_string(),
    })
}

/// Walks `repo_root`, parses every selected file and assembles the graph.
pub fn build_rsg(repo_root: &Path, options: &BuildOptions) -> Result<BuildOutput, BuildError> {
    let include = glob_set(&options.include)?;
    let exclude = glob_set(&options.exclude)?;
    let mut paths = Vec::new();
    for entry in WalkDir::new(repo_root).sort_by_file_name() {
        let entry = entry.map_err(|e| BuildError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| repo_root.into()),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(repo_root)
            .expect("walkdir yields paths under the root");
        let rel = rel.to_string_lossy().replace('\\', "/");
        if include.is_match(&rel) && !exclude.is_match(&rel) {
            paths.push((rel, entry.path().to_path_buf()));
        }
    }

    let mut diagnostics = Vec::new();
    let mut units = Vec::new();
    for (rel, full) in paths {
        let bytes = std::fs::read(&full).map_err(|source| BuildError::Io {
            path: full.clone(),
            source,
        })?;
        match String::from_utf8(bytes) {
            Ok(text) => units.push(SourceUnit::new(rel, text)),
            Err(_) => diagnostics.push(Diagnostic::new(
                DiagnosticKind::SkippedFile,
                rel,
                None,
                "",
                "file is not valid UTF-8",
            )),
        }
    }
    let mut out = build_from_units(units).map_err(|e| match e {
        BuildError::NoParseableFiles { diagnostics: more } => {
            let mut all = diagnostics.clone();
            all.extend(more);
            BuildError::NoParseableFiles { diagnostics: all }
        }
        other => other,
    })?;
    diagnostics.append(&mut out.diagnostics);
    diagnostics.sort_by(|a, b| a.file_path.cmp(&b.file_path));
    out.diagnostics = diagnostics;
    Ok(out)
}

/// Builds the graph from in-memory source files.
pub fn build_from_units(mut units: Vec<SourceUnit>) -> Result<BuildOutput, BuildError> {
    units.sort_by(|a, b| a.file_path.cmp(&b.file_path));
    units.dedup_by(|a, b| a.file_path == b.file_path);

    let parsed: Vec<Result<ParsedEntities, Diagnostic>> = units
        .par_iter()
        .map(|unit| {
            parse_source_unit(unit).map_err(|e| {
                Diagnostic::new(
                    DiagnosticKind::SkippedFile,
                    &unit.file_path,
                    Some(e.line),
                    "",
                    e.to_string(),
                )
            })
        })
        .collect();

    let mut diagnostics = Vec::new();
    let mut files = Vec::new();
    for result in parsed {
        match result {
            Ok(p) => files.push(p),
            Err(d) => diagnostics.push(d),
        }
    }
    if files.is_empty() {
        return Err(BuildError::NoParseableFiles { diagnostics });
    }

    let mut graph = Rsg::new();
    let mut registered = Vec::with_capacity(files.len());
    let mut structural = Vec::new();
    for parsed in files {
        let file = add_file_nodes(&mut graph, parsed, &mut structural)?;
        registered.push(file);
    }
    for edge in structural {
        graph.add_edge(edge)?;
    }

    let mut table = SymbolTable::new(registered);
    let (imports, mut diags) = table.resolve_imports();
    diagnostics.append(&mut diags);
    for edge in imports {
        graph.add_edge(edge)?;
    }
    let (inherits, mut diags) = table.build_hierarchy(&graph);
    diagnostics.append(&mut diags);
    for edge in inherits {
        graph.add_edge(edge)?;
    }
    let (calls, mut diags) = table.build_call_graph(&graph);
    diagnostics.append(&mut diags);
    for edge in calls {
        graph.add_edge(edge)?;
    }

    let violations = graph.validate();
    if !violations.is_empty() {
        return Err(BuildError::Invalid(violations));
    }
    let meta = vec![
        MetaEntry::new("builder", "rsg-core python"),
        MetaEntry::new("files", graph.file_index().len().to_string()),
    ];
    Ok(BuildOutput {
        graph,
        diagnostics,
        meta,
    })
}

#[derive(Clone, Copy)]
enum Slot {
    Function(usize),
    Method(usize),
    Class(usize),
}

fn add_file_nodes(
    graph: &mut Rsg,
    parsed: ParsedEntities,
    structural: &mut Vec<RsgEdge>,
) -> Result<RegisteredFile, BuildError> {
    let module = module_path_for(&parsed.file_path);
    let script_name = parsed
        .file_path
        .rsplit('/')
        .next()
        .unwrap_or(&parsed.file_path)
        .trim_end_matches(".py")
        .to_string();
    let script_qn = if module.is_empty() {
        parsed.file_path.clone()
    } else {
        module.clone()
    };
    let script = graph.add_node(RsgNode::new(
        NodeKind::Script,
        script_name,
        script_qn,
        &parsed.file_path,
        Span::new(1, parsed.line_count.max(1)),
        &parsed.residue_script_text,
    ))?;

    let mut order: Vec<(Slot, &super::ParsedEntity)> = Vec::new();
    order.extend(parsed.functions.iter().enumerate().map(|(i, e)| (Slot::Function(i), e)));
    order.extend(parsed.methods.iter().enumerate().map(|(i, e)| (Slot::Method(i), e)));
    order.extend(parsed.classes.iter().enumerate().map(|(i, e)| (Slot::Class(i), e)));
    order.sort_by_key(|(_, e)| (e.span.start_line, e.scopes.len(), e.span.end_line));

    let placeholder = NodeId(usize::MAX);
    let mut functions = vec![placeholder; parsed.functions.len()];
    let mut methods = vec![placeholder; parsed.methods.len()];
    let mut classes = vec![placeholder; parsed.classes.len()];
    for (slot, entity) in order {
        let qualified = if module.is_empty() {
            entity.local_name.clone()
        } else {
            format!("{module}.{}", entity.local_name)
        };
        let mut node = RsgNode::new(
            entity.kind,
            &entity.name,
            qualified,
            &parsed.file_path,
            entity.span,
            &entity.source_text,
        );
        if entity.kind.is_callable() {
            node = node.with_signature(&entity.signature);
        }
        let id = graph.add_node(node)?;
        structural.push(RsgEdge::new(script, id, RelationKind::Encloses));
        match slot {
            Slot::Function(i) => functions[i] = id,
            Slot::Method(i) => methods[i] = id,
            Slot::Class(i) => classes[i] = id,
        }
    }
    for (entity, &id) in parsed.methods.iter().zip(&methods) {
        if let Some(owner) = entity.owner_class {
            structural.push(RsgEdge::new(classes[owner], id, RelationKind::Owns));
        }
    }
    Ok(RegisteredFile {
        parsed,
        script,
        functions,
        methods,
        classes,
    })
}
