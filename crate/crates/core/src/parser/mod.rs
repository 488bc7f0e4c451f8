//! Corpus parsing: source files to entities, then entities to an [`Rsg`].
//!
//! [`Rsg`]: crate::graph::Rsg

mod build;
mod python;
mod resolve;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeKind, Span};

pub use build::{build_rsg, build_from_units, BuildError, BuildOptions, BuildOutput};
pub use python::PythonFrontend;
pub use resolve::{module_path_for, SymbolTable};

/// One source file, repo-relative with forward slashes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub file_path: String,
    pub raw_text: String,
    pub line_count: usize,
}

impl SourceUnit {
    /// Normalizes line endings to `\n` and path separators to `/`.
    pub fn new(file_path: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let file_path = file_path.into().replace('\\', "/");
        let raw_text = raw_text.into().replace("\r\n", "\n");
        let line_count = raw_text.lines().count();
        SourceUnit {
            file_path,
            raw_text,
            line_count,
        }
    }
}

/// Syntactic shape of a call expression's callee.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CallTarget {
    /// `f(...)`
    Name(String),
    /// `self.m(...)`
    SelfAttr(String),
    /// `a.b.f(...)` where every segment is a plain identifier.
    Dotted(Vec<String>),
}

impl fmt::Display for CallTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallTarget::Name(n) => f.write_str(n),
            CallTarget::SelfAttr(n) => write!(f, "self.{n}"),
            CallTarget::Dotted(parts) => f.write_str(&parts.join(".")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub target: CallTarget,
    pub line: usize,
}

/// `(name, alias)` pair inside an import statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportedName {
    pub name: String,
    pub alias: Option<String>,
}

impl ImportedName {
    pub fn bound_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImportStmt {
    /// `import a.b.c [as x]`
    Module {
        module: String,
        alias: Option<String>,
        line: usize,
    },
    /// `from [.]*m import n [as x], ...`
    From {
        level: usize,
        module: Option<String>,
        names: Vec<ImportedName>,
        line: usize,
    },
    /// `from [.]*m import *`
    Star {
        level: usize,
        module: Option<String>,
        line: usize,
    },
}

impl ImportStmt {
    pub fn line(&self) -> usize {
        match self {
            ImportStmt::Module { line, .. }
            | ImportStmt::From { line, .. }
            | ImportStmt::Star { line, .. } => *line,
        }
    }
}

/// A function, method or class extracted from one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedEntity {
    pub kind: NodeKind,
    pub name: String,
    /// Dotted path inside the module, e.g. `Outer.method.inner`.
    pub local_name: String,
    pub span: Span,
    pub source_text: String,
    pub signature: String,
    /// Declared base classes as written (`A`, `mod.Base`). Classes only.
    pub parent_classes: Vec<String>,
    /// Index into [`ParsedEntities::classes`] of the owning class. Methods only.
    pub owner_class: Option<usize>,
    /// Local names of the enclosing definitions, outermost first, each with
    /// whether it is a class scope.
    pub scopes: Vec<(String, bool)>,
    pub calls: Vec<CallSite>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedEntities {
    pub file_path: String,
    pub functions: Vec<ParsedEntity>,
    pub methods: Vec<ParsedEntity>,
    pub classes: Vec<ParsedEntity>,
    /// File text with entity lines blanked; surviving lines keep their
    /// original line numbers.
    pub residue_script_text: String,
    /// Module-scope import statements (including those nested in
    /// module-level `if`/`try` blocks).
    pub imports: Vec<ImportStmt>,
    /// Names assigned at module scope.
    pub module_variables: Vec<String>,
    pub line_count: usize,
}

impl ParsedEntities {
    /// All entities ordered by start line, then nesting depth.
    pub fn entities_in_order(&self) -> Vec<&ParsedEntity> {
        let mut all: Vec<&ParsedEntity> = self
            .functions
            .iter()
            .chain(&self.methods)
            .chain(&self.classes)
            .collect();
        all.sort_by_key(|e| (e.span.start_line, e.scopes.len(), e.span.end_line));
        all
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{file_path}:{line}:{column}: syntax error: {message}")]
pub struct ParseError {
    pub file_path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A grammar-backed front end for one source language.
pub trait LanguageFrontend: Send + Sync {
    fn language(&self) -> &'static str;

    /// File extensions (without dot) handled by this front end.
    fn extensions(&self) -> &'static [&'static str];

    fn parse(&self, unit: &SourceUnit) -> Result<ParsedEntities, ParseError>;
}

/// Parses one file with the Python front end.
pub fn parse_source_unit(unit: &SourceUnit) -> Result<ParsedEntities, ParseError> {
    PythonFrontend.parse(unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    SkippedFile,
    ExternalImport,
    UnresolvedImport,
    AmbiguousImport,
    ExternalCall,
    UnresolvedCall,
    AmbiguousCall,
    ExternalParent,
    UnresolvedParent,
    AmbiguousParent,
    InheritanceCycle,
}

/// One record of the build diagnostics sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub file_path: String,
    pub line: Option<usize>,
    pub name: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(
        kind: DiagnosticKind,
        file_path: impl Into<String>,
        line: Option<usize>,
        name: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Diagnostic {
            kind,
            file_path: file_path.into(),
            line,
            name: name.into(),
            message: message.into(),
        }
    }
}
