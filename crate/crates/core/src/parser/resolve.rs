//! Name resolution over parsed entities: imports, calls and base classes.
//!
//! Resolution is name-based and conservative. A name resolves through:
//!
//! 1. lexical scopes of the referencing entity (its own nested definitions,
//!    enclosing function bodies, then module top level),
//! 2. names bound by the file's module-level imports,
//! 3. for `self.m()` inside a method, the owning class followed by its
//!    resolved base classes in declaration order (depth first).
//!
//! Dotted references (`mod.f`, `pkg.mod.Class.m`) start from step 1 or 2
//! for the first segment and then walk submodules and class members.
//! Anything ambiguous or outside the repository becomes a diagnostic.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{CallTarget, Diagnostic, DiagnosticKind, ImportStmt, ParsedEntities, ParsedEntity};
use crate::graph::{NodeId, NodeKind, RelationKind, Rsg, RsgEdge};

/// Dotted module path of a repo-relative Python file.
///
/// `pkg/a.py` is `pkg.a`; `pkg/__init__.py` is `pkg`.
pub fn module_path_for(file_path: &str) -> String {
    let trimmed = file_path.strip_suffix(".py").unwrap_or(file_path);
    let trimmed = trimmed
        .strip_suffix("/__init__")
        .or_else(|| (trimmed == "__init__").then_some(""))
        .unwrap_or(trimmed);
    trimmed.replace('/', ".")
}

/// Package used as the base of relative imports inside `file_path`.
fn package_for(file_path: &str) -> String {
    let module = module_path_for(file_path);
    if file_path.ends_with("__init__.py") {
        module
    } else {
        match module.rfind('.') {
            Some(i) => module[..i].to_string(),
            None => String::new(),
        }
    }
}

/// A parsed file together with the node ids assigned to its entities.
#[derive(Debug, Clone)]
pub struct RegisteredFile {
    pub parsed: ParsedEntities,
    pub script: NodeId,
    pub functions: Vec<NodeId>,
    pub methods: Vec<NodeId>,
    pub classes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Binding {
    Entity(NodeId),
    Module(String),
    Variable,
    External,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Member {
    Entities(Vec<NodeId>),
    Module(String, Option<NodeId>),
    Variable(NodeId),
    External,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lookup {
    Found(NodeId),
    Ambiguous(usize),
    External,
    Unresolved(&'static str),
}

struct FileInfo {
    file_path: String,
    package: String,
    script: NodeId,
    /// local name (`f`, `C`, `C.m`, `f.inner`) to ids
    nested: BTreeMap<String, Vec<NodeId>>,
    variables: BTreeSet<String>,
    imports: Vec<ImportStmt>,
    bindings: BTreeMap<String, Binding>,
}

struct EntityInfo {
    file: usize,
    local_name: String,
    scopes: Vec<(String, bool)>,
    owner: Option<NodeId>,
}

/// Repository-wide symbol table used by the three resolution passes.
pub struct SymbolTable {
    files: Vec<FileInfo>,
    modules: BTreeMap<String, usize>,
    packages: BTreeSet<String>,
    roots: BTreeSet<String>,
    entities: HashMap<NodeId, EntityInfo>,
    kinds: HashMap<NodeId, NodeKind>,
    /// class to `name -> methods`
    methods: HashMap<NodeId, BTreeMap<String, Vec<NodeId>>>,
    /// class to resolved bases, declaration order
    bases: HashMap<NodeId, Vec<NodeId>>,
    calls: Vec<(NodeId, Vec<super::CallSite>)>,
    parents: Vec<(NodeId, Vec<String>)>,
}

const MAX_REEXPORT_DEPTH: usize = 8;

impl SymbolTable {
    pub fn new(files: Vec<RegisteredFile>) -> Self {
        let mut table = SymbolTable {
            files: Vec::with_capacity(files.len()),
            modules: BTreeMap::new(),
            packages: BTreeSet::new(),
            roots: BTreeSet::new(),
            entities: HashMap::new(),
            kinds: HashMap::new(),
            methods: HashMap::new(),
            bases: HashMap::new(),
            calls: Vec::new(),
            parents: Vec::new(),
        };
        for (index, file) in files.into_iter().enumerate() {
            let module = module_path_for(&file.parsed.file_path);
            let parts: Vec<&str> = module.split('.').filter(|p| !p.is_empty()).collect();
            if let Some(root) = parts.first() {
                table.roots.insert(root.to_string());
            }
            for i in 1..parts.len() {
                table.packages.insert(parts[..i].join("."));
            }
            table.modules.insert(module, index);

            let mut info = FileInfo {
                file_path: file.parsed.file_path.clone(),
                package: package_for(&file.parsed.file_path),
                script: file.script,
                nested: BTreeMap::new(),
                variables: file.parsed.module_variables.iter().cloned().collect(),
                imports: file.parsed.imports.clone(),
                bindings: BTreeMap::new(),
            };
            let mut register = |entity: &ParsedEntity, id: NodeId, owner: Option<NodeId>| {
                info.nested
                    .entry(entity.local_name.clone())
                    .or_default()
                    .push(id);
                table.kinds.insert(id, entity.kind);
                table.entities.insert(
                    id,
                    EntityInfo {
                        file: index,
                        local_name: entity.local_name.clone(),
                        scopes: entity.scopes.clone(),
                        owner,
                    },
                );
            };
            for (entity, &id) in file.parsed.functions.iter().zip(&file.functions) {
                register(entity, id, None);
                table.calls.push((id, entity.calls.clone()));
            }
            for (entity, &id) in file.parsed.classes.iter().zip(&file.classes) {
                register(entity, id, None);
                table.parents.push((id, entity.parent_classes.clone()));
            }
            for (entity, &id) in file.parsed.methods.iter().zip(&file.methods) {
                let owner = entity.owner_class.map(|i| file.classes[i]);
                register(entity, id, owner);
                if let Some(owner) = owner {
                    table
                        .methods
                        .entry(owner)
                        .or_default()
                        .entry(entity.name.clone())
                        .or_default()
                        .push(id);
                }
                table.calls.push((id, entity.calls.clone()));
            }
            table.kinds.insert(file.script, NodeKind::Script);
            table.files.push(info);
        }
        table.calls.sort_by_key(|(id, _)| *id);
        table.parents.sort_by_key(|(id, _)| *id);
        table
    }

    fn is_module_like(&self, path: &str) -> bool {
        self.modules.contains_key(path) || self.packages.contains(path)
    }

    fn is_external_root(&self, module: &str) -> bool {
        let root = module.split('.').next().unwrap_or("");
        !self.roots.contains(root)
    }

    fn absolute_module(&self, file: usize, level: usize, module: Option<&str>) -> Option<String> {
        if level == 0 {
            return module.map(str::to_string);
        }
        let mut base: Vec<&str> = self.files[file]
            .package
            .split('.')
            .filter(|p| !p.is_empty())
            .collect();
        for _ in 1..level {
            base.pop()?;
        }
        if let Some(m) = module {
            base.extend(m.split('.'));
        }
        Some(base.join("."))
    }

    /// What `name` refers to inside `module`.
    fn member(&self, module: &str, name: &str, depth: usize) -> Member {
        let sub = if module.is_empty() {
            name.to_string()
        } else {
            format!("{module}.{name}")
        };
        if let Some(&file) = self.modules.get(module) {
            let info = &self.files[file];
            if let Some(ids) = info.nested.get(name) {
                return Member::Entities(ids.clone());
            }
            if let Some(&sub_file) = self.modules.get(&sub) {
                return Member::Module(sub, Some(self.files[sub_file].script));
            }
            if self.packages.contains(&sub) {
                return Member::Module(sub, None);
            }
            if info.variables.contains(name) {
                return Member::Variable(info.script);
            }
            if depth < MAX_REEXPORT_DEPTH {
                if let Some(found) = self.reexport(file, name, depth + 1) {
                    return found;
                }
            }
            return Member::NotFound;
        }
        if let Some(&sub_file) = self.modules.get(&sub) {
            return Member::Module(sub, Some(self.files[sub_file].script));
        }
        if self.packages.contains(&sub) {
            return Member::Module(sub, None);
        }
        Member::NotFound
    }

    /// Follows a name that `file` itself imports from elsewhere.
    fn reexport(&self, file: usize, name: &str, depth: usize) -> Option<Member> {
        let mut found = None;
        for stmt in &self.files[file].imports {
            match stmt {
                ImportStmt::From {
                    level,
                    module,
                    names,
                    ..
                } => {
                    for imported in names {
                        if imported.bound_name() != name {
                            continue;
                        }
                        let Some(abs) = self.absolute_module(file, *level, module.as_deref())
                        else {
                            continue;
                        };
                        found = Some(if *level == 0 && self.is_external_root(&abs) {
                            Member::External
                        } else {
                            self.member(&abs, &imported.name, depth)
                        });
                    }
                }
                ImportStmt::Module { module, alias, .. } => {
                    if alias.as_deref() == Some(name) {
                        found = Some(match self.modules.get(module) {
                            Some(&f) => Member::Module(module.clone(), Some(self.files[f].script)),
                            None if self.is_external_root(module) => Member::External,
                            None => Member::Module(module.clone(), None),
                        });
                    }
                }
                ImportStmt::Star { .. } => {}
            }
        }
        found
    }

    /// Resolves the module-level imports of every file, recording name
    /// bindings for the later passes.
    pub fn resolve_imports(&mut self) -> (Vec<RsgEdge>, Vec<Diagnostic>) {
        let mut edges = Vec::new();
        let mut diags = Vec::new();
        for file in 0..self.files.len() {
            let (file_edges, file_diags, bindings) = self.resolve_file_imports(file);
            edges.extend(file_edges);
            diags.extend(file_diags);
            self.files[file].bindings = bindings;
        }
        (edges, diags)
    }

    fn resolve_file_imports(
        &self,
        file: usize,
    ) -> (Vec<RsgEdge>, Vec<Diagnostic>, BTreeMap<String, Binding>) {
        let info = &self.files[file];
        let script = info.script;
        let mut edges = Vec::new();
        let mut diags = Vec::new();
        let mut bindings = BTreeMap::new();
        let diag = |kind, line: usize, name: &str, message: String| {
            Diagnostic::new(kind, &info.file_path, Some(line), name, message)
        };
        let edge_to = |dst: NodeId, edges: &mut Vec<RsgEdge>| {
            if dst != script {
                edges.push(RsgEdge::new(script, dst, RelationKind::Imports));
            }
        };

        for stmt in &info.imports {
            match stmt {
                ImportStmt::Module {
                    module,
                    alias,
                    line,
                } => {
                    let root = module.split('.').next().unwrap_or("").to_string();
                    let bound = alias.clone().unwrap_or_else(|| root.clone());
                    if self.is_external_root(module) {
                        diags.push(diag(
                            DiagnosticKind::ExternalImport,
                            *line,
                            module,
                            format!("`{module}` is outside the repository"),
                        ));
                        bindings.insert(bound, Binding::External);
                        continue;
                    }
                    match self.modules.get(module) {
                        Some(&f) => edge_to(self.files[f].script, &mut edges),
                        None => diags.push(diag(
                            DiagnosticKind::UnresolvedImport,
                            *line,
                            module,
                            format!("no source file for module `{module}`"),
                        )),
                    }
                    let target = if alias.is_some() { module.clone() } else { root };
                    bindings.insert(bound, Binding::Module(target));
                }
                ImportStmt::From {
                    level,
                    module,
                    names,
                    line,
                } => {
                    let display = format!("{}{}", ".".repeat(*level), module.as_deref().unwrap_or(""));
                    let Some(abs) = self.absolute_module(file, *level, module.as_deref()) else {
                        diags.push(diag(
                            DiagnosticKind::UnresolvedImport,
                            *line,
                            &display,
                            "relative import climbs above the repository root".into(),
                        ));
                        for n in names {
                            bindings.insert(n.bound_name().to_string(), Binding::Unresolved);
                        }
                        continue;
                    };
                    if *level == 0 && self.is_external_root(&abs) {
                        diags.push(diag(
                            DiagnosticKind::ExternalImport,
                            *line,
                            &abs,
                            format!("`{abs}` is outside the repository"),
                        ));
                        for n in names {
                            bindings.insert(n.bound_name().to_string(), Binding::External);
                        }
                        continue;
                    }
                    for imported in names {
                        let bound = imported.bound_name().to_string();
                        let qualified = format!("{abs}.{}", imported.name);
                        let binding = match self.member(&abs, &imported.name, 0) {
                            Member::Entities(ids) if ids.len() == 1 => {
                                edge_to(ids[0], &mut edges);
                                Binding::Entity(ids[0])
                            }
                            Member::Entities(ids) => {
                                diags.push(diag(
                                    DiagnosticKind::AmbiguousImport,
                                    *line,
                                    &qualified,
                                    format!("`{qualified}` has {} definitions", ids.len()),
                                ));
                                Binding::Unresolved
                            }
                            Member::Module(path, Some(s)) => {
                                edge_to(s, &mut edges);
                                Binding::Module(path)
                            }
                            Member::Module(path, None) => {
                                diags.push(diag(
                                    DiagnosticKind::UnresolvedImport,
                                    *line,
                                    &qualified,
                                    format!("package `{path}` has no source file"),
                                ));
                                Binding::Module(path)
                            }
                            Member::Variable(s) => {
                                edge_to(s, &mut edges);
                                Binding::Variable
                            }
                            Member::External => {
                                diags.push(diag(
                                    DiagnosticKind::ExternalImport,
                                    *line,
                                    &qualified,
                                    format!("`{qualified}` is re-exported from outside the repository"),
                                ));
                                Binding::External
                            }
                            Member::NotFound => {
                                diags.push(diag(
                                    DiagnosticKind::UnresolvedImport,
                                    *line,
                                    &qualified,
                                    format!("`{}` not found in `{abs}`", imported.name),
                                ));
                                Binding::Unresolved
                            }
                        };
                        bindings.insert(bound, binding);
                    }
                }
                ImportStmt::Star {
                    level,
                    module,
                    line,
                } => {
                    let abs = self.absolute_module(file, *level, module.as_deref());
                    match abs {
                        Some(abs) if *level == 0 && self.is_external_root(&abs) => {
                            diags.push(diag(
                                DiagnosticKind::ExternalImport,
                                *line,
                                &abs,
                                format!("`{abs}` is outside the repository"),
                            ));
                        }
                        Some(abs) if self.modules.contains_key(&abs) => {
                            edge_to(self.files[self.modules[&abs]].script, &mut edges);
                        }
                        other => diags.push(diag(
                            DiagnosticKind::UnresolvedImport,
                            *line,
                            other.as_deref().unwrap_or("?"),
                            "star import target has no source file".into(),
                        )),
                    }
                }
            }
        }
        (edges, diags, bindings)
    }

    /// Lexically visible definitions named `name` from inside `entity`.
    ///
    /// `for_bases` switches to the scope rules of a class statement's base
    /// list: the class's own body is not visible but an immediately
    /// enclosing class body is.
    fn lexical(&self, entity: NodeId, name: &str, for_bases: bool) -> Option<Vec<NodeId>> {
        let info = &self.entities[&entity];
        let nested = &self.files[info.file].nested;
        let mut prefixes: Vec<String> = Vec::new();
        if !for_bases {
            prefixes.push(info.local_name.clone());
        }
        for i in (0..info.scopes.len()).rev() {
            let is_class = info.scopes[i].1;
            let innermost = i + 1 == info.scopes.len();
            if !is_class || (for_bases && innermost) {
                prefixes.push(
                    info.scopes[..=i]
                        .iter()
                        .map(|(n, _)| n.as_str())
                        .collect::<Vec<_>>()
                        .join("."),
                );
            }
        }
        prefixes.push(String::new());
        for prefix in prefixes {
            let key = if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            };
            if let Some(ids) = nested.get(&key) {
                let visible: Vec<NodeId> = ids
                    .iter()
                    .copied()
                    .filter(|id| self.kinds[id] != NodeKind::Method)
                    .collect();
                if !visible.is_empty() {
                    return Some(visible);
                }
            }
        }
        None
    }

    /// `name` on `class` or its bases, depth-first in declaration order.
    fn find_method(&self, class: NodeId, name: &str) -> Lookup {
        let mut stack = vec![class];
        let mut seen = HashSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            if let Some(ids) = self.methods.get(&c).and_then(|m| m.get(name)) {
                return match ids.len() {
                    1 => Lookup::Found(ids[0]),
                    n => Lookup::Ambiguous(n),
                };
            }
            if let Some(bases) = self.bases.get(&c) {
                stack.extend(bases.iter().rev());
            }
        }
        Lookup::Unresolved("no such method on the class or its bases")
    }

    fn single(ids: &[NodeId]) -> Lookup {
        match ids.len() {
            1 => Lookup::Found(ids[0]),
            n => Lookup::Ambiguous(n),
        }
    }

    /// Resolves the segments after a module binding.
    fn in_module(&self, module: &str, rest: &[String]) -> Lookup {
        let mut module = module.to_string();
        let mut i = 0;
        while i + 1 < rest.len() {
            let next = format!("{module}.{}", rest[i]);
            if !self.is_module_like(&next) {
                break;
            }
            module = next;
            i += 1;
        }
        let rest = &rest[i..];
        let head = match self.member(&module, &rest[0], 0) {
            Member::Entities(ids) => Self::single(&ids),
            Member::External => Lookup::External,
            Member::Module(..) | Member::Variable(_) => {
                return Lookup::Unresolved("dotted reference ends at a module or variable")
            }
            Member::NotFound => return Lookup::Unresolved("name not found in module"),
        };
        match (head, rest.len()) {
            (found, 1) => found,
            (Lookup::Found(id), 2) => self.attribute(id, &rest[1]),
            (Lookup::Found(_), _) => Lookup::Unresolved("reference is too deep"),
            (other, _) => other,
        }
    }

    /// `owner.name` where `owner` is a class: its method (through bases) or
    /// a nested class.
    fn attribute(&self, owner: NodeId, name: &str) -> Lookup {
        if self.kinds[&owner] != NodeKind::Class {
            return Lookup::Unresolved("attribute access on a non-class entity");
        }
        let info = &self.entities[&owner];
        let key = format!("{}.{name}", info.local_name);
        if let Some(ids) = self.files[info.file].nested.get(&key) {
            let classes: Vec<NodeId> = ids
                .iter()
                .copied()
                .filter(|id| self.kinds[id] == NodeKind::Class)
                .collect();
            if !classes.is_empty() {
                return Self::single(&classes);
            }
        }
        self.find_method(owner, name)
    }

    /// Resolution of a possibly dotted name used inside `entity`.
    fn resolve_reference(&self, entity: NodeId, parts: &[String], for_bases: bool) -> Lookup {
        let (first, rest) = parts.split_first().expect("non-empty reference");
        if let Some(ids) = self.lexical(entity, first, for_bases) {
            return match (Self::single(&ids), rest.len()) {
                (found, 0) => found,
                (Lookup::Found(id), 1) => self.attribute(id, &rest[0]),
                (Lookup::Found(_), _) => Lookup::Unresolved("reference is too deep"),
                (other, _) => other,
            };
        }
        let file = self.entities[&entity].file;
        match self.files[file].bindings.get(first) {
            Some(Binding::Entity(id)) => match rest.len() {
                0 => Lookup::Found(*id),
                1 => self.attribute(*id, &rest[0]),
                _ => Lookup::Unresolved("reference is too deep"),
            },
            Some(Binding::Module(path)) if !rest.is_empty() => self.in_module(path, rest),
            Some(Binding::Module(_)) => Lookup::Unresolved("a module is not callable"),
            Some(Binding::External) => Lookup::External,
            Some(Binding::Variable) => Lookup::Unresolved("bound to a module variable"),
            Some(Binding::Unresolved) => Lookup::Unresolved("bound by an unresolved import"),
            None if rest.is_empty() => Lookup::External,
            None => Lookup::Unresolved("dynamic receiver"),
        }
    }

    /// Inherits edges for every class whose declared bases resolve to
    /// in-repository classes. Edges that would close a cycle are dropped.
    pub fn build_hierarchy(&mut self, graph: &Rsg) -> (Vec<RsgEdge>, Vec<Diagnostic>) {
        let mut edges = Vec::new();
        let mut diags = Vec::new();
        let mut adjacency: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for edge in graph.edges() {
            if edge.relation == RelationKind::Inherits {
                adjacency.entry(edge.src).or_default().push(edge.dst);
            }
        }
        let mut bases: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for (class, parents) in &self.parents {
            let info = &self.entities[class];
            let file_path = self.files[info.file].file_path.clone();
            let line = graph.node(*class).map(|n| n.span.start_line).ok();
            for parent in parents {
                let parts: Vec<String> = parent.split('.').map(str::to_string).collect();
                let diag = |kind, message: String| {
                    Diagnostic::new(kind, &file_path, line, parent, message)
                };
                let target = match self.resolve_reference(*class, &parts, true) {
                    Lookup::Found(id) if self.kinds[&id] == NodeKind::Class => id,
                    Lookup::Found(_) => {
                        diags.push(diag(
                            DiagnosticKind::UnresolvedParent,
                            format!("base `{parent}` does not name a class"),
                        ));
                        continue;
                    }
                    Lookup::Ambiguous(n) => {
                        diags.push(diag(
                            DiagnosticKind::AmbiguousParent,
                            format!("base `{parent}` has {n} candidate definitions"),
                        ));
                        continue;
                    }
                    Lookup::External => {
                        diags.push(diag(
                            DiagnosticKind::ExternalParent,
                            format!("base `{parent}` is not defined in the repository"),
                        ));
                        continue;
                    }
                    Lookup::Unresolved(why) => {
                        diags.push(diag(
                            DiagnosticKind::UnresolvedParent,
                            format!("base `{parent}`: {why}"),
                        ));
                        continue;
                    }
                };
                if reaches(&adjacency, target, *class) {
                    diags.push(diag(
                        DiagnosticKind::InheritanceCycle,
                        format!("Inherits edge to `{parent}` would close a cycle; dropped"),
                    ));
                    continue;
                }
                adjacency.entry(*class).or_default().push(target);
                bases.entry(*class).or_default().push(target);
                edges.push(RsgEdge::new(*class, target, RelationKind::Inherits));
            }
        }
        self.bases = bases;
        (edges, diags)
    }

    /// Invokes edges for every call site whose callee resolves uniquely to
    /// a function or method. Calling a class resolves to its `__init__`.
    pub fn build_call_graph(&self, graph: &Rsg) -> (Vec<RsgEdge>, Vec<Diagnostic>) {
        let mut edges = Vec::new();
        let mut diags = Vec::new();
        for (caller, sites) in &self.calls {
            let info = &self.entities[caller];
            let file_path = &self.files[info.file].file_path;
            for site in sites {
                let lookup = match &site.target {
                    CallTarget::Name(name) => {
                        self.resolve_reference(*caller, std::slice::from_ref(name), false)
                    }
                    CallTarget::Dotted(parts) => self.resolve_reference(*caller, parts, false),
                    CallTarget::SelfAttr(name) => match (self.kinds[caller], info.owner) {
                        (NodeKind::Method, Some(owner)) => self.find_method(owner, name),
                        _ => Lookup::Unresolved("`self` outside a method"),
                    },
                };
                let lookup = match lookup {
                    Lookup::Found(id) if self.kinds[&id] == NodeKind::Class => {
                        match self.methods.get(&id).and_then(|m| m.get("__init__")) {
                            Some(ids) => Self::single(ids),
                            None => Lookup::Unresolved("class without __init__"),
                        }
                    }
                    other => other,
                };
                let name = site.target.to_string();
                let diag = |kind, message: String| {
                    Diagnostic::new(kind, file_path, Some(site.line), &name, message)
                };
                match lookup {
                    Lookup::Found(id) if self.kinds[&id].is_callable() => {
                        edges.push(RsgEdge::new(*caller, id, RelationKind::Invokes));
                    }
                    Lookup::Found(_) => diags.push(diag(
                        DiagnosticKind::UnresolvedCall,
                        format!("`{name}` is not callable code"),
                    )),
                    Lookup::Ambiguous(n) => diags.push(diag(
                        DiagnosticKind::AmbiguousCall,
                        format!("`{name}` has {n} candidate definitions"),
                    )),
                    Lookup::External => diags.push(diag(
                        DiagnosticKind::ExternalCall,
                        format!("`{name}` is not defined in the repository"),
                    )),
                    Lookup::Unresolved(why) => diags.push(diag(
                        DiagnosticKind::UnresolvedCall,
                        format!("`{name}`: {why}"),
                    )),
                }
            }
        }
        let _ = graph;
        (edges, diags)
    }
}

fn reaches(adjacency: &HashMap<NodeId, Vec<NodeId>>, from: NodeId, to: NodeId) -> bool {
    let mut stack = vec![from];
    let mut seen = HashSet::new();
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            if let Some(next) = adjacency.get(&n) {
                stack.extend(next.iter().copied());
            }
        }
    }
    false
}
