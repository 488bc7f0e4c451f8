//! Python front end on top of the tree-sitter Python grammar.

use tree_sitter::{Node, Parser};

use super::{
    CallSite, CallTarget, ImportStmt, ImportedName, LanguageFrontend, ParseError, ParsedEntities,
    ParsedEntity, SourceUnit,
};
use crate::graph::{NodeKind, Span};

#[derive(Debug, Clone, Copy, Default)]
pub struct PythonFrontend;

impl LanguageFrontend for PythonFrontend {
    fn language(&self) -> &'static str {
        "python"
    }

    fn extensions(&self) -> &'static [&'static str] {
        &["py"]
    }

    fn parse(&self, unit: &SourceUnit) -> Result<ParsedEntities, ParseError> {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("bundled Python grammar matches the tree-sitter ABI");
        let tree = parser
            .parse(&unit.raw_text, None)
            .ok_or_else(|| ParseError {
                file_path: unit.file_path.clone(),
                line: 1,
                column: 1,
                message: "parser gave up".into(),
            })?;
        let root = tree.root_node();
        if root.has_error() {
            return Err(first_error(root, unit));
        }

        let mut extractor = Extractor {
            src: &unit.raw_text,
            lines: unit.raw_text.split('\n').collect(),
            out: ParsedEntities {
                file_path: unit.file_path.clone(),
                line_count: unit.line_count,
                ..ParsedEntities::default()
            },
            scopes: Vec::new(),
        };
        extractor.visit_block(root);
        extractor.finish_residue();
        Ok(extractor.out)
    }
}

fn first_error(root: Node, unit: &SourceUnit) -> ParseError {
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() || node.is_missing() {
            let pos = node.start_position();
            let message = if node.is_missing() {
                format!("missing `{}`", node.kind())
            } else {
                "unexpected input".to_string()
            };
            return ParseError {
                file_path: unit.file_path.clone(),
                line: pos.row + 1,
                column: pos.column + 1,
                message,
            };
        }
        if node.has_error() {
            let mut cursor = node.walk();
            let children: Vec<Node> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    ParseError {
        file_path: unit.file_path.clone(),
        line: 1,
        column: 1,
        message: "syntax error".into(),
    }
}

struct Scope {
    name: String,
    class_index: Option<usize>,
}

struct Extractor<'a> {
    src: &'a str,
    lines: Vec<&'a str>,
    out: ParsedEntities,
    scopes: Vec<Scope>,
}

const COMPOUND: &[&str] = &[
    "if_statement",
    "elif_clause",
    "else_clause",
    "for_statement",
    "while_statement",
    "try_statement",
    "except_clause",
    "except_group_clause",
    "finally_clause",
    "with_statement",
    "match_statement",
    "case_clause",
    "block",
];

impl<'a> Extractor<'a> {
    fn text(&self, node: Node) -> &'a str {
        &self.src[node.byte_range()]
    }

    fn span_of(&self, node: Node) -> Span {
        let start = node.start_position().row + 1;
        let end = node.end_position();
        let end_line = if end.column == 0 && end.row + 1 > start {
            end.row
        } else {
            end.row + 1
        };
        Span::new(start, end_line.max(start))
    }

    fn slice_lines(&self, span: Span) -> String {
        let last = span.end_line.min(self.lines.len());
        self.lines[span.start_line - 1..last].join("\n")
    }

    fn at_module_scope(&self) -> bool {
        self.scopes.is_empty()
    }

    fn visit_block(&mut self, node: Node) {
        let mut cursor = node.walk();
        let children: Vec<Node> = node.named_children(&mut cursor).collect();
        for child in children {
            match child.kind() {
                "function_definition" => self.function(child, child),
                "class_definition" => self.class(child, child),
                "decorated_definition" => {
                    if let Some(def) = child.child_by_field_name("definition") {
                        match def.kind() {
                            "function_definition" => self.function(def, child),
                            "class_definition" => self.class(def, child),
                            _ => {}
                        }
                    }
                }
                "import_statement" | "import_from_statement" if self.at_module_scope() => {
                    self.import(child)
                }
                "expression_statement" if self.at_module_scope() => self.assignment(child),
                kind if COMPOUND.contains(&kind) => self.visit_block(child),
                _ => {}
            }
        }
    }

    fn local_name(&self, name: &str) -> String {
        let mut parts: Vec<&str> = self.scopes.iter().map(|s| s.name.as_str()).collect();
        parts.push(name);
        parts.join(".")
    }

    fn scope_chain(&self) -> Vec<(String, bool)> {
        self.scopes
            .iter()
            .map(|s| (s.name.clone(), s.class_index.is_some()))
            .collect()
    }

    fn function(&mut self, def: Node, span_node: Node) {
        let Some(name_node) = def.child_by_field_name("name") else {
            return;
        };
        let name = self.text(name_node).to_string();
        let params = def
            .child_by_field_name("parameters")
            .map(|p| self.text(p).split_whitespace().collect::<Vec<_>>().join(" "))
            .unwrap_or_else(|| "()".into());
        let span = self.span_of(span_node);
        let owner_class = self.scopes.last().and_then(|s| s.class_index);
        let body = def.child_by_field_name("body");
        let mut calls = Vec::new();
        if let Some(body) = body {
            self.collect_calls(body, &mut calls);
        }
        let entity = ParsedEntity {
            kind: if owner_class.is_some() {
                NodeKind::Method
            } else {
                NodeKind::Function
            },
            local_name: self.local_name(&name),
            signature: format!("{name}{params}"),
            span,
            source_text: self.slice_lines(span),
            parent_classes: Vec::new(),
            owner_class,
            scopes: self.scope_chain(),
            calls,
            name: name.clone(),
        };
        if owner_class.is_some() {
            self.out.methods.push(entity);
        } else {
            self.out.functions.push(entity);
        }
        if let Some(body) = body {
            self.scopes.push(Scope {
                name,
                class_index: None,
            });
            self.visit_block(body);
            self.scopes.pop();
        }
    }

    fn class(&mut self, def: Node, span_node: Node) {
        let Some(name_node) = def.child_by_field_name("name") else {
            return;
        };
        let name = self.text(name_node).to_string();
        let mut parents = Vec::new();
        if let Some(args) = def.child_by_field_name("superclasses") {
            let mut cursor = args.walk();
            for arg in args.named_children(&mut cursor) {
                if let Some(parts) = self.dotted(arg) {
                    parents.push(parts.join("."));
                }
            }
        }
        let span = self.span_of(span_node);
        let index = self.out.classes.len();
        self.out.classes.push(ParsedEntity {
            kind: NodeKind::Class,
            name: name.clone(),
            local_name: self.local_name(&name),
            span,
            source_text: self.slice_lines(span),
            signature: String::new(),
            parent_classes: parents,
            owner_class: None,
            scopes: self.scope_chain(),
            calls: Vec::new(),
        });
        if let Some(body) = def.child_by_field_name("body") {
            self.scopes.push(Scope {
                name,
                class_index: Some(index),
            });
            self.visit_block(body);
            self.scopes.pop();
        }
    }

    /// `a.b.c` as identifier segments; `None` for anything else.
    fn dotted(&self, node: Node) -> Option<Vec<String>> {
        match node.kind() {
            "identifier" => Some(vec![self.text(node).to_string()]),
            "attribute" => {
                let mut parts = self.dotted(node.child_by_field_name("object")?)?;
                parts.push(self.text(node.child_by_field_name("attribute")?).to_string());
                Some(parts)
            }
            _ => None,
        }
    }

    fn collect_calls(&self, node: Node, out: &mut Vec<CallSite>) {
        let mut cursor = node.walk();
        let children: Vec<Node> = node.named_children(&mut cursor).collect();
        for child in children {
            match child.kind() {
                "function_definition" | "class_definition" | "decorated_definition" => continue,
                "call" => {
                    if let Some(func) = child.child_by_field_name("function") {
                        if let Some(target) = self.call_target(func) {
                            out.push(CallSite {
                                target,
                                line: child.start_position().row + 1,
                            });
                        }
                    }
                    self.collect_calls(child, out);
                }
                _ => self.collect_calls(child, out),
            }
        }
    }

    fn call_target(&self, func: Node) -> Option<CallTarget> {
        let mut parts = self.dotted(func)?;
        Some(match parts.len() {
            1 => CallTarget::Name(parts.pop()?),
            2 if parts[0] == "self" => CallTarget::SelfAttr(parts.pop()?),
            _ => CallTarget::Dotted(parts),
        })
    }

    fn import(&mut self, node: Node) {
        let line = node.start_position().row + 1;
        if node.kind() == "import_statement" {
            let mut cursor = node.walk();
            for name in node.children_by_field_name("name", &mut cursor) {
                let (module, alias) = match name.kind() {
                    "aliased_import" => (
                        name.child_by_field_name("name").map(|n| self.text(n)),
                        name.child_by_field_name("alias").map(|n| self.text(n).to_string()),
                    ),
                    _ => (Some(self.text(name)), None),
                };
                if let Some(module) = module {
                    self.out.imports.push(ImportStmt::Module {
                        module: normalize_dotted(module),
                        alias,
                        line,
                    });
                }
            }
            return;
        }

        let (level, module) = match node.child_by_field_name("module_name") {
            Some(m) if m.kind() == "relative_import" => {
                let text = self.text(m);
                let level = text.chars().take_while(|&c| c == '.').count();
                let rest = normalize_dotted(&text[level..]);
                (level, (!rest.is_empty()).then_some(rest))
            }
            Some(m) => (0, Some(normalize_dotted(self.text(m)))),
            None => (0, None),
        };

        let mut cursor = node.walk();
        let has_star = node
            .children(&mut cursor)
            .any(|c| c.kind() == "wildcard_import");
        if has_star {
            self.out.imports.push(ImportStmt::Star {
                level,
                module,
                line,
            });
            return;
        }
        let mut names = Vec::new();
        let mut cursor = node.walk();
        for name in node.children_by_field_name("name", &mut cursor) {
            match name.kind() {
                "aliased_import" => {
                    if let Some(n) = name.child_by_field_name("name") {
                        names.push(ImportedName {
                            name: normalize_dotted(self.text(n)),
                            alias: name
                                .child_by_field_name("alias")
                                .map(|a| self.text(a).to_string()),
                        });
                    }
                }
                _ => names.push(ImportedName {
                    name: normalize_dotted(self.text(name)),
                    alias: None,
                }),
            }
        }
        self.out.imports.push(ImportStmt::From {
            level,
            module,
            names,
            line,
        });
    }

    fn assignment(&mut self, stmt: Node) {
        let mut cursor = stmt.walk();
        let children: Vec<Node> = stmt.named_children(&mut cursor).collect();
        for child in children {
            if child.kind() != "assignment" {
                continue;
            }
            if let Some(left) = child.child_by_field_name("left") {
                let mut names = Vec::new();
                collect_identifiers(left, self.src, &mut names);
                for name in names {
                    if !self.out.module_variables.contains(&name) {
                        self.out.module_variables.push(name);
                    }
                }
            }
        }
    }

    fn finish_residue(&mut self) {
        let mut covered = vec![false; self.lines.len() + 1];
        for entity in self
            .out
            .functions
            .iter()
            .chain(&self.out.methods)
            .chain(&self.out.classes)
        {
            for line in entity.span.start_line..=entity.span.end_line {
                if let Some(flag) = covered.get_mut(line) {
                    *flag = true;
                }
            }
        }
        let residue: Vec<&str> = self
            .lines
            .iter()
            .enumerate()
            .map(|(i, line)| if covered[i + 1] { "" } else { *line })
            .collect();
        self.out.residue_script_text = residue.join("\n");
    }
}

fn collect_identifiers(node: Node, src: &str, out: &mut Vec<String>) {
    match node.kind() {
        "identifier" => out.push(src[node.byte_range()].to_string()),
        "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_identifiers(child, src, out);
            }
        }
        _ => {}
    }
}

fn normalize_dotted(text: &str) -> String {
    text.split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(".")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_source_unit;

    fn parse(text: &str) -> ParsedEntities {
        parse_source_unit(&SourceUnit::new("pkg/mod.py", text)).unwrap()
    }

    #[test]
    fn function_class_and_method() {
        let src = "import os\nfrom pkg.a import f as g\n\ndef f(x, y=1):\n    return g(x)\n\nclass C:\n    def m(self):\n        return self.n()\n\nVALUE = f(1)\n";
        let p = parse(src);
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].name, "f");
        assert_eq!(p.functions[0].signature, "f(x, y=1)");
        assert_eq!(p.functions[0].span, Span::new(4, 5));
        assert_eq!(p.functions[0].source_text, "def f(x, y=1):\n    return g(x)");
        assert_eq!(p.classes.len(), 1);
        assert!(p.classes[0].parent_classes.is_empty());
        assert_eq!(p.classes[0].span, Span::new(7, 9));
        assert_eq!(p.methods.len(), 1);
        assert_eq!(p.methods[0].owner_class, Some(0));
        assert_eq!(p.methods[0].local_name, "C.m");
        assert_eq!(
            p.methods[0].calls,
            vec![CallSite {
                target: CallTarget::SelfAttr("n".into()),
                line: 9
            }]
        );
        assert_eq!(
            p.residue_script_text,
            "import os\nfrom pkg.a import f as g\n\n\n\n\n\n\n\n\nVALUE = f(1)\n"
        );
        assert_eq!(p.module_variables, vec!["VALUE".to_string()]);
        assert_eq!(p.imports.len(), 2);
    }

    #[test]
    fn imports_only_file_keeps_everything_in_residue() {
        let src = "import os\nimport pkg.a as pa\nfrom . import b\n";
        let p = parse(src);
        assert!(p.functions.is_empty() && p.classes.is_empty() && p.methods.is_empty());
        assert_eq!(p.residue_script_text, src);
        assert_eq!(
            p.imports,
            vec![
                ImportStmt::Module {
                    module: "os".into(),
                    alias: None,
                    line: 1
                },
                ImportStmt::Module {
                    module: "pkg.a".into(),
                    alias: Some("pa".into()),
                    line: 2
                },
                ImportStmt::From {
                    level: 1,
                    module: None,
                    names: vec![ImportedName {
                        name: "b".into(),
                        alias: None
                    }],
                    line: 3
                },
            ]
        );
    }

    #[test]
    fn parent_classes_are_recorded() {
        let p = parse("class B(A, mod.Base, metaclass=Meta):\n    pass\n");
        assert_eq!(p.classes[0].parent_classes, vec!["A", "mod.Base"]);
    }

    #[test]
    fn decorated_and_async_are_plain_functions() {
        let p = parse("@cache\nasync def fetch(url):\n    await get(url)\n");
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].span, Span::new(1, 3));
        assert_eq!(p.functions[0].kind, NodeKind::Function);
        assert_eq!(p.functions[0].calls[0].target, CallTarget::Name("get".into()));
        assert_eq!(p.residue_script_text, "\n\n\n");
    }

    #[test]
    fn nested_definitions_carry_their_path() {
        let src = "class Outer:\n    class Inner:\n        def run(self):\n            def helper():\n                return 1\n            return helper()\n";
        let p = parse(src);
        let names: Vec<&str> = p.entities_in_order().iter().map(|e| e.local_name.as_str()).collect();
        assert_eq!(
            names,
            vec!["Outer", "Outer.Inner", "Outer.Inner.run", "Outer.Inner.run.helper"]
        );
        let run = &p.methods[0];
        assert_eq!(run.owner_class, Some(1));
        // the nested def's body is not attributed to `run`, but the call is
        assert_eq!(run.calls, vec![CallSite { target: CallTarget::Name("helper".into()), line: 6 }]);
        assert_eq!(p.functions[0].kind, NodeKind::Function);
    }

    #[test]
    fn conditional_definitions_are_module_level() {
        let src = "try:\n    import json\nexcept ImportError:\n    json = None\nif json:\n    def load():\n        pass\nelse:\n    def load():\n        pass\n";
        let p = parse(src);
        assert_eq!(p.functions.len(), 2);
        assert!(p.functions.iter().all(|f| f.local_name == "load"));
        assert_eq!(p.imports.len(), 1);
        assert_eq!(p.module_variables, vec!["json".to_string()]);
    }

    #[test]
    fn star_and_relative_imports() {
        let p = parse("from ..core import *\nfrom .util import (a, b as c)\n");
        assert_eq!(
            p.imports[0],
            ImportStmt::Star {
                level: 2,
                module: Some("core".into()),
                line: 1
            }
        );
        match &p.imports[1] {
            ImportStmt::From { level, module, names, .. } => {
                assert_eq!(*level, 1);
                assert_eq!(module.as_deref(), Some("util"));
                assert_eq!(names[1].bound_name(), "c");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dotted_call_targets() {
        let p = parse("def f():\n    pkg.mod.g(1)\n    x.y().z()\n    h()(2)\n");
        let targets: Vec<String> = p.functions[0].calls.iter().map(|c| c.target.to_string()).collect();
        assert_eq!(targets, vec!["pkg.mod.g", "x.y", "h"]);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_source_unit(&SourceUnit::new("bad.py", "def f(:\n    pass\n")).unwrap_err();
        assert_eq!(err.file_path, "bad.py");
        assert_eq!(err.line, 1);
    }
}
