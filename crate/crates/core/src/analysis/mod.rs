//! Structural analysis of Python sources: units, imports, comment density
//! and a deterministic outline.

mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::count_lines;
use lexer::{tokenize, TokKind};
use parser::{parse_tokens, DefKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Module,
    Class,
    Function,
    Method,
}

impl UnitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Module => "module",
            UnitKind::Class => "class",
            UnitKind::Function => "function",
            UnitKind::Method => "method",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    pub kind: UnitKind,
    pub name: String,
    pub qualified_name: String,
    pub signature: String,
    pub param_count: usize,
    pub docstring: Option<String>,
    /// Inclusive, 1-based.
    pub line_span: (usize, usize),
    pub nesting_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Clean,
    Recovered,
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSummary {
    pub file: String,
    pub units: Vec<CodeUnit>,
    pub imports: Vec<String>,
    pub loc: usize,
    pub comment_lines: usize,
    pub docstring_lines: usize,
    pub comment_density: f64,
    pub parse_status: ParseStatus,
}

impl CodeSummary {
    pub fn digest(&self) -> String {
        crate::digest::json_digest(self)
    }

    /// Units other than the module itself.
    pub fn definitions(&self) -> impl Iterator<Item = &CodeUnit> {
        self.units.iter().filter(|u| u.kind != UnitKind::Module)
    }
}

/// Dotted module name for a repository-relative path.
pub fn module_name(path: &str) -> String {
    let trimmed = path
        .rsplit_once('.')
        .filter(|(_, ext)| !ext.contains('/'))
        .map_or(path, |(stem, _)| stem);
    let trimmed = trimmed.strip_suffix("/__init__").unwrap_or(trimmed);
    let name = trimmed.replace('/', ".");
    if name.is_empty() {
        "<module>".to_string()
    } else {
        name
    }
}

pub fn parse_source(text: &str, path: &str) -> CodeSummary {
    let tokens = tokenize(text);
    let out = parse_tokens(text, &tokens);
    let loc = count_lines(text.as_bytes());

    let doc_lines: BTreeSet<usize> = out
        .docstrings
        .iter()
        .flat_map(|d| d.line..=d.end_line)
        .filter(|&l| l <= loc)
        .collect();
    let comment_lines = tokens
        .iter()
        .filter(|t| t.kind == TokKind::Comment)
        .map(|t| t.line)
        .filter(|l| !doc_lines.contains(l))
        .collect::<BTreeSet<_>>()
        .len();
    let docstring_lines = doc_lines.len();
    let comment_density = if loc == 0 {
        0.0
    } else {
        ((comment_lines + docstring_lines) as f64 / loc as f64).min(1.0)
    };

    let status = if out.failed_statements == 0 {
        ParseStatus::Clean
    } else if out.ok_statements >= 1 && out.ok_statements >= out.failed_statements {
        ParseStatus::Recovered
    } else {
        ParseStatus::Opaque
    };

    let mut units = Vec::new();
    let mut imports = Vec::new();
    if status != ParseStatus::Opaque {
        let module = module_name(path);
        units.push(CodeUnit {
            kind: UnitKind::Module,
            name: module.rsplit('.').next().unwrap_or(&module).to_string(),
            qualified_name: module,
            signature: String::new(),
            param_count: 0,
            docstring: out.module_docstring.clone(),
            line_span: (1, loc.max(1)),
            nesting_depth: 0,
        });
        units.extend(out.units.iter().map(|u| CodeUnit {
            kind: match u.kind {
                DefKind::Class => UnitKind::Class,
                DefKind::Function => UnitKind::Function,
                DefKind::Method => UnitKind::Method,
            },
            name: u.name.clone(),
            qualified_name: u.qualified_name.clone(),
            signature: u.signature.clone(),
            param_count: u.param_count,
            docstring: u.docstring.clone(),
            line_span: (u.start_line, u.end_line.max(u.start_line)),
            nesting_depth: u.nesting_depth,
        }));
        units[1..].sort_by_key(|u| u.line_span.0);
        let mut seen = BTreeSet::new();
        for i in &out.imports {
            if seen.insert(i.clone()) {
                imports.push(i.clone());
            }
        }
    }

    CodeSummary {
        file: path.to_string(),
        units,
        imports,
        loc,
        comment_lines,
        docstring_lines,
        comment_density,
        parse_status: status,
    }
}

pub fn comment_density(summary: &CodeSummary) -> f64 {
    summary.comment_density
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First sentence of a docstring, whitespace-collapsed.
pub fn first_sentence(doc: &str) -> String {
    let para = doc.split("\n\n").next().unwrap_or("");
    let flat = collapse_ws(para);
    let mut end = flat.len();
    for (i, c) in flat.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let next = flat[i + c.len_utf8()..].chars().next();
            if next.is_none_or(char::is_whitespace) {
                end = i + c.len_utf8();
                break;
            }
        }
    }
    flat[..end].to_string()
}

pub fn to_outline(summary: &CodeSummary) -> String {
    let mut out = String::new();
    if summary.parse_status == ParseStatus::Opaque {
        let _ = writeln!(
            out,
            "{}: unparsed file of {} lines",
            summary.file, summary.loc
        );
        return out;
    }
    for unit in &summary.units {
        let doc = unit
            .docstring
            .as_deref()
            .map(first_sentence)
            .filter(|s| !s.is_empty());
        if unit.kind == UnitKind::Module {
            let _ = write!(
                out,
                "module {} ({}, {} lines)",
                unit.qualified_name, summary.file, summary.loc
            );
        } else {
            let _ = write!(
                out,
                "{}{} {}{} [lines {}-{}]",
                "  ".repeat(unit.nesting_depth),
                unit.kind.as_str(),
                unit.qualified_name,
                collapse_ws(&unit.signature),
                unit.line_span.0,
                unit.line_span.1
            );
        }
        match doc {
            Some(d) => {
                let _ = writeln!(out, ": {d}");
            }
            None => out.push('\n'),
        }
    }
    out
}

/// Code with comments and docstrings removed, one logical line per output
/// line, prefixed by block depth, tokens joined by single spaces.
///
/// Two sources that differ only in comments, docstrings, blank lines or
/// intra-line spacing normalize to the same string.
pub fn strip_comments_normalized(text: &str) -> String {
    let tokens = tokenize(text);
    let out = parse_tokens(text, &tokens);
    let doc_starts: BTreeSet<usize> = out.docstrings.iter().map(|d| d.start).collect();

    let mut lines = Vec::new();
    let mut depth = 0usize;
    let mut current: Vec<&str> = Vec::new();
    let mut only_doc = true;
    for t in &tokens {
        match t.kind {
            TokKind::Comment => {}
            TokKind::Indent => depth += 1,
            TokKind::Dedent => depth = depth.saturating_sub(1),
            TokKind::Newline | TokKind::End => {
                if !current.is_empty() && !only_doc {
                    lines.push(format!("{depth}|{}", current.join(" ")));
                }
                current.clear();
                only_doc = true;
            }
            _ => {
                if t.kind == TokKind::Str && doc_starts.contains(&t.start) {
                    continue;
                }
                if t.kind == TokKind::Op && t.text(text) == ";" && current.is_empty() {
                    continue;
                }
                only_doc = false;
                current.push(t.text(text));
            }
        }
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defs(s: &CodeSummary) -> Vec<(UnitKind, &str, usize)> {
        s.definitions()
            .map(|u| (u.kind, u.qualified_name.as_str(), u.nesting_depth))
            .collect()
    }

    #[test]
    fn function_with_docstring() {
        let src = "def greet(name):\n    \"\"\"Say hello. Loudly.\"\"\"\n    return 'hi ' + name\n";
        let s = parse_source(src, "greet.py");
        assert_eq!(s.parse_status, ParseStatus::Clean);
        assert_eq!(s.units.len(), 2);
        assert_eq!(s.units[0].kind, UnitKind::Module);
        let f = &s.units[1];
        assert_eq!(f.kind, UnitKind::Function);
        assert_eq!(f.docstring.as_deref(), Some("Say hello. Loudly."));
        assert_eq!(f.line_span, (1, 3));
        assert_eq!(f.signature, "(name)");
        assert_eq!(s.docstring_lines, 1);
    }

    #[test]
    fn empty_text() {
        let s = parse_source("", "e.py");
        assert_eq!(s.units.len(), 1);
        assert_eq!(s.loc, 0);
        assert_eq!(s.comment_density, 0.0);
        assert_eq!(s.parse_status, ParseStatus::Clean);
    }

    #[test]
    fn class_with_methods() {
        let src = "class A:\n    def one(self):\n        pass\n\n    def two(self, x, *rest, k=1, **kw):\n        return x\n";
        let s = parse_source(src, "a.py");
        assert_eq!(s.units.len(), 4);
        assert_eq!(
            defs(&s),
            vec![
                (UnitKind::Class, "A", 1),
                (UnitKind::Method, "A.one", 2),
                (UnitKind::Method, "A.two", 2)
            ]
        );
        assert_eq!(s.units[3].param_count, 5);
        assert_eq!(s.units[1].line_span, (1, 6));
    }

    #[test]
    fn density_counts_trailing_comments() {
        // 10 lines: 2 comment lines (one trailing), 1 docstring line.
        let src = "\"\"\"Doc.\"\"\"\n# c\nx = 1  # t\ny = 2\nz = 3\na = 4\nb = 5\nc = 6\nd = 7\ne = 8\n";
        let s = parse_source(src, "d.py");
        assert_eq!(s.loc, 10);
        assert_eq!((s.comment_lines, s.docstring_lines), (2, 1));
        assert!((comment_density(&s) - 0.3).abs() < 1e-12);
        let only = parse_source("# a\n# b\n", "c.py");
        assert_eq!(only.comment_density, 1.0);
        let bare = parse_source("x = 1\n", "b.py");
        assert_eq!(bare.comment_density, 0.0);
    }

    #[test]
    fn redefinition_gets_ordinal() {
        let s = parse_source("def f():\n    pass\ndef f(a):\n    pass\n", "r.py");
        let names: Vec<_> = s.definitions().map(|u| u.qualified_name.as_str()).collect();
        assert_eq!(names, vec!["f", "f#2"]);
    }

    #[test]
    fn prose_is_opaque() {
        let s = parse_source("Sure! Here is the code you asked for.\nIt should work well.\n", "p.py");
        assert_eq!(s.parse_status, ParseStatus::Opaque);
        assert!(s.units.is_empty());
        assert_eq!(
            to_outline(&s),
            "p.py: unparsed file of 2 lines\n"
        );
    }

    #[test]
    fn localized_error_recovers() {
        let src = "def ok():\n    return 1\n\ndef broken(x) x:\n    pass\n\nclass K:\n    pass\n";
        let s = parse_source(src, "m.py");
        assert_eq!(s.parse_status, ParseStatus::Recovered);
        let names: Vec<_> = s.definitions().map(|u| u.qualified_name.as_str()).collect();
        assert_eq!(names, vec!["ok", "K"]);
    }

    #[test]
    fn imports_collected_in_order() {
        let src = "import os, sys as s\nfrom .util import a\nfrom collections.abc import (Mapping,\n    Sequence)\nimport os\n";
        let s = parse_source(src, "i.py");
        assert_eq!(s.imports, vec!["os", "sys", ".util", "collections.abc"]);
    }

    #[test]
    fn wide_syntax_coverage_is_clean() {
        let src = r#"
from __future__ import annotations
import asyncio

@dataclass(frozen=True)
class P[T](Base, metaclass=M):
    x: int = 0
    async def run(self, /, a, *, b: int | None = None) -> list[int]:
        async with lock as l, other():
            await asyncio.sleep(0)
        data = [i ** 2 for i in range(10) if i % 2]
        d = {k: v for k, v in zip(a, b)}
        s = {*a, *b}
        lam = lambda q, *r: q if r else -q
        try:
            pass
        except* (ValueError, TypeError) as e:
            raise RuntimeError("x") from e
        else:
            pass
        finally:
            del data[0], d
        match self.x:
            case [1, *rest] if rest:
                return rest
            case {"k": v} | Point(x=0) as p:
                return [v]
            case _:
                return []

def g(*args, **kwargs): return f"{args!r}"; x = 1
type Alias = dict[str, int]
while (n := next(it, None)) is not None:
    print(n, end="", sep=" ")
else:
    x += 1; y: int
for a, *b in pairs: pass
with (open("a") as f, open("b") as g):
    x = f.read()[1:2, ::3]
"#;
        let s = parse_source(src, "wide.py");
        assert_eq!(s.parse_status, ParseStatus::Clean);
        assert_eq!(
            defs(&s),
            vec![
                (UnitKind::Class, "P", 1),
                (UnitKind::Method, "P.run", 2),
                (UnitKind::Function, "g", 1)
            ]
        );
        assert_eq!(s.units[2].param_count, 3);
    }

    #[test]
    fn outline_format() {
        let src = "\"\"\"Tools. More.\"\"\"\ndef a(x):\n    \"\"\"Adds one. Really.\"\"\"\n    return x + 1\n\ndef b(x,\n      y):\n    return x\n";
        let s = parse_source(src, "pkg/tools.py");
        let outline = to_outline(&s);
        assert_eq!(
            outline,
            "module pkg.tools (pkg/tools.py, 8 lines): Tools.\n  function a(x) [lines 2-4]: Adds one.\n  function b(x, y) [lines 6-8]\n"
        );
        assert_eq!(outline, to_outline(&s));
        let bare = parse_source("x = 1\n", "bare.py");
        assert_eq!(to_outline(&bare), "module bare (bare.py, 1 lines)\n");
    }

    #[test]
    fn normalization_ignores_comments_and_docstrings() {
        let a = "def f(x):\n    return x  \n\n\n";
        let b = "# header\ndef f(x):\n    \"\"\"Doc.\"\"\"\n    # inner\n    return   x # why\n";
        assert_eq!(strip_comments_normalized(a), strip_comments_normalized(b));
        let c = "def g(x):\n    return x\n";
        assert_ne!(strip_comments_normalized(a), strip_comments_normalized(c));
        let d = "def f(x):\n    return x\nreturn_value = 1\n";
        assert_ne!(strip_comments_normalized(a), strip_comments_normalized(d));
    }

    #[test]
    fn module_names() {
        assert_eq!(module_name("pkg/sub/mod.py"), "pkg.sub.mod");
        assert_eq!(module_name("pkg/__init__.py"), "pkg");
        assert_eq!(module_name("x.py"), "x");
    }
}
