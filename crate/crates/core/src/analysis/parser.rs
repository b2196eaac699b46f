//! Recursive-descent recognizer for Python statements.
//!
//! Builds no AST: it validates syntax, records definition units, imports and
//! docstrings, and recovers at top-level statement boundaries. Nested
//! failures discard the whole enclosing top-level statement.

use super::lexer::{TokKind, Token};

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

const AUG_ASSIGN: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "@=", "&=", "|=", "^=", ">>=", "<<=", "**=",
];

const MAX_NESTING: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefKind {
    Class,
    Function,
    Method,
}

#[derive(Debug, Clone)]
pub struct DefUnit {
    pub kind: DefKind,
    pub name: String,
    pub qualified_name: String,
    pub signature: String,
    pub param_count: usize,
    pub docstring: Option<String>,
    pub start_line: usize,
    pub end_line: usize,
    pub nesting_depth: usize,
}

/// A docstring literal: byte range and line span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub end_line: usize,
}

#[derive(Debug, Default)]
pub struct ParseOutput {
    pub units: Vec<DefUnit>,
    pub module_docstring: Option<String>,
    pub imports: Vec<String>,
    pub docstrings: Vec<DocSpan>,
    pub ok_statements: usize,
    pub failed_statements: usize,
}

#[derive(Debug)]
struct ParseErr;

type PResult<T> = Result<T, ParseErr>;

#[derive(Clone)]
struct Scope {
    kind: Option<DefKind>,
    qual: String,
    depth: usize,
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    /// Indentation level before each token.
    level: Vec<i64>,
    pos: usize,
    nesting: usize,
    last_line: usize,
    out: ParseOutput,
    scopes: Vec<Scope>,
}

/// Strips quotes and prefix from a string literal and dedents its body.
pub fn literal_body(lit: &str) -> String {
    let q = lit.find(['"', '\'']).unwrap_or(0);
    let inner = &lit[q..];
    let strip = if inner.starts_with("\"\"\"") || inner.starts_with("'''") {
        3
    } else {
        1
    };
    let body = if inner.len() >= 2 * strip {
        &inner[strip..inner.len() - strip]
    } else {
        ""
    };
    let lines: Vec<&str> = body.lines().collect();
    let indent = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut text = String::new();
    for (i, l) in lines.iter().enumerate() {
        if i > 0 {
            text.push('\n');
            text.push_str(l.get(indent..).unwrap_or(l.trim_start()));
        } else {
            text.push_str(l.trim());
        }
    }
    text.trim().to_string()
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, tokens: &[Token]) -> Self {
        let toks: Vec<Token> = tokens
            .iter()
            .filter(|t| t.kind != TokKind::Comment)
            .cloned()
            .collect();
        let mut level = Vec::with_capacity(toks.len());
        let mut l = 0i64;
        for t in &toks {
            level.push(l);
            match t.kind {
                TokKind::Indent => l += 1,
                TokKind::Dedent => l -= 1,
                _ => {}
            }
        }
        Self {
            src,
            toks,
            level,
            pos: 0,
            nesting: 0,
            last_line: 1,
            out: ParseOutput::default(),
            scopes: vec![Scope {
                kind: None,
                qual: String::new(),
                depth: 0,
            }],
        }
    }

    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn text_of(&self, t: &Token) -> &'a str {
        t.text(self.src)
    }

    fn peek_text(&self) -> &'a str {
        let t = self.peek();
        t.text(self.src)
    }

    fn at_op(&self, op: &str) -> bool {
        self.peek().kind == TokKind::Op && self.peek_text() == op
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().kind == TokKind::Name && self.peek_text() == kw
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if !matches!(
            t.kind,
            TokKind::Newline | TokKind::Indent | TokKind::Dedent | TokKind::End
        ) {
            self.last_line = t.end_line;
        }
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Token> {
        if self.at_op(op) {
            Ok(self.bump())
        } else {
            Err(ParseErr)
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(ParseErr)
        }
    }

    fn at_identifier(&self) -> bool {
        self.peek().kind == TokKind::Name && !KEYWORDS.contains(&self.peek_text())
    }

    fn identifier(&mut self) -> PResult<String> {
        if self.at_identifier() {
            Ok(self.bump().text(self.src).to_string())
        } else {
            Err(ParseErr)
        }
    }

    fn expect_kind(&mut self, kind: TokKind) -> PResult<()> {
        if self.peek().kind == kind {
            self.bump();
            Ok(())
        } else {
            Err(ParseErr)
        }
    }

    fn end_of_simple(&mut self) -> PResult<()> {
        match self.peek().kind {
            TokKind::Newline => {
                self.bump();
                Ok(())
            }
            TokKind::End => Ok(()),
            _ => Err(ParseErr),
        }
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        if self.nesting >= MAX_NESTING {
            return Err(ParseErr);
        }
        self.nesting += 1;
        let r = f(self);
        self.nesting -= 1;
        r
    }

    // ---- module ----

    fn module(mut self) -> ParseOutput {
        loop {
            if self.peek().kind == TokKind::End {
                break;
            }
            let marks = (
                self.out.units.len(),
                self.out.imports.len(),
                self.out.docstrings.len(),
                self.out.module_docstring.is_some(),
            );
            let start = self.pos;
            if start == 0 {
                self.out.module_docstring = self.docstring_here();
            }
            self.nesting = 0;
            self.scopes.truncate(1);
            match self.statement() {
                Ok(()) => self.out.ok_statements += 1,
                Err(ParseErr) => {
                    self.out.failed_statements += 1;
                    self.out.units.truncate(marks.0);
                    self.out.imports.truncate(marks.1);
                    self.out.docstrings.truncate(marks.2);
                    if !marks.3 {
                        self.out.module_docstring = None;
                    }
                    self.recover(start);
                }
            }
        }
        self.out
    }

    /// Skips to the next token that begins a top-level logical line.
    fn recover(&mut self, start: usize) {
        if self.pos <= start {
            self.pos = start + 1;
        }
        while self.pos < self.toks.len() - 1 {
            let prev = self.toks[self.pos - 1].kind;
            let cur = self.toks[self.pos].kind;
            if matches!(prev, TokKind::Newline | TokKind::Dedent)
                && self.level[self.pos] <= 0
                && !matches!(cur, TokKind::Indent | TokKind::Dedent)
            {
                return;
            }
            self.pos += 1;
        }
        self.pos = self.toks.len() - 1;
    }

    /// If the next statement is a bare string literal, records it as a
    /// docstring and returns its text. Does not consume tokens.
    fn docstring_here(&mut self) -> Option<String> {
        let mut i = self.pos;
        while self.toks[i].kind == TokKind::Str {
            i += 1;
        }
        if i == self.pos {
            return None;
        }
        let end = &self.toks[i];
        let terminated = matches!(end.kind, TokKind::Newline | TokKind::End)
            || (end.kind == TokKind::Op && end.text(self.src) == ";");
        if !terminated {
            return None;
        }
        let mut text = String::new();
        for t in &self.toks[self.pos..i] {
            self.out.docstrings.push(DocSpan {
                start: t.start,
                end: t.end,
                line: t.line,
                end_line: t.end_line,
            });
            text.push_str(&literal_body(t.text(self.src)));
        }
        Some(text)
    }

    // ---- statements ----

    fn statement(&mut self) -> PResult<()> {
        let t = self.peek().clone();
        if self.at_op("@") {
            return self.decorated();
        }
        match t.kind {
            TokKind::Name => {}
            TokKind::Indent | TokKind::Dedent | TokKind::Error | TokKind::Newline => {
                return Err(ParseErr)
            }
            _ => return self.simple_stmts(),
        }
        match self.text_of(&t) {
            "def" => self.funcdef(),
            "class" => self.classdef(),
            "if" => self.if_stmt(),
            "while" => self.while_stmt(),
            "for" => self.for_stmt(),
            "with" => self.with_stmt(),
            "try" => self.try_stmt(),
            "async" => {
                let next = self.peek_at(1).text(self.src);
                match next {
                    "def" => {
                        self.bump();
                        self.funcdef()
                    }
                    "for" => {
                        self.bump();
                        self.for_stmt()
                    }
                    "with" => {
                        self.bump();
                        self.with_stmt()
                    }
                    _ => Err(ParseErr),
                }
            }
            "match" => {
                let save = (self.pos, self.out.units.len(), self.last_line);
                match self.match_stmt() {
                    Ok(()) => Ok(()),
                    Err(ParseErr) => {
                        self.pos = save.0;
                        self.out.units.truncate(save.1);
                        self.last_line = save.2;
                        self.simple_stmts()
                    }
                }
            }
            _ => self.simple_stmts(),
        }
    }

    fn block(&mut self) -> PResult<Option<String>> {
        self.nested(|p| {
            if p.peek().kind == TokKind::Newline {
                p.bump();
                p.expect_kind(TokKind::Indent)?;
                let doc = p.docstring_here();
                loop {
                    match p.peek().kind {
                        TokKind::Dedent => {
                            p.bump();
                            break;
                        }
                        TokKind::End => break,
                        _ => p.statement_or_decorated()?,
                    }
                }
                Ok(doc)
            } else {
                let doc = p.docstring_here();
                p.simple_stmts()?;
                Ok(doc)
            }
        })
    }

    fn statement_or_decorated(&mut self) -> PResult<()> {
        if self.at_op("@") {
            self.decorated()
        } else {
            self.statement()
        }
    }

    fn decorated(&mut self) -> PResult<()> {
        while self.eat_op("@") {
            self.named_expression()?;
            self.expect_kind(TokKind::Newline)?;
        }
        if self.at_kw("def") {
            self.funcdef()
        } else if self.at_kw("class") {
            self.classdef()
        } else if self.at_kw("async") && self.peek_at(1).text(self.src) == "def" {
            self.bump();
            self.funcdef()
        } else {
            Err(ParseErr)
        }
    }

    fn type_params(&mut self) -> PResult<()> {
        if self.eat_op("[") {
            loop {
                if self.at_op("]") {
                    break;
                }
                let _ = self.eat_op("*") || self.eat_op("**");
                self.identifier()?;
                if self.eat_op(":") {
                    self.expression()?;
                }
                if self.eat_op("=") {
                    self.expression()?;
                }
                if !self.eat_op(",") {
                    break;
                }
            }
            self.expect_op("]")?;
        }
        Ok(())
    }

    fn open_unit(&mut self, kind_hint: DefKind, name: &str) -> (DefKind, String, usize) {
        let parent = self.scopes.last().unwrap().clone();
        let kind = match (kind_hint, parent.kind) {
            (DefKind::Class, _) => DefKind::Class,
            (_, Some(DefKind::Class)) => DefKind::Method,
            _ => DefKind::Function,
        };
        let base = if parent.qual.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", parent.qual, name)
        };
        let mut qual = base.clone();
        let mut ordinal = 1;
        while self.out.units.iter().any(|u| u.qualified_name == qual) {
            ordinal += 1;
            qual = format!("{base}#{ordinal}");
        }
        (kind, qual, parent.depth + 1)
    }

    fn funcdef(&mut self) -> PResult<()> {
        let def_tok = self.peek().clone();
        self.expect_kw("def")?;
        let name = self.identifier()?;
        self.type_params()?;
        let open = self.expect_op("(")?;
        let count = self.params(")", true)?;
        let close = self.expect_op(")")?;
        if self.eat_op("->") {
            self.expression()?;
        }
        self.expect_op(":")?;
        let (kind, qual, depth) = self.open_unit(DefKind::Function, &name);
        let idx = self.out.units.len();
        self.out.units.push(DefUnit {
            kind,
            name,
            qualified_name: qual.clone(),
            signature: self.src[open.start..close.end].to_string(),
            param_count: count,
            docstring: None,
            start_line: def_tok.line,
            end_line: def_tok.line,
            nesting_depth: depth,
        });
        self.scopes.push(Scope {
            kind: Some(kind),
            qual,
            depth,
        });
        let doc = self.block();
        self.scopes.pop();
        let doc = doc?;
        let unit = &mut self.out.units[idx];
        unit.docstring = doc;
        unit.end_line = self.last_line.max(unit.start_line);
        Ok(())
    }

    fn classdef(&mut self) -> PResult<()> {
        let class_tok = self.peek().clone();
        self.expect_kw("class")?;
        let name = self.identifier()?;
        self.type_params()?;
        let mut signature = String::new();
        if self.at_op("(") {
            let open = self.bump();
            self.arguments(")")?;
            let close = self.expect_op(")")?;
            signature = self.src[open.start..close.end].to_string();
        }
        self.expect_op(":")?;
        let (kind, qual, depth) = self.open_unit(DefKind::Class, &name);
        let idx = self.out.units.len();
        self.out.units.push(DefUnit {
            kind,
            name,
            qualified_name: qual.clone(),
            signature,
            param_count: 0,
            docstring: None,
            start_line: class_tok.line,
            end_line: class_tok.line,
            nesting_depth: depth,
        });
        self.scopes.push(Scope {
            kind: Some(kind),
            qual,
            depth,
        });
        let doc = self.block();
        self.scopes.pop();
        let doc = doc?;
        let unit = &mut self.out.units[idx];
        unit.docstring = doc;
        unit.end_line = self.last_line.max(unit.start_line);
        Ok(())
    }

    /// Parameter list up to `close`; returns the number of named parameters.
    fn params(&mut self, close: &str, annotations: bool) -> PResult<usize> {
        let mut count = 0;
        loop {
            if self.at_op(close) {
                break;
            }
            if self.eat_op("/") {
                // positional-only marker
            } else if self.eat_op("*") {
                if self.at_identifier() {
                    self.bump();
                    count += 1;
                    if annotations && self.eat_op(":") {
                        self.star_expression()?;
                    }
                }
            } else if self.eat_op("**") {
                self.identifier()?;
                count += 1;
                if annotations && self.eat_op(":") {
                    self.expression()?;
                }
            } else {
                self.identifier()?;
                count += 1;
                if annotations && self.eat_op(":") {
                    self.expression()?;
                }
                if self.eat_op("=") {
                    self.expression()?;
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(count)
    }

    fn if_stmt(&mut self) -> PResult<()> {
        self.expect_kw("if")?;
        self.named_expression()?;
        self.expect_op(":")?;
        self.block()?;
        while self.eat_kw("elif") {
            self.named_expression()?;
            self.expect_op(":")?;
            self.block()?;
        }
        self.else_block()
    }

    fn else_block(&mut self) -> PResult<()> {
        if self.eat_kw("else") {
            self.expect_op(":")?;
            self.block()?;
        }
        Ok(())
    }

    fn while_stmt(&mut self) -> PResult<()> {
        self.expect_kw("while")?;
        self.named_expression()?;
        self.expect_op(":")?;
        self.block()?;
        self.else_block()
    }

    fn for_stmt(&mut self) -> PResult<()> {
        self.expect_kw("for")?;
        self.targets()?;
        self.expect_kw("in")?;
        self.star_expressions()?;
        self.expect_op(":")?;
        self.block()?;
        self.else_block()
    }

    fn targets(&mut self) -> PResult<()> {
        loop {
            self.eat_op("*");
            self.bitor()?;
            if !self.eat_op(",") || self.at_kw("in") || self.at_op("=") {
                break;
            }
        }
        Ok(())
    }

    fn with_stmt(&mut self) -> PResult<()> {
        self.expect_kw("with")?;
        let save = self.pos;
        if self.at_op("(") {
            // Parenthesized with-items; fall back to an ordinary expression.
            self.bump();
            let parsed = (|| -> PResult<()> {
                loop {
                    if self.at_op(")") {
                        break;
                    }
                    self.with_item()?;
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(")")?;
                self.expect_op(":").map(drop)
            })();
            if parsed.is_ok() {
                self.block()?;
                return Ok(());
            }
            self.pos = save;
        }
        loop {
            self.with_item()?;
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(":")?;
        self.block()?;
        Ok(())
    }

    fn with_item(&mut self) -> PResult<()> {
        self.expression()?;
        if self.eat_kw("as") {
            self.targets_single()?;
        }
        Ok(())
    }

    fn targets_single(&mut self) -> PResult<()> {
        self.eat_op("*");
        self.bitor()
    }

    fn try_stmt(&mut self) -> PResult<()> {
        self.expect_kw("try")?;
        self.expect_op(":")?;
        self.block()?;
        let mut handlers = 0;
        while self.eat_kw("except") {
            handlers += 1;
            self.eat_op("*");
            if !self.at_op(":") {
                self.expression()?;
                while self.eat_op(",") {
                    self.expression()?;
                }
                if self.eat_kw("as") {
                    self.identifier()?;
                }
            }
            self.expect_op(":")?;
            self.block()?;
        }
        if handlers > 0 {
            self.else_block()?;
        }
        if self.eat_kw("finally") {
            self.expect_op(":")?;
            self.block()?;
        } else if handlers == 0 {
            return Err(ParseErr);
        }
        Ok(())
    }

    fn match_stmt(&mut self) -> PResult<()> {
        self.expect_kw("match")?;
        self.star_expressions()?;
        self.expect_op(":")?;
        self.expect_kind(TokKind::Newline)?;
        self.expect_kind(TokKind::Indent)?;
        let mut cases = 0;
        while self.eat_kw("case") {
            cases += 1;
            self.pattern()?;
            if self.eat_kw("if") {
                self.named_expression()?;
            }
            self.expect_op(":")?;
            self.block()?;
        }
        if cases == 0 {
            return Err(ParseErr);
        }
        match self.peek().kind {
            TokKind::Dedent => {
                self.bump();
                Ok(())
            }
            TokKind::End => Ok(()),
            _ => Err(ParseErr),
        }
    }

    fn pattern(&mut self) -> PResult<()> {
        loop {
            self.eat_op("*");
            self.bitor()?;
            if self.eat_kw("as") {
                self.identifier()?;
            }
            if !self.eat_op(",") || self.at_op(":") || self.at_kw("if") {
                break;
            }
        }
        Ok(())
    }

    fn simple_stmts(&mut self) -> PResult<()> {
        loop {
            self.simple_stmt()?;
            if !self.eat_op(";") {
                break;
            }
            if matches!(self.peek().kind, TokKind::Newline | TokKind::End) {
                break;
            }
        }
        self.end_of_simple()
    }

    fn simple_stmt(&mut self) -> PResult<()> {
        let t = self.peek().clone();
        if t.kind == TokKind::Name {
            match self.text_of(&t) {
                "pass" | "break" | "continue" => {
                    self.bump();
                    return Ok(());
                }
                "return" => {
                    self.bump();
                    if !self.at_stmt_end() {
                        self.star_expressions()?;
                    }
                    return Ok(());
                }
                "raise" => {
                    self.bump();
                    if !self.at_stmt_end() {
                        self.expression()?;
                        if self.eat_kw("from") {
                            self.expression()?;
                        }
                    }
                    return Ok(());
                }
                "global" | "nonlocal" => {
                    self.bump();
                    loop {
                        self.identifier()?;
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    return Ok(());
                }
                "del" => {
                    self.bump();
                    loop {
                        self.bitor()?;
                        if !self.eat_op(",") || self.at_stmt_end() {
                            break;
                        }
                    }
                    return Ok(());
                }
                "assert" => {
                    self.bump();
                    self.expression()?;
                    if self.eat_op(",") {
                        self.expression()?;
                    }
                    return Ok(());
                }
                "import" => {
                    self.bump();
                    loop {
                        let name = self.dotted_name()?;
                        self.out.imports.push(name);
                        if self.eat_kw("as") {
                            self.identifier()?;
                        }
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    return Ok(());
                }
                "from" => return self.from_import(),
                "type"
                    if self.peek_at(1).kind == TokKind::Name
                        && matches!(self.peek_at(2).text(self.src), "=" | "[") =>
                {
                    self.bump();
                    self.identifier()?;
                    self.type_params()?;
                    self.expect_op("=")?;
                    return self.expression();
                }
                _ => {}
            }
        }
        self.expression_statement()
    }

    fn at_stmt_end(&self) -> bool {
        matches!(self.peek().kind, TokKind::Newline | TokKind::End) || self.at_op(";")
    }

    fn dotted_name(&mut self) -> PResult<String> {
        let mut name = self.identifier()?;
        while self.eat_op(".") {
            name.push('.');
            name.push_str(&self.identifier()?);
        }
        Ok(name)
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_import(&mut self) -> PResult<()> {
        self.expect_kw("from")?;
        let mut module = String::new();
        loop {
            if self.eat_op(".") {
                module.push('.');
            } else if self.eat_op("...") {
                module.push_str("...");
            } else {
                break;
            }
        }
        if !self.at_kw("import") {
            module.push_str(&self.dotted_name()?);
        }
        if module.is_empty() {
            return Err(ParseErr);
        }
        self.expect_kw("import")?;
        if !self.eat_op("*") {
            let paren = self.eat_op("(");
            loop {
                if paren && self.at_op(")") {
                    break;
                }
                self.identifier()?;
                if self.eat_kw("as") {
                    self.identifier()?;
                }
                if !self.eat_op(",") {
                    break;
                }
            }
            if paren {
                self.expect_op(")")?;
            }
        }
        self.out.imports.push(module);
        Ok(())
    }

    fn expression_statement(&mut self) -> PResult<()> {
        if self.at_kw("yield") {
            self.yield_expr()?;
        } else {
            self.star_expressions()?;
        }
        if self.eat_op(":") {
            self.expression()?;
            if self.eat_op("=") {
                self.rhs()?;
            }
            return Ok(());
        }
        if self.peek().kind == TokKind::Op && AUG_ASSIGN.contains(&self.peek_text()) {
            self.bump();
            return self.rhs();
        }
        while self.eat_op("=") {
            self.rhs()?;
        }
        Ok(())
    }

    fn rhs(&mut self) -> PResult<()> {
        if self.at_kw("yield") {
            self.yield_expr()
        } else {
            self.star_expressions()
        }
    }

    // ---- expressions ----

    fn yield_expr(&mut self) -> PResult<()> {
        self.expect_kw("yield")?;
        if self.eat_kw("from") {
            return self.expression();
        }
        if !self.at_stmt_end() && !self.at_op(")") && !self.at_op("=") {
            self.star_expressions()?;
        }
        Ok(())
    }

    fn star_expressions(&mut self) -> PResult<()> {
        self.star_expression()?;
        while self.eat_op(",") {
            if self.expression_follows() {
                self.star_expression()?;
            } else {
                break;
            }
        }
        Ok(())
    }

    /// Whether the next token can start an expression.
    fn expression_follows(&self) -> bool {
        let t = self.peek();
        match t.kind {
            TokKind::Name => {
                let s = t.text(self.src);
                !KEYWORDS.contains(&s)
                    || matches!(s, "not" | "lambda" | "await" | "None" | "True" | "False")
            }
            TokKind::Number | TokKind::Str => true,
            TokKind::Op => matches!(
                t.text(self.src),
                "(" | "[" | "{" | "-" | "+" | "~" | "*" | "..."
            ),
            _ => false,
        }
    }

    fn star_expression(&mut self) -> PResult<()> {
        if self.eat_op("*") {
            self.bitor()
        } else {
            self.expression()
        }
    }

    fn star_named_expression(&mut self) -> PResult<()> {
        if self.eat_op("*") {
            self.bitor()
        } else {
            self.named_expression()
        }
    }

    fn named_expression(&mut self) -> PResult<()> {
        if self.at_identifier()
            && self.peek_at(1).kind == TokKind::Op
            && self.peek_at(1).text(self.src) == ":="
        {
            self.bump();
            self.bump();
        }
        self.expression()
    }

    fn expression(&mut self) -> PResult<()> {
        self.nested(|p| {
            if p.at_kw("lambda") {
                p.bump();
                p.params(":", false)?;
                p.expect_op(":")?;
                return p.expression();
            }
            p.disjunction()?;
            if p.eat_kw("if") {
                p.disjunction()?;
                p.expect_kw("else")?;
                p.expression()?;
            }
            Ok(())
        })
    }

    fn disjunction(&mut self) -> PResult<()> {
        self.conjunction()?;
        while self.eat_kw("or") {
            self.conjunction()?;
        }
        Ok(())
    }

    fn conjunction(&mut self) -> PResult<()> {
        self.inversion()?;
        while self.eat_kw("and") {
            self.inversion()?;
        }
        Ok(())
    }

    fn inversion(&mut self) -> PResult<()> {
        if self.eat_kw("not") {
            return self.nested(|p| p.inversion());
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<()> {
        self.bitor()?;
        loop {
            let t = self.peek().clone();
            let s = self.text_of(&t);
            let is_cmp = match t.kind {
                TokKind::Op => matches!(s, "==" | "!=" | "<" | ">" | "<=" | ">="),
                TokKind::Name => {
                    s == "in"
                        || s == "is"
                        || (s == "not" && self.peek_at(1).text(self.src) == "in")
                }
                _ => false,
            };
            if !is_cmp {
                return Ok(());
            }
            self.bump();
            if s == "not" || (s == "is" && self.at_kw("not")) {
                self.bump();
            }
            self.bitor()?;
        }
    }

    fn binary(&mut self, ops: &[&str], next: fn(&mut Self) -> PResult<()>) -> PResult<()> {
        next(self)?;
        while self.peek().kind == TokKind::Op && ops.contains(&self.peek_text()) {
            self.bump();
            next(self)?;
        }
        Ok(())
    }

    fn bitor(&mut self) -> PResult<()> {
        self.binary(&["|"], Self::bitxor)
    }

    fn bitxor(&mut self) -> PResult<()> {
        self.binary(&["^"], Self::bitand)
    }

    fn bitand(&mut self) -> PResult<()> {
        self.binary(&["&"], Self::shift)
    }

    fn shift(&mut self) -> PResult<()> {
        self.binary(&["<<", ">>"], Self::sum)
    }

    fn sum(&mut self) -> PResult<()> {
        self.binary(&["+", "-"], Self::term)
    }

    fn term(&mut self) -> PResult<()> {
        self.binary(&["*", "/", "//", "%", "@"], Self::factor)
    }

    fn factor(&mut self) -> PResult<()> {
        if self.eat_op("+") || self.eat_op("-") || self.eat_op("~") {
            return self.nested(|p| p.factor());
        }
        self.power()
    }

    fn power(&mut self) -> PResult<()> {
        self.eat_kw("await");
        self.primary()?;
        if self.eat_op("**") {
            self.nested(|p| p.factor())?;
        }
        Ok(())
    }

    fn primary(&mut self) -> PResult<()> {
        self.atom()?;
        loop {
            if self.eat_op(".") {
                // Attribute names may be soft or hard keywords after a dot
                // only when they are identifiers.
                self.identifier()?;
            } else if self.at_op("(") {
                self.bump();
                self.arguments(")")?;
                self.expect_op(")")?;
            } else if self.at_op("[") {
                self.bump();
                self.slices()?;
                self.expect_op("]")?;
            } else {
                return Ok(());
            }
        }
    }

    fn atom(&mut self) -> PResult<()> {
        let t = self.peek().clone();
        match t.kind {
            TokKind::Name => {
                let s = self.text_of(&t);
                if matches!(s, "None" | "True" | "False") || !KEYWORDS.contains(&s) {
                    self.bump();
                    Ok(())
                } else {
                    Err(ParseErr)
                }
            }
            TokKind::Number => {
                self.bump();
                Ok(())
            }
            TokKind::Str => {
                while self.peek().kind == TokKind::Str {
                    self.bump();
                }
                Ok(())
            }
            TokKind::Op => match self.text_of(&t) {
                "..." => {
                    self.bump();
                    Ok(())
                }
                "(" => self.nested(|p| {
                    p.bump();
                    if p.eat_op(")") {
                        return Ok(());
                    }
                    if p.at_kw("yield") {
                        p.yield_expr()?;
                        p.expect_op(")")?;
                        return Ok(());
                    }
                    p.star_named_expression()?;
                    if p.comprehension_follows() {
                        p.comprehension()?;
                    } else {
                        while p.eat_op(",") {
                            if p.at_op(")") {
                                break;
                            }
                            p.star_named_expression()?;
                        }
                    }
                    p.expect_op(")")?;
                    Ok(())
                }),
                "[" => self.nested(|p| {
                    p.bump();
                    if p.eat_op("]") {
                        return Ok(());
                    }
                    p.star_named_expression()?;
                    if p.comprehension_follows() {
                        p.comprehension()?;
                    } else {
                        while p.eat_op(",") {
                            if p.at_op("]") {
                                break;
                            }
                            p.star_named_expression()?;
                        }
                    }
                    p.expect_op("]")?;
                    Ok(())
                }),
                "{" => self.nested(|p| {
                    p.bump();
                    if p.eat_op("}") {
                        return Ok(());
                    }
                    p.dict_or_set_item()?;
                    if p.comprehension_follows() {
                        p.comprehension()?;
                    } else {
                        while p.eat_op(",") {
                            if p.at_op("}") {
                                break;
                            }
                            p.dict_or_set_item()?;
                        }
                    }
                    p.expect_op("}")?;
                    Ok(())
                }),
                _ => Err(ParseErr),
            },
            _ => Err(ParseErr),
        }
    }

    fn dict_or_set_item(&mut self) -> PResult<()> {
        if self.eat_op("**") {
            return self.bitor();
        }
        if self.eat_op("*") {
            return self.bitor();
        }
        self.named_expression()?;
        if self.eat_op(":") {
            self.expression()?;
        }
        Ok(())
    }

    fn comprehension_follows(&self) -> bool {
        self.at_kw("for") || (self.at_kw("async") && self.peek_at(1).text(self.src) == "for")
    }

    fn comprehension(&mut self) -> PResult<()> {
        while self.comprehension_follows() {
            self.eat_kw("async");
            self.expect_kw("for")?;
            self.targets()?;
            self.expect_kw("in")?;
            self.disjunction()?;
            while self.eat_kw("if") {
                self.disjunction()?;
            }
        }
        Ok(())
    }

    fn arguments(&mut self, close: &str) -> PResult<()> {
        self.nested(|p| {
            let mut first = true;
            loop {
                if p.at_op(close) {
                    break;
                }
                if p.eat_op("*") || p.eat_op("**") {
                    p.expression()?;
                } else if p.at_identifier()
                    && p.peek_at(1).kind == TokKind::Op
                    && p.peek_at(1).text(p.src) == "="
                {
                    p.bump();
                    p.bump();
                    p.expression()?;
                } else {
                    p.named_expression()?;
                    if first && p.comprehension_follows() {
                        p.comprehension()?;
                    }
                }
                first = false;
                if !p.eat_op(",") {
                    break;
                }
            }
            Ok(())
        })
    }

    fn slices(&mut self) -> PResult<()> {
        loop {
            self.slice()?;
            if !self.eat_op(",") || self.at_op("]") {
                break;
            }
        }
        Ok(())
    }

    fn slice(&mut self) -> PResult<()> {
        if self.eat_op("*") {
            return self.bitor();
        }
        let mut any = false;
        if !self.at_op(":") {
            self.named_expression()?;
            any = true;
        }
        if self.eat_op(":") {
            any = true;
            if !self.at_op(":") && !self.at_op("]") && !self.at_op(",") {
                self.expression()?;
            }
            if self.eat_op(":") && !self.at_op("]") && !self.at_op(",") {
                self.expression()?;
            }
        }
        if any {
            Ok(())
        } else {
            Err(ParseErr)
        }
    }
}

pub fn parse_tokens(src: &str, tokens: &[Token]) -> ParseOutput {
    Parser::new(src, tokens).module()
}
