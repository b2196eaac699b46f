//! Tokenizer for Python source.
//!
//! Total over any input: malformed constructs become [`TokKind::Error`]
//! tokens and scanning continues, so the parser decides how much of the
//! file survives.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Name,
    Number,
    Str,
    Op,
    Comment,
    Newline,
    Indent,
    Dedent,
    Error,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    /// Byte range into the source text.
    pub start: usize,
    pub end: usize,
    /// 1-based lines.
    pub line: usize,
    pub end_line: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==",
    "!=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@",
    "&", "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "=",
];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    depth: usize,
    indents: Vec<usize>,
    tokens: Vec<Token>,
    /// A token other than a comment has been emitted on the current logical line.
    line_has_content: bool,
}

fn is_name_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_name_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            depth: 0,
            indents: vec![0],
            tokens: Vec::new(),
            line_has_content: false,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn push(&mut self, kind: TokKind, start: usize, end: usize, line: usize) {
        if !matches!(kind, TokKind::Comment) {
            self.line_has_content = true;
        }
        self.tokens.push(Token {
            kind,
            start,
            end,
            line,
            end_line: self.line,
        });
    }

    fn run(mut self) -> Vec<Token> {
        let mut at_line_start = true;
        while self.pos < self.bytes.len() {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if self.indentation() {
                    continue;
                }
            }
            let c = self.peek_char().unwrap();
            match c {
                '\n' => {
                    if self.depth == 0 && self.line_has_content {
                        self.push(TokKind::Newline, self.pos, self.pos + 1, self.line);
                        self.line_has_content = false;
                    }
                    self.pos += 1;
                    self.line += 1;
                    at_line_start = true;
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => {
                    let start = self.pos;
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                    let line = self.line;
                    self.push(TokKind::Comment, start, self.pos, line);
                }
                '\\' => {
                    // Explicit line joining.
                    let start = self.pos;
                    self.pos += 1;
                    if self.bytes.get(self.pos) == Some(&b'\r') {
                        self.pos += 1;
                    }
                    if self.bytes.get(self.pos) == Some(&b'\n') {
                        self.pos += 1;
                        self.line += 1;
                    } else {
                        let line = self.line;
                        self.push(TokKind::Error, start, self.pos, line);
                    }
                }
                c if c.is_ascii_digit()
                    || (c == '.' && self.bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit)) =>
                {
                    self.number()
                }
                c if is_name_start(c) => {
                    if !self.string_with_prefix() {
                        self.name();
                    }
                }
                '"' | '\'' => self.string(self.pos),
                _ => self.operator(),
            }
        }
        if self.line_has_content {
            self.push(TokKind::Newline, self.pos, self.pos, self.line);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokKind::Dedent, self.pos, self.pos, self.line);
        }
        let (pos, line) = (self.pos, self.line);
        self.push(TokKind::End, pos, pos, line);
        self.tokens
    }

    /// Handles leading whitespace of a physical line. Returns true when the
    /// line is blank or comment-only (no indentation change).
    fn indentation(&mut self) -> bool {
        let mut col = 0usize;
        let mut p = self.pos;
        while p < self.bytes.len() {
            match self.bytes[p] {
                b' ' => col += 1,
                b'\t' => col = (col / 8 + 1) * 8,
                b'\x0c' => col = 0,
                _ => break,
            }
            p += 1;
        }
        match self.bytes.get(p) {
            None | Some(b'\n') | Some(b'#') | Some(b'\r') => {
                if self.bytes.get(p) == Some(&b'\r') && self.bytes.get(p + 1) != Some(&b'\n') {
                    // lone CR: treat as content below
                } else {
                    self.pos = p;
                    return true;
                }
            }
            _ => {}
        }
        self.pos = p;
        let current = *self.indents.last().unwrap();
        if col > current {
            self.indents.push(col);
            self.push(TokKind::Indent, p, p, self.line);
        } else if col < current {
            while *self.indents.last().unwrap() > col {
                self.indents.pop();
                self.push(TokKind::Dedent, p, p, self.line);
            }
            if *self.indents.last().unwrap() != col {
                // Dedent to a column that was never opened.
                self.indents.push(col);
                self.push(TokKind::Error, p, p, self.line);
            }
        }
        // Indent/Dedent are structural, not content, for Newline emission.
        self.line_has_content = false;
        false
    }

    fn number(&mut self) {
        let start = self.pos;
        let line = self.line;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
                if (b == b'e' || b == b'E')
                    && !self.src[start..self.pos].starts_with("0x")
                    && !self.src[start..self.pos].starts_with("0X")
                    && matches!(self.bytes.get(self.pos + 1), Some(b'+') | Some(b'-'))
                {
                    self.pos += 2;
                    continue;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
        self.push(TokKind::Number, start, self.pos, line);
    }

    fn name(&mut self) {
        let start = self.pos;
        let line = self.line;
        while let Some(c) = self.peek_char() {
            if is_name_continue(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        self.push(TokKind::Name, start, self.pos, line);
    }

    fn string_with_prefix(&mut self) -> bool {
        let rest = &self.bytes[self.pos..];
        let mut n = 0;
        while n < rest.len() && n < 2 && matches!(rest[n].to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f') {
            n += 1;
        }
        if n == 0 || !matches!(rest.get(n), Some(b'"') | Some(b'\'')) {
            return false;
        }
        let prefix = self.src[self.pos..self.pos + n].to_ascii_lowercase();
        let valid = matches!(
            prefix.as_str(),
            "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
        );
        if !valid {
            return false;
        }
        let start = self.pos;
        self.pos += n;
        self.string(start);
        true
    }

    /// Scans a string literal whose quote starts at `self.pos`; `start`
    /// includes any prefix.
    fn string(&mut self, start: usize) {
        let line = self.line;
        let quote = self.bytes[self.pos];
        let triple = self.bytes.get(self.pos + 1) == Some(&quote)
            && self.bytes.get(self.pos + 2) == Some(&quote);
        self.pos += if triple { 3 } else { 1 };
        loop {
            let Some(&b) = self.bytes.get(self.pos) else {
                self.push(TokKind::Error, start, self.pos, line);
                return;
            };
            match b {
                b'\\' => {
                    if self.bytes.get(self.pos + 1) == Some(&b'\n') {
                        self.line += 1;
                    }
                    self.pos = (self.pos + 2).min(self.bytes.len());
                    // keep pos on a char boundary
                    while !self.src.is_char_boundary(self.pos) {
                        self.pos += 1;
                    }
                }
                b'\n' if !triple => {
                    self.push(TokKind::Error, start, self.pos, line);
                    return;
                }
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                q if q == quote => {
                    if !triple {
                        self.pos += 1;
                        break;
                    }
                    if self.bytes.get(self.pos + 1) == Some(&quote)
                        && self.bytes.get(self.pos + 2) == Some(&quote)
                    {
                        self.pos += 3;
                        break;
                    }
                    self.pos += 1;
                }
                _ => self.pos += 1,
            }
        }
        self.push(TokKind::Str, start, self.pos, line);
    }

    fn operator(&mut self) {
        let start = self.pos;
        let line = self.line;
        let rest = &self.src[self.pos..];
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(*op)) {
            self.pos += op.len();
            match *op {
                "(" | "[" | "{" => self.depth += 1,
                ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                _ => {}
            }
            self.push(TokKind::Op, start, self.pos, line);
        } else {
            let c = self.peek_char().unwrap();
            self.pos += c.len_utf8();
            self.push(TokKind::Error, start, self.pos, line);
        }
    }
}

pub fn tokenize(src: &str) -> Vec<Token> {
    Lexer::new(src).run()
}
