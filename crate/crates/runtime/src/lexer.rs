//! Tokenizer for the target-language subset.
//!
//! Produces a flat token stream with explicit `Newline`, `Indent` and
//! `Dedent` tokens. Newlines inside brackets are ignored, as are blank and
//! comment-only lines.

use crate::error::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    /// f-string body, split into literal and expression-source parts.
    FStr(Vec<FPart>),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FPart {
    Lit(String),
    Expr(String),
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &["**", "//", "==", "!=", "<=", ">=", "->", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", ":="];
const OPS1: &[&str] = &["+", "-", "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "@", "&", "|", "^", "~"];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line: 1, depth: 0, indents: vec![0], out: Vec::new(), _src: src }
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.line, msg)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn push(&mut self, tok: Tok) {
        self.out.push(Token { tok, line: self.line });
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        let mut at_line_start = true;
        while self.pos < self.chars.len() {
            if at_line_start && self.depth == 0 {
                if self.handle_indent()? {
                    continue;
                }
                at_line_start = false;
            }
            let c = self.chars[self.pos];
            match c {
                '\n' => {
                    self.pos += 1;
                    if self.depth == 0 {
                        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Indent) | Some(Tok::Dedent)) {
                            self.push(Tok::Newline);
                        }
                        at_line_start = true;
                    }
                    self.line += 1;
                }
                ' ' | '\t' | '\r' => self.pos += 1,
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                '\\' if self.peek_at(1) == Some('\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => self.number()?,
                c if c.is_alphabetic() || c == '_' => {
                    if let Some(tok) = self.prefixed_string()? {
                        self.push(tok);
                    } else {
                        let start = self.pos;
                        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                            self.pos += 1;
                        }
                        let name: String = self.chars[start..self.pos].iter().collect();
                        self.push(Tok::Name(name));
                    }
                }
                '"' | '\'' => {
                    let s = self.string_body(false)?;
                    self.push(Tok::Str(s));
                }
                _ => self.op()?,
            }
        }
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Dedent)) {
            self.push(Tok::Newline);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent);
        }
        self.push(Tok::Eof);
        Ok(self.out)
    }

    /// Measures indentation at the start of a logical line. Returns true when
    /// the line was blank or comment-only and has been consumed.
    fn handle_indent(&mut self) -> Result<bool, SyntaxError> {
        let mut width = 0usize;
        let mut p = self.pos;
        while let Some(&c) = self.chars.get(p) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\r' => {}
                _ => break,
            }
            p += 1;
        }
        match self.chars.get(p) {
            None => {
                self.pos = p;
                return Ok(true);
            }
            Some('\n') => {
                self.pos = p + 1;
                self.line += 1;
                return Ok(true);
            }
            Some('#') => {
                while self.chars.get(p).is_some_and(|&c| c != '\n') {
                    p += 1;
                }
                self.pos = (p + 1).min(self.chars.len());
                self.line += 1;
                return Ok(true);
            }
            _ => {}
        }
        self.pos = p;
        let current = *self.indents.last().unwrap_or(&0);
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent);
        } else {
            while width < *self.indents.last().unwrap_or(&0) {
                self.indents.pop();
                self.push(Tok::Dedent);
            }
            if width != *self.indents.last().unwrap_or(&0) {
                return Err(self.err("unindent does not match any outer indentation level"));
            }
        }
        Ok(false)
    }

    fn number(&mut self) -> Result<(), SyntaxError> {
        let start = self.pos;
        if self.peek() == Some('0') && matches!(self.peek_at(1), Some('x') | Some('X')) {
            self.pos += 2;
            let s = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_hexdigit() || c == '_') {
                self.pos += 1;
            }
            let digits: String = self.chars[s..self.pos].iter().filter(|c| **c != '_').collect();
            let v = i64::from_str_radix(&digits, 16).map_err(|_| self.err("invalid hex literal"))?;
            self.push(Tok::Int(v));
            return Ok(());
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '_' {
                self.pos += 1;
            } else if c == '.' && !is_float && self.peek_at(1) != Some('.') {
                is_float = true;
                self.pos += 1;
            } else if (c == 'e' || c == 'E')
                && (self.peek_at(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(self.peek_at(1), Some('+') | Some('-')) && self.peek_at(2).is_some_and(|d| d.is_ascii_digit())))
            {
                is_float = true;
                self.pos += 2;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().filter(|c| **c != '_').collect();
        if is_float {
            let v: f64 = text.parse().map_err(|_| self.err(format!("invalid float literal {text}")))?;
            self.push(Tok::Float(v));
        } else {
            let v: i64 = text.parse().map_err(|_| self.err(format!("integer literal out of range: {text}")))?;
            self.push(Tok::Int(v));
        }
        Ok(())
    }

    /// Handles string literals with a letter prefix (`b"..."`, `r'...'`, `f"..."`).
    fn prefixed_string(&mut self) -> Result<Option<Tok>, SyntaxError> {
        let mut p = self.pos;
        let mut prefix = String::new();
        while let Some(&c) = self.chars.get(p) {
            if matches!(c, 'b' | 'B' | 'r' | 'R' | 'f' | 'F' | 'u' | 'U') && prefix.len() < 2 {
                prefix.push(c.to_ascii_lowercase());
                p += 1;
            } else {
                break;
            }
        }
        if prefix.is_empty() || !matches!(self.chars.get(p), Some('"') | Some('\'')) {
            return Ok(None);
        }
        self.pos = p;
        let raw = prefix.contains('r');
        let body = self.string_body(raw)?;
        if prefix.contains('b') {
            let bytes = body
                .chars()
                .map(|c| u8::try_from(c as u32).map_err(|_| self.err("non-latin-1 character in bytes literal")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Some(Tok::Bytes(bytes)));
        }
        if prefix.contains('f') {
            return Ok(Some(Tok::FStr(split_fstring(&body).map_err(|m| self.err(m))?)));
        }
        Ok(Some(Tok::Str(body)))
    }

    fn string_body(&mut self, raw: bool) -> Result<String, SyntaxError> {
        let quote = self.chars[self.pos];
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err("unterminated string literal"));
            };
            if c == quote {
                if !triple {
                    self.pos += 1;
                    return Ok(out);
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    self.pos += 3;
                    return Ok(out);
                }
            }
            if c == '\n' {
                if !triple {
                    return Err(self.err("unterminated string literal"));
                }
                self.line += 1;
            }
            if c == '\\' && !raw {
                self.pos += 1;
                let Some(e) = self.peek() else {
                    return Err(self.err("unterminated string literal"));
                };
                self.pos += 1;
                match e {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    'b' => out.push('\u{8}'),
                    'f' => out.push('\u{c}'),
                    '0' => out.push('\0'),
                    '\\' => out.push('\\'),
                    '\'' => out.push('\''),
                    '"' => out.push('"'),
                    '/' => out.push_str("\\/"),
                    '\n' => self.line += 1,
                    'x' => out.push(self.hex_escape(2)?),
                    'u' => {
                        let hi = self.hex_escape(4)? as u32;
                        if (0xD800..0xDC00).contains(&hi) && self.peek() == Some('\\') && self.peek_at(1) == Some('u') {
                            self.pos += 2;
                            let lo = self.hex_escape(4)? as u32;
                            let cp = 0x10000 + ((hi - 0xD800) << 10) + (lo.wrapping_sub(0xDC00) & 0x3FF);
                            out.push(char::from_u32(cp).ok_or_else(|| self.err("invalid surrogate pair"))?);
                        } else {
                            out.push(char::from_u32(hi).ok_or_else(|| self.err("invalid \\u escape"))?);
                        }
                    }
                    'U' => out.push(self.hex_escape(8)?),
                    other => {
                        out.push('\\');
                        out.push(other);
                    }
                }
                continue;
            }
            out.push(c);
            self.pos += 1;
        }
    }

    fn hex_escape(&mut self, n: usize) -> Result<char, SyntaxError> {
        if self.pos + n > self.chars.len() {
            return Err(self.err("truncated escape"));
        }
        let s: String = self.chars[self.pos..self.pos + n].iter().collect();
        self.pos += n;
        let v = u32::from_str_radix(&s, 16).map_err(|_| self.err("invalid escape"))?;
        char::from_u32(v).ok_or_else(|| self.err("invalid escape"))
    }

    fn op(&mut self) -> Result<(), SyntaxError> {
        for table in [OPS3, OPS2, OPS1] {
            for &op in table {
                let len = op.chars().count();
                if self.pos + len <= self.chars.len() && self.chars[self.pos..self.pos + len].iter().copied().eq(op.chars()) {
                    self.pos += len;
                    match op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                        _ => {}
                    }
                    self.push(Tok::Op(op));
                    return Ok(());
                }
            }
        }
        Err(self.err(format!("unexpected character {:?}", self.chars[self.pos])))
    }
}

fn split_fstring(body: &str) -> Result<Vec<FPart>, String> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '{' {
            if chars.get(i + 1) == Some(&'{') {
                lit.push('{');
                i += 2;
                continue;
            }
            if !lit.is_empty() {
                parts.push(FPart::Lit(std::mem::take(&mut lit)));
            }
            let mut depth = 1;
            let mut expr = String::new();
            i += 1;
            while i < chars.len() {
                match chars[i] {
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                expr.push(chars[i]);
                i += 1;
            }
            if depth != 0 {
                return Err("unterminated f-string expression".into());
            }
            parts.push(FPart::Expr(expr));
            i += 1;
        } else if c == '}' {
            if chars.get(i + 1) == Some(&'}') {
                i += 1;
            }
            lit.push('}');
            i += 1;
        } else {
            lit.push(c);
            i += 1;
        }
    }
    if !lit.is_empty() {
        parts.push(FPart::Lit(lit));
    }
    Ok(parts)
}
