//! Tokenizer shared by all five languages.
//!
//! The token stream is lossless: every byte of the input is either inside a
//! token's text or is whitespace between tokens.

use std::sync::Arc;

use crate::diag::Diagnostic;
use crate::model::SourceSpan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword,
    Number,
    StringLit,
    Punct,
    Comment,
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: SourceSpan,
    /// Byte offset of `text` in the input.
    pub offset: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.kind != TokenKind::StringLit && self.kind != TokenKind::Comment && self.text == text
    }

    /// Identifiers and keywords both count as words.
    pub fn is_word(&self) -> bool {
        matches!(self.kind, TokenKind::Ident | TokenKind::Keyword)
    }
}

pub const KEYWORDS: &[&str] = &[
    "resources",
    "structs",
    "tags",
    "periodicSensors",
    "eventDrivenSensors",
    "requestBasedSensors",
    "actuators",
    "storages",
    "generate",
    "action",
    "sample",
    "period",
    "for",
    "onCondition",
    "accessed",
    "by",
    "computationalServices",
    "Common",
    "Custom",
    "consume",
    "from",
    "global",
    "request",
    "to",
    "command",
    "COMPUTE",
    "on",
    "userInteractions",
    "notify",
    "devices",
    "location",
    "language",
    "platform",
    "protocol",
    "database",
    "service",
    "when",
    "emit",
    "set",
    "response",
    "true",
    "false",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const TWO_CHAR_PUNCT: &[&str] = &["->", "&&", "||", "==", "!=", "<=", ">="];
const ONE_CHAR_PUNCT: &str = "{}();:,.=<>+-*/!";

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '#'
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

/// Splits `text` into tokens. The final token is always `Eof`.
pub fn tokenize(text: &str, file: &Arc<str>) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor {
        src: text,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    loop {
        while matches!(cur.peek(), Some(c) if c.is_whitespace()) {
            cur.bump();
        }
        let start = cur.pos;
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                text: String::new(),
                span: SourceSpan::new(file.clone(), line, col, 0),
                offset: start,
            });
            break;
        };

        let kind = if c == '/' && cur.peek_at(1) == Some('/') {
            while matches!(cur.peek(), Some(c) if c != '\n' && c != '\r') {
                cur.bump();
            }
            TokenKind::Comment
        } else if is_ident_start(c) {
            while matches!(cur.peek(), Some(c) if is_ident_continue(c)) {
                cur.bump();
            }
            if is_keyword(&text[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() {
            lex_number(&mut cur);
            TokenKind::Number
        } else if c == '"' {
            cur.bump();
            let mut closed = false;
            while let Some(c) = cur.peek() {
                if c == '\n' || c == '\r' {
                    break;
                }
                cur.bump();
                if c == '\\' {
                    if matches!(cur.peek(), Some(n) if n != '\n' && n != '\r') {
                        cur.bump();
                    }
                } else if c == '"' {
                    closed = true;
                    break;
                }
            }
            if !closed {
                diags.push(Diagnostic::error(
                    "UnterminatedString",
                    "unterminated string literal",
                    SourceSpan::new(file.clone(), line, col, 1),
                ));
            }
            TokenKind::StringLit
        } else {
            let two: String = [Some(c), cur.peek_at(1)].into_iter().flatten().collect();
            if TWO_CHAR_PUNCT.contains(&two.as_str()) {
                cur.bump();
                cur.bump();
            } else {
                cur.bump();
                if !ONE_CHAR_PUNCT.contains(c) {
                    diags.push(Diagnostic::error(
                        "UnexpectedChar",
                        format!("unexpected character `{c}`"),
                        SourceSpan::new(file.clone(), line, col, 1),
                    ));
                }
            }
            TokenKind::Punct
        };

        let tok_text = &text[start..cur.pos];
        tokens.push(Token {
            kind,
            text: tok_text.to_string(),
            span: SourceSpan::new(file.clone(), line, col, tok_text.chars().count() as u32),
            offset: start,
        });
    }
    (tokens, diags)
}

fn lex_number(cur: &mut Cursor<'_>) {
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(c) if c.is_ascii_digit()) {
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let digits_at = match cur.peek_at(1) {
            Some('+' | '-') => 2,
            _ => 1,
        };
        if matches!(cur.peek_at(digits_at), Some(c) if c.is_ascii_digit()) {
            for _ in 0..digits_at {
                cur.bump();
            }
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
}

/// Decodes the body of a string literal token (quotes included in `raw`).
pub fn unescape(raw: &str) -> String {
    let inner = raw.strip_prefix('"').unwrap_or(raw);
    let inner = inner.strip_suffix('"').unwrap_or(inner);
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Inverse of [`unescape`]: renders `s` as a quoted literal.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
