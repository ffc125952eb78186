//! Recursive-descent parsers for the vocabulary, architecture, user
//! interaction, deployment and rule languages.
//!
//! Each entry point returns the parsed spec (absent when any Error diagnostic
//! was produced) together with every diagnostic found. Parsers recover at
//! declaration boundaries so one file can report several errors.

mod arch;
mod deploy;
mod domain;
pub mod lexer;
mod rules;
mod ui;

use std::sync::Arc;

pub use arch::parse_architecture;
pub use deploy::parse_deployment;
pub use domain::parse_domain;
pub use rules::parse_logic_rules;
pub use ui::parse_userinteraction;

use crate::diag::{self, Diagnostic};
use crate::model::{
    BinaryOp, EventDecl, Expr, ExprKind, Field, FieldBase, Literal, PrimType, RecordTypeDecl,
    SourceSpan, UnaryOp,
};
use lexer::{Token, TokenKind};

/// Result of parsing one file.
pub type Parsed<T> = (Option<T>, Vec<Diagnostic>);

/// Marker returned after a diagnostic has been recorded; the caller recovers.
#[derive(Debug)]
pub(crate) struct Bail;

pub(crate) type PResult<T> = Result<T, Bail>;

pub(crate) struct Parser<'src> {
    src: &'src str,
    file: Arc<str>,
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    eof_reported: bool,
}

impl<'src> Parser<'src> {
    pub(crate) fn new(src: &'src str, file: &str) -> Self {
        let file: Arc<str> = Arc::from(file);
        let (toks, diags) = lexer::tokenize(src, &file);
        let toks = toks.into_iter().filter(|t| t.kind != TokenKind::Comment).collect();
        Self {
            src,
            file,
            toks,
            pos: 0,
            diags,
            eof_reported: false,
        }
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    pub(crate) fn bump(&mut self) -> Token {
        let tok = self.toks[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    pub(crate) fn at(&self, text: &str) -> bool {
        self.peek().is(text)
    }

    pub(crate) fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn error(&mut self, code: &'static str, message: impl Into<String>, span: SourceSpan) {
        self.diags.push(Diagnostic::error(code, message, span));
    }

    /// Reports that the current token is not what the grammar wants.
    pub(crate) fn unexpected(&mut self, expected: &str) -> Bail {
        let tok = self.peek().clone();
        if tok.kind == TokenKind::Eof {
            if !self.eof_reported {
                self.eof_reported = true;
                self.error(
                    "UnexpectedEof",
                    format!("unexpected end of input, expected {expected}"),
                    tok.span,
                );
            }
        } else {
            self.error(
                "Syntax",
                format!("expected {expected}, found `{}`", tok.text),
                tok.span,
            );
        }
        Bail
    }

    pub(crate) fn expect(&mut self, text: &str) -> PResult<Token> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("`{text}`")))
        }
    }

    /// A declaration name: identifiers only, keywords are reserved.
    pub(crate) fn expect_ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        let tok = self.peek();
        match tok.kind {
            TokenKind::Ident => {
                let tok = self.bump();
                Ok((tok.text, tok.span))
            }
            TokenKind::Keyword => {
                let tok = self.bump();
                self.error(
                    "ReservedWord",
                    format!("`{}` is a reserved word and cannot name {what}", tok.text),
                    tok.span,
                );
                Err(Bail)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// A field, event or parameter name: any word is accepted.
    pub(crate) fn expect_name(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        if self.peek().is_word() {
            let tok = self.bump();
            Ok((tok.text, tok.span))
        } else {
            Err(self.unexpected(what))
        }
    }

    pub(crate) fn expect_type(&mut self) -> PResult<PrimType> {
        let tok = self.peek().clone();
        if tok.is_word() {
            if let Some(ty) = PrimType::from_keyword(&tok.text) {
                self.bump();
                return Ok(ty);
            }
            self.bump();
            self.error(
                "UnknownType",
                format!("unknown type `{}`, expected double, long or String", tok.text),
                tok.span,
            );
            return Err(Bail);
        }
        Err(self.unexpected("a type (double, long, String)"))
    }

    pub(crate) fn expect_string(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        if self.peek().kind == TokenKind::StringLit {
            let tok = self.bump();
            Ok((lexer::unescape(&tok.text), tok.span))
        } else {
            Err(self.unexpected(what))
        }
    }

    /// Span from token index `start` through the last consumed token.
    pub(crate) fn span_from(&self, start: usize) -> SourceSpan {
        let first = &self.toks[start];
        let last_idx = self.pos.saturating_sub(1).max(start);
        let last = &self.toks[last_idx];
        let end = last.offset + last.text.len();
        let length = self.src.get(first.offset..end).map_or(0, |s| s.chars().count());
        SourceSpan::new(self.file.clone(), first.span.line, first.span.column, length as u32)
    }

    /// Skips to the end of the current item: past the next `;` or up to the
    /// `}` that closes the enclosing block, whichever comes first at depth 0.
    pub(crate) fn recover_item(&mut self) {
        let mut depth = 0usize;
        loop {
            let tok = self.peek();
            if tok.kind == TokenKind::Eof {
                return;
            }
            if tok.is("{") {
                depth += 1;
            } else if tok.is("}") {
                if depth == 0 {
                    return;
                }
                depth -= 1;
                if depth == 0 {
                    self.bump();
                    return;
                }
            } else if tok.is(";") && depth == 0 {
                self.bump();
                return;
            }
            self.bump();
        }
    }

    /// Parses `{ item* }`, recovering from errors inside items.
    pub(crate) fn block<F>(&mut self, mut item: F) -> PResult<()>
    where
        F: FnMut(&mut Self) -> PResult<()>,
    {
        self.expect("{")?;
        loop {
            if self.eat("}") {
                return Ok(());
            }
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            let before = self.pos;
            if item(self).is_err() {
                if self.at_eof() {
                    return Err(Bail);
                }
                self.recover_item();
                if self.pos == before {
                    self.bump();
                }
            }
        }
    }

    /// Requires that all input has been consumed.
    pub(crate) fn finish(&mut self) {
        if !self.at_eof() {
            let _ = self.unexpected("end of input");
        }
    }

    pub(crate) fn into_result<T>(mut self, value: T) -> Parsed<T> {
        diag::sort(&mut self.diags);
        if diag::has_errors(&self.diags) {
            (None, self.diags)
        } else {
            (Some(value), self.diags)
        }
    }

    // -----------------------------------------------------------------------
    // Fragments shared by several languages

    /// `Name { field: type; ... }`
    pub(crate) fn record(&mut self) -> PResult<RecordTypeDecl> {
        let start = self.pos;
        let (name, _) = self.expect_ident("a record name")?;
        let mut fields = Vec::new();
        self.block(|p| {
            let fstart = p.pos;
            let (fname, _) = p.expect_name("a field name")?;
            p.expect(":")?;
            let ty = p.expect_type()?;
            p.expect(";")?;
            fields.push(Field {
                name: fname,
                ty,
                span: p.span_from(fstart),
            });
            Ok(())
        })?;
        let span = self.span_from(start);
        let mut seen = std::collections::HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                self.error(
                    "DuplicateField",
                    format!("field `{}` declared twice in record `{name}`", f.name),
                    f.span.clone(),
                );
            }
        }
        Ok(RecordTypeDecl { name, fields, span })
    }

    /// `structs { record* }`
    pub(crate) fn structs_section(&mut self, records: &mut Vec<RecordTypeDecl>) -> PResult<()> {
        self.expect("structs")?;
        self.block(|p| {
            let r = p.record()?;
            records.push(r);
            Ok(())
        })
    }

    /// `<keyword> name : PayloadType` (the terminator is left to the caller).
    pub(crate) fn event_decl(&mut self, keyword: &str) -> PResult<EventDecl> {
        let start = self.pos;
        self.expect(keyword)?;
        let (event, _) = self.expect_name("an event name")?;
        self.expect(":")?;
        let (payload, _) = self.expect_ident("a record type")?;
        Ok(EventDecl {
            event,
            payload,
            span: self.span_from(start),
        })
    }

    // -----------------------------------------------------------------------
    // Expressions

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary_expr(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let tok = self.peek();
        if tok.kind != TokenKind::Punct {
            return None;
        }
        Some(match tok.text.as_str() {
            "||" => BinaryOp::Or,
            "&&" => BinaryOp::And,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            _ => return None,
        })
    }

    // Precedence climbing; every level is left-associative.
    fn binary_expr(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.pos;
        let mut lhs = self.unary_expr()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary_expr(prec + 1)?;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                self.span_from(start),
            );
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let op = if self.at("!") {
            Some(UnaryOp::Not)
        } else if self.at("-") {
            Some(UnaryOp::Neg)
        } else {
            None
        };
        if let Some(op) = op {
            self.bump();
            let operand = self.unary_expr()?;
            return Ok(Expr::new(
                ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                self.span_from(start),
            ));
        }
        self.primary_expr()
    }

    fn primary_expr(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Number => {
                self.bump();
                let lit = self.number_literal(&tok)?;
                Ok(Expr::new(ExprKind::Literal(lit), tok.span))
            }
            TokenKind::StringLit => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Literal(Literal::Str(lexer::unescape(&tok.text))),
                    tok.span,
                ))
            }
            TokenKind::Punct if tok.text == "(" => {
                self.bump();
                let inner = self.expr()?;
                if !self.eat(")") {
                    let next = self.peek().clone();
                    if next.kind == TokenKind::Eof {
                        self.eof_reported = true;
                    }
                    self.error(
                        "UnbalancedParen",
                        format!("missing `)` to close `(` at {}:{}", tok.span.line, tok.span.column),
                        next.span,
                    );
                    return Err(Bail);
                }
                // Parentheses only group; the node keeps its own span.
                Ok(inner)
            }
            TokenKind::Keyword if tok.text == "true" || tok.text == "false" => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Literal(Literal::Bool(tok.text == "true")),
                    tok.span,
                ))
            }
            TokenKind::Ident | TokenKind::Keyword => {
                self.bump();
                let base = match tok.text.as_str() {
                    "event" => Some(FieldBase::Event),
                    "state" => Some(FieldBase::State),
                    "response" => Some(FieldBase::Response),
                    _ => None,
                };
                if let (Some(base), true) = (base, self.at(".")) {
                    self.bump();
                    let (name, _) = self.expect_name("a field name")?;
                    return Ok(Expr::new(ExprKind::Field { base, name }, self.span_from(start)));
                }
                Ok(Expr::new(
                    ExprKind::Field {
                        base: FieldBase::Bare,
                        name: tok.text,
                    },
                    tok.span,
                ))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    pub(crate) fn number_literal(&mut self, tok: &Token) -> PResult<Literal> {
        let is_double = tok.text.contains(['.', 'e', 'E']);
        if is_double {
            match tok.text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Literal::Double(v)),
                _ => {
                    self.error("NumberOverflow", format!("number `{}` is out of range", tok.text), tok.span.clone());
                    Err(Bail)
                }
            }
        } else {
            match tok.text.parse::<i64>() {
                Ok(v) => Ok(Literal::Long(v)),
                Err(_) => {
                    self.error("NumberOverflow", format!("number `{}` is out of range", tok.text), tok.span.clone());
                    Err(Bail)
                }
            }
        }
    }
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str) -> Parsed<Expr> {
    parse_expr_in(text, "<expr>")
}

pub fn parse_expr_in(text: &str, file: &str) -> Parsed<Expr> {
    let mut p = Parser::new(text, file);
    match p.expr() {
        Ok(e) => {
            p.finish();
            p.into_result(e)
        }
        Err(Bail) => {
            let diags = {
                let mut d = p.diags;
                diag::sort(&mut d);
                d
            };
            (None, diags)
        }
    }
}

/// Checks that names in `items` are unique, reporting duplicates with `code`.
pub(crate) fn check_unique<'a, I>(diags: &mut Vec<Diagnostic>, code: &'static str, what: &str, items: I)
where
    I: IntoIterator<Item = (&'a str, &'a SourceSpan)>,
{
    let mut seen = std::collections::HashSet::new();
    for (name, span) in items {
        if !seen.insert(name) {
            diags.push(Diagnostic::error(
                code,
                format!("{what} `{name}` is declared more than once"),
                span.clone(),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(text: &str) -> Expr {
        let (e, d) = parse_expr(text);
        assert!(d.is_empty(), "{d:?}");
        e.unwrap()
    }

    #[test]
    fn comparison_against_threshold() {
        let e = ok("smokeValue > 650");
        assert_eq!(
            e,
            Expr::binary(
                BinaryOp::Gt,
                Expr::field(FieldBase::Bare, "smokeValue"),
                Expr::literal(Literal::Long(650))
            )
        );
    }

    #[test]
    fn multiplication_binds_tighter() {
        let e = ok("1 + 2 * 3");
        let expected = Expr::binary(
            BinaryOp::Add,
            Expr::literal(Literal::Long(1)),
            Expr::binary(
                BinaryOp::Mul,
                Expr::literal(Literal::Long(2)),
                Expr::literal(Literal::Long(3)),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn left_associative() {
        let e = ok("8 - 4 - 2");
        let expected = Expr::binary(
            BinaryOp::Sub,
            Expr::binary(
                BinaryOp::Sub,
                Expr::literal(Literal::Long(8)),
                Expr::literal(Literal::Long(4)),
            ),
            Expr::literal(Literal::Long(2)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn precedence_ladder() {
        // ! > * / > + - > comparisons > && > ||
        let e = ok("!a || b && c < d + e * f");
        let ExprKind::Binary { op: BinaryOp::Or, lhs, rhs } = e.kind else { panic!() };
        assert!(matches!(lhs.kind, ExprKind::Unary { op: UnaryOp::Not, .. }));
        let ExprKind::Binary { op: BinaryOp::And, rhs: cmp, .. } = rhs.kind else { panic!() };
        let ExprKind::Binary { op: BinaryOp::Lt, rhs: sum, .. } = cmp.kind else { panic!() };
        let ExprKind::Binary { op: BinaryOp::Add, rhs: prod, .. } = sum.kind else { panic!() };
        assert!(matches!(prod.kind, ExprKind::Binary { op: BinaryOp::Mul, .. }));
    }

    #[test]
    fn scoped_field_refs() {
        let e = ok("event.tempValue >= state.limit");
        assert_eq!(
            e.field_refs(),
            vec![(FieldBase::Event, "tempValue"), (FieldBase::State, "limit")]
        );
        assert_eq!(ok("response.x").field_refs(), vec![(FieldBase::Response, "x")]);
    }

    #[test]
    fn unbalanced_paren() {
        let (e, d) = parse_expr("a && (b");
        assert!(e.is_none());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "UnbalancedParen");
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let (e, d) = parse_expr("a b");
        assert!(e.is_none());
        assert_eq!(d[0].code, "Syntax");
    }

    #[test]
    fn literals() {
        assert_eq!(ok("2.5"), Expr::literal(Literal::Double(2.5)));
        assert_eq!(ok("\"hot\""), Expr::literal(Literal::Str("hot".into())));
        assert_eq!(ok("true"), Expr::literal(Literal::Bool(true)));
        let (_, d) = parse_expr("99999999999999999999");
        assert_eq!(d[0].code, "NumberOverflow");
    }
}
