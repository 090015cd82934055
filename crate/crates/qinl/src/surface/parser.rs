use std::collections::BTreeMap;

use qinl_core::kernel::{Term, TypeExpr};
use qinl_core::nrc::{NrcExpr, NrcType};
use qinl_core::query::Comprehension;

use super::ast::*;
use super::lexer::{tokenize, Span, Tok, Token};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{span}: expected {}, found {found}", expected_list(.expected))]
    Syntax {
        span: Span,
        expected: Vec<String>,
        found: String,
    },
    #[error("{span}: {message}")]
    Lexical { span: Span, message: String },
    #[error("{span}: unknown {namespace} `{name}`")]
    Resolution {
        span: Span,
        name: String,
        namespace: Namespace,
    },
    #[error("{span}: {namespace} `{name}` is already declared")]
    Duplicate {
        span: Span,
        name: String,
        namespace: Namespace,
    },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::Lexical { span, .. }
            | ParseError::Resolution { span, .. }
            | ParseError::Duplicate { span, .. } => *span,
        }
    }
}

fn expected_list(items: &[String]) -> String {
    match items {
        [] => "something else".into(),
        [one] => one.clone(),
        [init @ .., last] => format!("one of {} or {}", init.join(", "), last),
    }
}

type PResult<T> = Result<T, ParseError>;

const DECL_KEYWORDS: &[&str] = &["schema", "instance", "mapping", "query", "nrc", "migrate"];
const SECTION_KEYWORDS: &[&str] = &["entities", "attributes", "operations", "equations"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(x) if *x == k)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.at_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if self.at(&t) {
            Ok(self.bump().span)
        } else {
            self.error(&[&t.to_string()])
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Span> {
        if self.at_kw(k) {
            Ok(self.bump().span)
        } else {
            self.error(&[&format!("`{}`", k)])
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(text) => {
                let span = self.bump().span;
                Ok(Name { text, span })
            }
            _ => self.error(&[what]),
        }
    }

    /// A row id: dot-separated words, keywords allowed.
    fn row_path(&mut self) -> PResult<Name> {
        let start = self.span();
        let mut text = self.row_segment()?;
        while self.at(&Tok::Dot) && matches!(self.peek_at(1), Tok::Ident(_) | Tok::Keyword(_)) {
            self.bump();
            text.push('.');
            text.push_str(&self.row_segment()?);
        }
        Ok(Name {
            text,
            span: start.to(self.prev_span()),
        })
    }

    fn row_segment(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Keyword(k) => {
                self.bump();
                Ok(k.to_string())
            }
            _ => self.error(&["row identifier"]),
        }
    }

    fn skip_to_next_decl(&mut self) {
        while !matches!(self.peek(), Tok::Eof) {
            if DECL_KEYWORDS.iter().any(|k| self.at_kw(k)) {
                return;
            }
            self.bump();
        }
    }

    fn unit(&mut self) -> (SourceUnit, Vec<ParseError>) {
        let mut decls = Vec::new();
        let mut errors = Vec::new();
        while !self.at(&Tok::Eof) {
            let start = self.pos;
            match self.decl() {
                Ok(d) => {
                    decls.push(d);
                    self.eat(&Tok::Semi);
                }
                Err(e) => {
                    errors.push(e);
                    if self.pos == start {
                        self.bump();
                    }
                    self.skip_to_next_decl();
                }
            }
        }
        (SourceUnit { decls }, errors)
    }

    fn decl(&mut self) -> PResult<Decl> {
        let start = self.span();
        let kw = match self.peek() {
            Tok::Keyword(k) if DECL_KEYWORDS.contains(k) => *k,
            _ => return self.error(&["`schema`", "`instance`", "`mapping`", "`query`", "`nrc`", "`migrate`"]),
        };
        self.bump();
        let d = match kw {
            "schema" => Decl::Schema(self.schema(start)?),
            "instance" => Decl::Instance(self.instance(start)?),
            "mapping" => Decl::Mapping(self.mapping(start)?),
            "query" => {
                let name = self.ident("query name")?;
                self.expect(Tok::Colon)?;
                let schema = self.ident("schema name")?;
                self.expect(Tok::Eq)?;
                let query = self.comprehension()?;
                Decl::Query(QueryDecl {
                    name,
                    schema,
                    query,
                    span: start.to(self.prev_span()),
                })
            }
            "nrc" => {
                let name = self.ident("expression name")?;
                let schema = if self.eat(&Tok::Colon) {
                    Some(self.ident("schema name")?)
                } else {
                    None
                };
                self.expect(Tok::Eq)?;
                let expr = self.nrc_expr()?;
                Decl::Nrc(NrcDecl {
                    name,
                    schema,
                    expr,
                    span: start.to(self.prev_span()),
                })
            }
            _ => {
                let name = self.ident("instance name")?;
                self.expect(Tok::Eq)?;
                let direction = match self.peek() {
                    Tok::Keyword("delta") => Direction::Delta,
                    Tok::Keyword("sigma") => Direction::Sigma,
                    Tok::Keyword("pi") => Direction::Pi,
                    _ => return self.error(&["`delta`", "`sigma`", "`pi`"]),
                };
                self.bump();
                let mapping = self.ident("mapping name")?;
                let instance = self.ident("instance name")?;
                Decl::Migrate(MigrateDecl {
                    name,
                    direction,
                    mapping,
                    instance,
                    span: start.to(self.prev_span()),
                })
            }
        };
        Ok(d)
    }

    fn name_list(&mut self, what: &str) -> PResult<Vec<Name>> {
        let mut out = vec![self.ident(what)?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident(what)?);
        }
        Ok(out)
    }

    fn end_list(&mut self) -> PResult<()> {
        if self.eat(&Tok::Semi) {
            Ok(())
        } else {
            self.error(&["`,`", "`;`"])
        }
    }

    fn schema(&mut self, start: Span) -> PResult<SchemaDecl> {
        let name = self.ident("schema name")?;
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut d = SchemaDecl {
            name,
            entities: Vec::new(),
            attributes: Vec::new(),
            operations: Vec::new(),
            equations: Vec::new(),
            span: start,
        };
        loop {
            if self.eat_kw("entities") {
                d.entities.extend(self.name_list("entity type name")?);
                self.end_list()?;
            } else if self.eat_kw("attributes") {
                d.attributes.extend(self.name_list("attribute type name")?);
                self.end_list()?;
            } else if self.eat_kw("operations") {
                d.operations.push(self.op_decl()?);
                while self.eat(&Tok::Comma) {
                    d.operations.push(self.op_decl()?);
                }
                self.end_list()?;
            } else if self.eat_kw("equations") {
                while !self.at(&Tok::RBrace) && !SECTION_KEYWORDS.iter().any(|k| self.at_kw(k)) {
                    d.equations.push(self.equation()?);
                    self.expect(Tok::Semi)?;
                }
            } else if self.eat(&Tok::RBrace) {
                break;
            } else {
                return self.error(&["`entities`", "`attributes`", "`operations`", "`equations`", "`}`"]);
            }
        }
        d.span = start.to(self.prev_span());
        Ok(d)
    }

    fn op_decl(&mut self) -> PResult<OpDecl> {
        let name = self.ident("operation name")?;
        self.expect(Tok::Colon)?;
        let dom = self.ttp_type()?;
        self.expect(Tok::Arrow)?;
        let cod = self.ttp_type()?;
        Ok(OpDecl {
            span: name.span.to(self.prev_span()),
            name,
            dom,
            cod,
        })
    }

    fn equation(&mut self) -> PResult<EquationDecl> {
        let start = self.span();
        let mut ctx = Vec::new();
        if self.eat_kw("forall") {
            loop {
                let v = self.ident("variable")?;
                self.expect(Tok::Colon)?;
                ctx.push((v, self.ttp_type()?));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Dot)?;
        }
        let lhs = self.term()?;
        self.expect(Tok::Eq)?;
        let rhs = self.term()?;
        Ok(EquationDecl {
            ctx,
            lhs,
            rhs,
            span: start.to(self.prev_span()),
        })
    }

    fn ttp_type(&mut self) -> PResult<TypeExpr> {
        let left = match self.peek().clone() {
            Tok::Int(1) => {
                self.bump();
                TypeExpr::Unit
            }
            Tok::Ident(n) => {
                self.bump();
                TypeExpr::Base(n)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ttp_type()?;
                self.expect(Tok::RParen)?;
                t
            }
            _ => return self.error(&["type"]),
        };
        if self.eat(&Tok::Star) {
            Ok(TypeExpr::prod(left, self.ttp_type()?))
        } else {
            Ok(left)
        }
    }

    fn nrc_type(&mut self) -> PResult<NrcType> {
        let left = self.nrc_type_atom()?;
        if self.eat(&Tok::Star) {
            Ok(NrcType::prod(left, self.nrc_type()?))
        } else {
            Ok(left)
        }
    }

    fn nrc_type_atom(&mut self) -> PResult<NrcType> {
        Ok(match self.peek().clone() {
            Tok::Int(1) => {
                self.bump();
                NrcType::Unit
            }
            Tok::Keyword("Bool") => {
                self.bump();
                NrcType::Bool
            }
            Tok::Keyword("Set") => {
                self.bump();
                NrcType::set(self.nrc_type_atom()?)
            }
            Tok::Ident(n) => {
                self.bump();
                NrcType::Base(n)
            }
            Tok::LParen => {
                self.bump();
                let t = self.nrc_type()?;
                self.expect(Tok::RParen)?;
                t
            }
            _ => return self.error(&["type"]),
        })
    }

    fn term(&mut self) -> PResult<Term> {
        let mut t = match self.peek().clone() {
            Tok::Ident(n) => {
                self.bump();
                if self.at(&Tok::LParen) {
                    let args = self.paren_list(Self::term)?;
                    Term::app(n, tuple(args, Term::Unit, Term::pair))
                } else {
                    Term::Var(n)
                }
            }
            Tok::LParen => {
                let items = self.paren_list(Self::term)?;
                tuple(items, Term::Unit, Term::pair)
            }
            _ => return self.error(&["term"]),
        };
        while self.at(&Tok::Dot) {
            t = match self.peek_at(1) {
                Tok::Int(1) => Term::proj1(t),
                Tok::Int(2) => Term::proj2(t),
                _ => {
                    self.bump();
                    return self.error(&["`1`", "`2`"]);
                }
            };
            self.bump();
            self.bump();
        }
        Ok(t)
    }

    /// `( item, ... )`, possibly empty.
    fn paren_list<T>(&mut self, item: fn(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            if !self.eat(&Tok::Comma) {
                return self.error(&["`,`", "`)`"]);
            }
        }
    }

    fn comprehension(&mut self) -> PResult<Comprehension> {
        self.expect_kw("for")?;
        let mut bindings = Vec::new();
        loop {
            let v = self.ident("variable")?;
            self.expect(Tok::Colon)?;
            let t = self.ident("entity type name")?;
            bindings.push((v.text, t.text));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let mut where_clauses = Vec::new();
        if self.eat_kw("where") {
            loop {
                let l = self.term()?;
                self.expect(Tok::Eq)?;
                let r = self.term()?;
                where_clauses.push((l, r));
                if !self.eat_kw("and") {
                    break;
                }
            }
        }
        self.expect_kw("return")?;
        let ret = self.term()?;
        Ok(Comprehension {
            bindings,
            where_clauses,
            ret,
        })
    }

    fn nrc_expr(&mut self) -> PResult<NrcExpr> {
        if self.eat_kw("for") {
            let var = self.ident("variable")?;
            self.expect_kw("in")?;
            let source = self.nrc_union()?;
            self.expect_kw("return")?;
            let body = self.nrc_expr()?;
            return Ok(NrcExpr::for_in(var.text, source, body));
        }
        if self.eat_kw("if") {
            let c = self.nrc_expr()?;
            self.expect_kw("then")?;
            let t = self.nrc_expr()?;
            self.expect_kw("else")?;
            let e = self.nrc_expr()?;
            return Ok(NrcExpr::if_then_else(c, t, e));
        }
        self.nrc_union()
    }

    fn nrc_union(&mut self) -> PResult<NrcExpr> {
        let mut e = self.nrc_eq()?;
        while self.eat_kw("union") {
            e = NrcExpr::union(e, self.nrc_eq()?);
        }
        Ok(e)
    }

    fn nrc_eq(&mut self) -> PResult<NrcExpr> {
        let e = self.nrc_postfix()?;
        if self.eat(&Tok::Eq) {
            Ok(NrcExpr::eq(e, self.nrc_postfix()?))
        } else {
            Ok(e)
        }
    }

    fn nrc_postfix(&mut self) -> PResult<NrcExpr> {
        let mut e = self.nrc_atom()?;
        while self.at(&Tok::Dot) {
            e = match self.peek_at(1) {
                Tok::Int(1) => NrcExpr::proj1(e),
                Tok::Int(2) => NrcExpr::proj2(e),
                _ => {
                    self.bump();
                    return self.error(&["`1`", "`2`"]);
                }
            };
            self.bump();
            self.bump();
        }
        Ok(e)
    }

    fn nrc_atom(&mut self) -> PResult<NrcExpr> {
        Ok(match self.peek().clone() {
            Tok::Ident(n) => {
                self.bump();
                if self.at(&Tok::LParen) {
                    let args = self.paren_list(Self::nrc_expr)?;
                    NrcExpr::app(n, tuple(args, NrcExpr::Unit, NrcExpr::pair))
                } else {
                    NrcExpr::Var(n)
                }
            }
            Tok::LParen => {
                let items = self.paren_list(Self::nrc_expr)?;
                tuple(items, NrcExpr::Unit, NrcExpr::pair)
            }
            Tok::LBrace => {
                self.bump();
                let e = self.nrc_expr()?;
                self.expect(Tok::RBrace)?;
                NrcExpr::singleton(e)
            }
            Tok::Keyword("empty") => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let t = self.nrc_type()?;
                self.expect(Tok::RBracket)?;
                NrcExpr::Empty(t)
            }
            Tok::Keyword("true") => {
                self.bump();
                NrcExpr::True
            }
            Tok::Keyword("false") => {
                self.bump();
                NrcExpr::False
            }
            Tok::Int(n) => {
                self.bump();
                NrcExpr::int(n)
            }
            Tok::Str(s) => {
                self.bump();
                NrcExpr::str(s)
            }
            _ => return self.error(&["expression"]),
        })
    }

    fn instance(&mut self, start: Span) -> PResult<InstanceDecl> {
        let name = self.ident("instance name")?;
        self.expect(Tok::Colon)?;
        let schema = self.ident("schema name")?;
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut entries = Vec::new();
        while !self.eat(&Tok::RBrace) {
            entries.push(self.instance_entry()?);
            self.expect(Tok::Semi)?;
        }
        Ok(InstanceDecl {
            name,
            schema,
            entries,
            span: start.to(self.prev_span()),
        })
    }

    fn instance_entry(&mut self) -> PResult<InstanceEntry> {
        let name = match self.ident("entity or operation name") {
            Ok(n) => n,
            Err(_) => return self.error(&["entity or operation name", "`}`"]),
        };
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut items = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let row = self.row_path()?;
                let value = if self.eat(&Tok::Arrow) {
                    Some(self.literal()?)
                } else {
                    None
                };
                items.push(EntryItem {
                    span: row.span.to(self.prev_span()),
                    row,
                    value,
                });
                if self.eat(&Tok::RBrace) {
                    break;
                }
                if !self.eat(&Tok::Comma) {
                    return self.error(&["`,`", "`->`", "`}`"]);
                }
            }
        }
        Ok(InstanceEntry {
            span: name.span.to(self.prev_span()),
            name,
            items,
        })
    }

    fn literal(&mut self) -> PResult<Literal> {
        Ok(match self.peek().clone() {
            Tok::Ident(n) if self.peek_at(1) == &Tok::LParen => {
                self.bump();
                let args = self.paren_list(Self::literal)?;
                Literal::App(
                    n,
                    Box::new(tuple(args, Literal::Unit, |a, b| {
                        Literal::Pair(Box::new(a), Box::new(b))
                    })),
                )
            }
            Tok::Ident(_) | Tok::Keyword(_) => Literal::Row(self.row_path()?.text),
            Tok::Int(n) => {
                self.bump();
                Literal::Int(n)
            }
            Tok::Str(s) => {
                self.bump();
                Literal::Str(s)
            }
            Tok::Null(n) => {
                self.bump();
                Literal::Null(n)
            }
            Tok::LParen => {
                let items = self.paren_list(Self::literal)?;
                tuple(items, Literal::Unit, |a, b| Literal::Pair(Box::new(a), Box::new(b)))
            }
            _ => return self.error(&["value"]),
        })
    }

    fn mapping(&mut self, start: Span) -> PResult<MappingDecl> {
        let name = self.ident("mapping name")?;
        self.expect(Tok::Colon)?;
        let source = self.ident("schema name")?;
        self.expect(Tok::Arrow)?;
        let target = self.ident("schema name")?;
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut types = Vec::new();
        let mut ops = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let from = match self.ident("type or operation name") {
                Ok(n) => n,
                Err(_) => return self.error(&["type or operation name", "`}`"]),
            };
            self.expect(Tok::Arrow)?;
            if self.eat(&Tok::LParen) {
                let var = self.ident("variable")?;
                self.expect(Tok::FatArrow)?;
                let body = self.term()?;
                self.expect(Tok::RParen)?;
                ops.push(OpImageDecl {
                    span: from.span.to(self.prev_span()),
                    op: from,
                    var,
                    body,
                });
            } else {
                let to = self.ident("entity type name or `(`")?;
                types.push((from, to));
            }
            self.expect(Tok::Semi)?;
        }
        Ok(MappingDecl {
            name,
            source,
            target,
            types,
            ops,
            span: start.to(self.prev_span()),
        })
    }
}

/// Right-nested pairs: `()`, `a`, `(a, (b, c))`.
fn tuple<T>(mut items: Vec<T>, unit: T, pair: fn(T, T) -> T) -> T {
    let Some(mut acc) = items.pop() else {
        return unit;
    };
    while let Some(x) = items.pop() {
        acc = pair(x, acc);
    }
    acc
}

fn parser_for(text: &str) -> PResult<Parser> {
    let toks = tokenize(text).map_err(|e| ParseError::Lexical {
        span: e.span,
        message: e.message,
    })?;
    Ok(Parser { toks, pos: 0 })
}

fn whole<T>(text: &str, f: fn(&mut Parser) -> PResult<T>) -> PResult<T> {
    let mut p = parser_for(text)?;
    let out = f(&mut p)?;
    if !p.at(&Tok::Eof) {
        return p.error(&["end of input"]);
    }
    Ok(out)
}

/// Parses a source unit and resolves its references. Reports the first
/// error of each declaration.
pub fn parse(text: &str) -> Result<SourceUnit, Vec<ParseError>> {
    let mut p = parser_for(text).map_err(|e| vec![e])?;
    let (unit, mut errors) = p.unit();
    errors.extend(resolve(&unit));
    if errors.is_empty() {
        Ok(unit)
    } else {
        errors.sort_by_key(|e| e.span().start);
        Err(errors)
    }
}

pub fn parse_term(text: &str) -> PResult<Term> {
    whole(text, Parser::term)
}

pub fn parse_type(text: &str) -> PResult<TypeExpr> {
    whole(text, Parser::ttp_type)
}

pub fn parse_nrc(text: &str) -> PResult<NrcExpr> {
    whole(text, Parser::nrc_expr)
}

pub fn parse_nrc_type(text: &str) -> PResult<NrcType> {
    whole(text, Parser::nrc_type)
}

pub fn parse_query(text: &str) -> PResult<Comprehension> {
    whole(text, Parser::comprehension)
}

/// Names are unique per namespace and every reference points to an
/// earlier declaration.
pub fn resolve(unit: &SourceUnit) -> Vec<ParseError> {
    let mut seen: BTreeMap<(Namespace, &str), ()> = BTreeMap::new();
    let mut errors = Vec::new();
    let need = |seen: &BTreeMap<(Namespace, &str), ()>, ns: Namespace, n: &Name, errors: &mut Vec<ParseError>| {
        if !seen.contains_key(&(ns, n.text.as_str())) {
            errors.push(ParseError::Resolution {
                span: n.span,
                name: n.text.clone(),
                namespace: ns,
            });
        }
    };
    for d in &unit.decls {
        match d {
            Decl::Schema(_) => {}
            Decl::Instance(i) => need(&seen, Namespace::Schema, &i.schema, &mut errors),
            Decl::Mapping(m) => {
                need(&seen, Namespace::Schema, &m.source, &mut errors);
                need(&seen, Namespace::Schema, &m.target, &mut errors);
            }
            Decl::Query(q) => need(&seen, Namespace::Schema, &q.schema, &mut errors),
            Decl::Nrc(n) => {
                if let Some(s) = &n.schema {
                    need(&seen, Namespace::Schema, s, &mut errors);
                }
            }
            Decl::Migrate(m) => {
                need(&seen, Namespace::Mapping, &m.mapping, &mut errors);
                need(&seen, Namespace::Instance, &m.instance, &mut errors);
            }
        }
        let name = d.name();
        if seen.insert((d.namespace(), name.text.as_str()), ()).is_some() {
            errors.push(ParseError::Duplicate {
                span: name.span,
                name: name.text.clone(),
                namespace: d.namespace(),
            });
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schema() {
        let u = parse("schema S = { }").unwrap();
        let Decl::Schema(s) = &u.decls[0] else { panic!() };
        assert_eq!(s.name.text, "S");
        assert!(s.entities.is_empty() && s.operations.is_empty() && s.equations.is_empty());
    }

    #[test]
    fn tuples_nest_to_the_right() {
        assert_eq!(
            parse_term("f(a, b, c)").unwrap(),
            Term::app(
                "f",
                Term::pair(Term::var("a"), Term::pair(Term::var("b"), Term::var("c")))
            )
        );
        assert_eq!(parse_term("(x)").unwrap(), Term::var("x"));
        assert_eq!(parse_term("x.1.2").unwrap(), Term::proj2(Term::proj1(Term::var("x"))));
        assert_eq!(parse_term("g()").unwrap(), Term::app("g", Term::Unit));
    }

    #[test]
    fn types_associate_right() {
        assert_eq!(
            parse_type("A * B * 1").unwrap(),
            TypeExpr::prod(TypeExpr::base("A"), TypeExpr::prod(TypeExpr::base("B"), TypeExpr::Unit))
        );
        assert_eq!(
            parse_nrc_type("Set A * Bool").unwrap(),
            NrcType::prod(NrcType::set(NrcType::base("A")), NrcType::Bool)
        );
    }

    #[test]
    fn nrc_forms() {
        let e = parse_nrc("for x in r union s return if x.1 = x.2 then {x} else empty[A * A]").unwrap();
        let NrcExpr::For { source, body, .. } = e else { panic!() };
        assert!(matches!(*source, NrcExpr::Union(..)));
        assert!(matches!(*body, NrcExpr::If(..)));
        assert_eq!(parse_nrc("a union b union c").unwrap().to_string(), "a union b union c");
    }

    #[test]
    fn syntax_errors_carry_locations_and_expectations() {
        let errs = parse("schema S = {\n  entities A\n}").unwrap_err();
        let ParseError::Syntax { span, expected, .. } = &errs[0] else {
            panic!("{:?}", errs)
        };
        assert_eq!((span.line, span.col), (3, 1));
        assert!(expected.iter().any(|e| e.contains(',')));
    }

    #[test]
    fn one_error_per_declaration() {
        let errs = parse("schema S = { entities ; }\nschema T = { attributes ; }\nschema U = { }").unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[1].span().line, 2);
    }

    #[test]
    fn references_must_be_earlier() {
        let errs = parse("instance I : S = { }\nschema S = { }").unwrap_err();
        assert!(matches!(&errs[0], ParseError::Resolution { name, .. } if name == "S"));
        let errs = parse("schema S = { }\nschema S = { }").unwrap_err();
        assert!(matches!(&errs[0], ParseError::Duplicate { .. }));
        // one name may be used in different namespaces
        assert!(parse("schema S = { }\ninstance S : S = { }").is_ok());
    }

    #[test]
    fn instance_rows_and_literals() {
        let u = parse(
            r#"schema S = { } instance I : S = { A = { a1, a.b }; f = { a1 -> reverse(?1), a.b -> (1, "x") }; }"#,
        )
        .unwrap();
        let Decl::Instance(i) = &u.decls[1] else { panic!() };
        assert_eq!(i.entries[0].items[1].row.text, "a.b");
        assert_eq!(
            i.entries[1].items[0].value,
            Some(Literal::App("reverse".into(), Box::new(Literal::Null(1))))
        );
    }
}
