use std::fmt;

/// Byte range into the source plus the 1-based line and column of its start.
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

/// Spans never take part in structural equality of syntax trees.
impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span { end: other.end, ..self }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Keyword(&'static str),
    Int(i64),
    Str(String),
    /// `?n`
    Null(u32),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Eq,
    Arrow,
    FatArrow,
    Star,
    Eof,
}

pub const KEYWORDS: &[&str] = &[
    "schema",
    "instance",
    "mapping",
    "query",
    "nrc",
    "migrate",
    "entities",
    "attributes",
    "operations",
    "equations",
    "forall",
    "for",
    "in",
    "return",
    "where",
    "and",
    "if",
    "then",
    "else",
    "true",
    "false",
    "empty",
    "union",
    "delta",
    "sigma",
    "pi",
    "Set",
    "Bool",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{}`", s),
            Tok::Keyword(k) => write!(f, "`{}`", k),
            Tok::Int(n) => write!(f, "integer {}", n),
            Tok::Str(s) => write!(f, "string {:?}", s),
            Tok::Null(n) => write!(f, "`?{}`", n),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::FatArrow => f.write_str("`=>`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
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

    fn here(&self) -> Span {
        Span {
            start: self.pos,
            end: self.pos,
            line: self.line,
            col: self.col,
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut c = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(ch) = c.peek() {
            if ch.is_whitespace() {
                c.bump();
            } else if ch == '-' && c.peek2() == Some('-') {
                while c.peek().is_some_and(|ch| ch != '\n') {
                    c.bump();
                }
            } else {
                break;
            }
        }
        let start = c.here();
        let err = |span: Span, message: String| LexError { span, message };
        let Some(ch) = c.bump() else {
            out.push(Token {
                tok: Tok::Eof,
                span: start,
            });
            return Ok(out);
        };
        let tok = match ch {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            '*' => Tok::Star,
            '=' if c.peek() == Some('>') => {
                c.bump();
                Tok::FatArrow
            }
            '=' => Tok::Eq,
            '-' if c.peek() == Some('>') => {
                c.bump();
                Tok::Arrow
            }
            '-' if c.peek().is_some_and(|d| d.is_ascii_digit()) => {
                let digits = take_while(&mut c, |d| d.is_ascii_digit());
                let text = format!("-{}", digits);
                Tok::Int(
                    text.parse()
                        .map_err(|_| err(start, format!("integer literal {} out of range", text)))?,
                )
            }
            '?' => {
                let digits = take_while(&mut c, |d| d.is_ascii_digit());
                if digits.is_empty() {
                    return Err(err(start, "expected digits after `?`".into()));
                }
                Tok::Null(
                    digits
                        .parse()
                        .map_err(|_| err(start, format!("null label ?{} out of range", digits)))?,
                )
            }
            '"' => Tok::Str(string_body(&mut c).map_err(|m| err(start, m))?),
            d if d.is_ascii_digit() => {
                let text = format!("{}{}", d, take_while(&mut c, |d| d.is_ascii_digit()));
                Tok::Int(
                    text.parse()
                        .map_err(|_| err(start, format!("integer literal {} out of range", text)))?,
                )
            }
            a if a.is_ascii_alphabetic() => {
                let text = format!("{}{}", a, take_while(&mut c, |d| d.is_ascii_alphanumeric() || d == '_'));
                match KEYWORDS.iter().find(|k| **k == text) {
                    Some(k) => Tok::Keyword(k),
                    None => Tok::Ident(text),
                }
            }
            other => return Err(err(start, format!("unexpected character {:?}", other))),
        };
        out.push(Token {
            tok,
            span: Span { end: c.pos, ..start },
        });
    }
}

fn take_while(c: &mut Cursor<'_>, pred: impl Fn(char) -> bool) -> String {
    let mut s = String::new();
    while let Some(ch) = c.peek().filter(|ch| pred(*ch)) {
        s.push(ch);
        c.bump();
    }
    s
}

fn string_body(c: &mut Cursor<'_>) -> Result<String, String> {
    let mut s = String::new();
    loop {
        match c.bump() {
            None => return Err("unterminated string literal".into()),
            Some('"') => return Ok(s),
            Some('\\') => match c.bump() {
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some('r') => s.push('\r'),
                Some('0') => s.push('\0'),
                Some('\\') => s.push('\\'),
                Some('"') => s.push('"'),
                Some('u') => {
                    if c.bump() != Some('{') {
                        return Err("expected `{` after `\\u`".into());
                    }
                    let hex = take_while(c, |d| d.is_ascii_hexdigit());
                    if c.bump() != Some('}') {
                        return Err("unterminated unicode escape".into());
                    }
                    let ch = u32::from_str_radix(&hex, 16)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or_else(|| format!("invalid unicode escape `\\u{{{}}}`", hex))?;
                    s.push(ch);
                }
                Some(other) => return Err(format!("unknown escape `\\{}`", other)),
                None => return Err("unterminated string literal".into()),
            },
            Some(ch) => s.push(ch),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrows_comments_and_negatives() {
        assert_eq!(
            toks("f -> -3 -- trailing\n=> ?12"),
            vec![
                Tok::Ident("f".into()),
                Tok::Arrow,
                Tok::Int(-3),
                Tok::FatArrow,
                Tok::Null(12),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn keywords_are_reserved() {
        assert_eq!(
            toks("for fore"),
            vec![Tok::Keyword("for"), Tok::Ident("fore".into()), Tok::Eof]
        );
    }

    #[test]
    fn string_escapes() {
        assert_eq!(toks(r#""a\"b\n\u{e9}""#)[0], Tok::Str("a\"b\né".into()));
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  bc").unwrap();
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
        let e = tokenize("a\n @").unwrap_err();
        assert_eq!((e.span.line, e.span.col), (2, 2));
    }
}
