//! Nested key-value query language.
//!
//! ```text
//! query      := '(' verb designator range? ')'
//! designator := '(' article noun pair* ')'
//! pair       := '(' key (symbol | designator) ')'
//! range      := '(' 'between' number number ')'
//! ```
//!
//! Only the `detect` verb exists. The article and noun are kept for printing
//! but carry no meaning. Keys are normalized to lowercase; symbols compare
//! case-insensitively.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::BeliefObject;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Unbalanced,
    Unexpected { found: String, expected: &'static str },
    UnknownVerb(String),
    UnknownKey(String),
    EmptyDesignator,
    BadRange(String),
    TrailingInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unbalanced => write!(f, "unbalanced parentheses"),
            Self::Unexpected { found, expected } => {
                write!(f, "expected {expected}, found {found}")
            }
            Self::UnknownVerb(v) => write!(f, "unknown verb `{v}`"),
            Self::UnknownKey(k) => write!(f, "unknown key `{k}`"),
            Self::EmptyDesignator => write!(f, "designator has no constraints"),
            Self::BadRange(r) => write!(f, "invalid time range: {r}"),
            Self::TrailingInput => write!(f, "trailing input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Detect,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Detect => "detect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Symbol(String),
    Nested(Designator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Designator {
    pub article: String,
    pub noun: String,
    pub pairs: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub verb: Verb,
    pub designator: Designator,
    /// Restricts matching to object occurrences inside `[from, to]`.
    pub range: Option<(f64, f64)>,
    pub received_at: f64,
}

impl Query {
    pub fn at(mut self, timestamp: f64) -> Self {
        self.received_at = timestamp;
        self
    }

    /// Top-level keys, in query order without duplicates.
    pub fn keys(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (k, _) in &self.designator.pairs {
            if !out.contains(&k.as_str()) {
                out.push(k);
            }
        }
        out
    }
}

pub fn default_keys() -> BTreeSet<String> {
    ["shape", "color", "class", "location", "size", "material"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Vec<(usize, Token)> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '(' => {
                out.push((i, Token::Open));
                chars.next();
            }
            ')' => {
                out.push((i, Token::Close));
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let start = i;
                let mut end = i;
                while let Some(&(j, c)) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    end = j + c.len_utf8();
                    chars.next();
                }
                out.push((start, Token::Atom(text[start..end].to_string())));
            }
        }
    }
    out
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    keys: &'a BTreeSet<String>,
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        match self.tokens.get(self.pos) {
            Some((_, t)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(self.err(ParseErrorKind::Unbalanced)),
        }
    }

    fn expect_open(&mut self, expected: &'static str) -> Result<(), ParseError> {
        let offset = self.offset();
        match self.next()? {
            Token::Open => Ok(()),
            t => Err(ParseError {
                offset,
                kind: ParseErrorKind::Unexpected {
                    found: describe(&t),
                    expected,
                },
            }),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        let offset = self.offset();
        match self.next()? {
            Token::Close => Ok(()),
            t => Err(ParseError {
                offset,
                kind: ParseErrorKind::Unexpected {
                    found: describe(&t),
                    expected: "`)`",
                },
            }),
        }
    }

    fn atom(&mut self, expected: &'static str) -> Result<(usize, String), ParseError> {
        let offset = self.offset();
        match self.next()? {
            Token::Atom(a) => Ok((offset, a)),
            t => Err(ParseError {
                offset,
                kind: ParseErrorKind::Unexpected {
                    found: describe(&t),
                    expected,
                },
            }),
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        self.expect_open("`(`")?;
        let (offset, verb) = self.atom("verb")?;
        let verb = match verb.to_ascii_lowercase().as_str() {
            "detect" => Verb::Detect,
            _ => {
                return Err(ParseError {
                    offset,
                    kind: ParseErrorKind::UnknownVerb(verb),
                })
            }
        };
        let designator_at = self.offset();
        let designator = self.designator()?;
        if designator.pairs.is_empty() {
            return Err(ParseError {
                offset: designator_at,
                kind: ParseErrorKind::EmptyDesignator,
            });
        }
        let range = if self.peek() == Some(&Token::Open) {
            Some(self.range()?)
        } else {
            None
        };
        self.expect_close()?;
        Ok(Query {
            verb,
            designator,
            range,
            received_at: 0.0,
        })
    }

    fn range(&mut self) -> Result<(f64, f64), ParseError> {
        self.expect_open("`(`")?;
        let (offset, word) = self.atom("`between`")?;
        if !word.eq_ignore_ascii_case("between") {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::Unexpected {
                    found: format!("`{word}`"),
                    expected: "`between`",
                },
            });
        }
        let bound = |p: &mut Self| -> Result<f64, ParseError> {
            let (offset, a) = p.atom("number")?;
            match a.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(ParseError {
                    offset,
                    kind: ParseErrorKind::BadRange(a),
                }),
            }
        };
        let from = bound(self)?;
        let to = bound(self)?;
        if from > to {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::BadRange(format!("{from} > {to}")),
            });
        }
        self.expect_close()?;
        Ok((from, to))
    }

    fn designator(&mut self) -> Result<Designator, ParseError> {
        self.expect_open("designator")?;
        let (_, article) = self.atom("article")?;
        let (_, noun) = self.atom("noun")?;
        let mut pairs = Vec::new();
        while self.peek() == Some(&Token::Open) {
            self.pos += 1;
            let (offset, key) = self.atom("key")?;
            let key = key.to_ascii_lowercase();
            if !self.keys.contains(&key) {
                return Err(ParseError {
                    offset,
                    kind: ParseErrorKind::UnknownKey(key),
                });
            }
            let value = match self.peek() {
                Some(Token::Open) => Value::Nested(self.designator()?),
                Some(Token::Atom(_)) => Value::Symbol(self.atom("symbol")?.1),
                Some(Token::Close) => {
                    return Err(self.err(ParseErrorKind::Unexpected {
                        found: "`)`".into(),
                        expected: "value",
                    }))
                }
                None => return Err(self.err(ParseErrorKind::Unbalanced)),
            };
            self.expect_close()?;
            pairs.push((key, value));
        }
        self.expect_close()?;
        Ok(Designator {
            article,
            noun,
            pairs,
        })
    }
}

fn describe(t: &Token) -> String {
    match t {
        Token::Open => "`(`".into(),
        Token::Close => "`)`".into(),
        Token::Atom(a) => format!("`{a}`"),
    }
}

pub fn parse(text: &str) -> Result<Query, ParseError> {
    parse_with_keys(text, &default_keys())
}

pub fn parse_with_keys(text: &str, keys: &BTreeSet<String>) -> Result<Query, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
        end: text.len(),
        keys,
    };
    let q = p.query()?;
    if p.pos < p.tokens.len() {
        return Err(p.err(ParseErrorKind::TrailingInput));
    }
    Ok(q)
}

impl fmt::Display for Designator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}", self.article, self.noun)?;
        for (k, v) in &self.pairs {
            match v {
                Value::Symbol(s) => write!(f, " ({k} {s})")?,
                Value::Nested(d) => write!(f, " ({k} {d})")?,
            }
        }
        write!(f, ")")
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}", self.verb.as_str(), self.designator)?;
        if let Some((from, to)) = self.range {
            write!(f, " (between {from:?} {to:?})")?;
        }
        write!(f, ")")
    }
}

/// Canonical text form; `parse(&print(q))` reproduces `q` up to `received_at`.
pub fn print(query: &Query) -> String {
    query.to_string()
}

/// Aggregated symbol lookup for one object at one time.
pub trait SymbolView {
    fn symbol(&self, obj: &BeliefObject, key: &str, at: f64) -> Option<String>;
}

/// True when every top-level constraint equals the object's aggregated
/// symbol for that key. A nested designator matches on its noun.
pub fn matches(query: &Query, obj: &BeliefObject, at: f64, view: &dyn SymbolView) -> bool {
    query.designator.pairs.iter().all(|(key, value)| {
        let Some(have) = view.symbol(obj, key, at) else {
            return false;
        };
        let want = match value {
            Value::Symbol(s) => s,
            Value::Nested(d) => &d.noun,
        };
        have.eq_ignore_ascii_case(want)
    })
}
