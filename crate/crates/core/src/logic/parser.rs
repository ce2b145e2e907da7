//! Recursive-descent parser for the concrete formula syntax.
//!
//! Grammar (precedence loosest to tightest: `U`, `|`, `&`, prefix
//! operators, atoms):
//!
//! ```text
//! spatel := or ("U" "[" num "," num ")" or)*
//! or     := and ("|" and)*
//! and    := prefix ("&" prefix)*
//! prefix := "!" prefix
//!         | ("F" | "G") "[" num "," num ")" prefix
//!         | ("A" | "E") labels "O" prefix
//!         | ("A" | "E") labels "(" spatel "U" "[" int "]" spatel ")"
//!         | atom
//! atom   := "true" | "mu" (">=" | "<=" | "==") num | "(" spatel ")" | name
//! labels := "[" ("L" | label ("," label)*) "]"
//! ```
//!
//! `mu == c` desugars to `mu >= c & mu <= c`. Names refer to formulas and
//! numeric constants bound in a [`FormulaEnv`]. The same surface syntax
//! covers both logic layers; the parse is stratified afterwards, with
//! spatial operators over temporal sub-formulas rejected.

use std::collections::HashMap;

use thiserror::Error;

use crate::grid::{LabelSet, QuadLabel};
use crate::logic::{Interval, PredOp, SpatelFormula, TsslFormula};

#[derive(Debug, Clone, Error, PartialEq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Named sub-formulas and threshold constants available while parsing.
#[derive(Debug, Clone, Default)]
pub struct FormulaEnv {
    constants: HashMap<String, f64>,
    definitions: HashMap<String, Ast>,
}

impl FormulaEnv {
    pub fn new() -> FormulaEnv {
        FormulaEnv::default()
    }

    pub fn set_constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    /// Binds `name` to a sub-formula, parsed against the bindings made so
    /// far (definitions may reference earlier definitions).
    pub fn define(&mut self, name: &str, text: &str) -> Result<(), ParseError> {
        let ast = parse_ast(text, self)?;
        self.definitions.insert(name.to_string(), ast);
        Ok(())
    }
}

/// Parses a formula with no named bindings.
pub fn parse(text: &str) -> Result<SpatelFormula, ParseError> {
    parse_with(text, &FormulaEnv::new())
}

/// Parses a formula, resolving names through `env`.
pub fn parse_with(text: &str, env: &FormulaEnv) -> Result<SpatelFormula, ParseError> {
    let ast = parse_ast(text, env)?;
    stratify(&ast)
}

fn parse_ast(text: &str, env: &FormulaEnv) -> Result<Ast, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        env,
    };
    let ast = p.parse_until()?;
    if p.pos < p.tokens.len() {
        let t = &p.tokens[p.pos];
        return Err(err(t.line, t.col, format!("unexpected `{}`", t.kind)));
    }
    Ok(ast)
}

// Unified pre-stratification AST covering both logic layers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Ast {
    True,
    Pred { op: PredOp, threshold: f64 },
    Not(Box<Ast>),
    And(Vec<Ast>),
    Or(Vec<Ast>),
    ExistsNext { labels: LabelSet, inner: Box<Ast> },
    ForallNext { labels: LabelSet, inner: Box<Ast> },
    SpatialUntil { exists: bool, labels: LabelSet, kappa: usize, lhs: Box<Ast>, rhs: Box<Ast> },
    Eventually { interval: Interval, inner: Box<Ast> },
    Always { interval: Interval, inner: Box<Ast> },
    Until { interval: Interval, lhs: Box<Ast>, rhs: Box<Ast> },
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Amp,
    Pipe,
    Bang,
    Ge,
    Le,
    EqEq,
}

impl std::fmt::Display for TokenKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::Number(n) => write!(f, "{n}"),
            TokenKind::LParen => write!(f, "("),
            TokenKind::RParen => write!(f, ")"),
            TokenKind::LBracket => write!(f, "["),
            TokenKind::RBracket => write!(f, "]"),
            TokenKind::Comma => write!(f, ","),
            TokenKind::Amp => write!(f, "&"),
            TokenKind::Pipe => write!(f, "|"),
            TokenKind::Bang => write!(f, "!"),
            TokenKind::Ge => write!(f, ">="),
            TokenKind::Le => write!(f, "<="),
            TokenKind::EqEq => write!(f, "=="),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
                continue;
            }
            '(' | ')' | '[' | ']' | ',' | '&' | '|' | '!' => {
                bump(&mut chars);
                let kind = match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    '&' => TokenKind::Amp,
                    '|' => TokenKind::Pipe,
                    _ => TokenKind::Bang,
                };
                tokens.push(Token { kind, line: tl, col: tc });
            }
            '>' | '<' | '=' => {
                bump(&mut chars);
                if chars.peek() != Some(&'=') {
                    return Err(err(tl, tc, format!("expected `{c}=`")));
                }
                bump(&mut chars);
                let kind = match c {
                    '>' => TokenKind::Ge,
                    '<' => TokenKind::Le,
                    _ => TokenKind::EqEq,
                };
                tokens.push(Token { kind, line: tl, col: tc });
            }
            '-' | '0'..='9' => {
                let mut s = String::new();
                s.push(bump(&mut chars));
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        s.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                let n: f64 = s
                    .parse()
                    .map_err(|_| err(tl, tc, format!("bad number `{s}`")))?;
                tokens.push(Token {
                    kind: TokenKind::Number(n),
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                s.push(bump(&mut chars));
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(s),
                    line: tl,
                    col: tc,
                });
            }
            c => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    env: &'a FormulaEnv,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        let (l, c) = self.here();
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(err(t.line, t.col, format!("expected `{kind}`, found `{}`", t.kind))),
            None => Err(err(l, c, format!("expected `{kind}`, found end of input"))),
        }
    }

    fn peek_is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(s)) if s == name)
    }

    /// True when the upcoming `U` carries a temporal interval
    /// (`U[t1,t2)`) rather than a spatial depth (`U[k]`).
    fn peek_temporal_until(&self) -> bool {
        self.peek_is_ident("U")
            && matches!(
                self.tokens.get(self.pos + 1).map(|t| &t.kind),
                Some(TokenKind::LBracket)
            )
            && matches!(
                self.tokens.get(self.pos + 3).map(|t| &t.kind),
                Some(TokenKind::Comma)
            )
    }

    fn parse_until(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.parse_or()?;
        while self.peek_temporal_until() {
            self.next();
            let interval = self.parse_interval()?;
            let rhs = self.parse_or()?;
            lhs = Ast::Until {
                interval,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> Result<Ast, ParseError> {
        let mut parts = vec![self.parse_and()?];
        while self.peek() == Some(&TokenKind::Pipe) {
            self.next();
            parts.push(self.parse_and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Ast::Or(parts)
        })
    }

    fn parse_and(&mut self) -> Result<Ast, ParseError> {
        let mut parts = vec![self.parse_prefix()?];
        while self.peek() == Some(&TokenKind::Amp) {
            self.next();
            parts.push(self.parse_prefix()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Ast::And(parts)
        })
    }

    fn parse_prefix(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            Some(TokenKind::Bang) => {
                self.next();
                Ok(Ast::Not(Box::new(self.parse_prefix()?)))
            }
            Some(TokenKind::Ident(s)) if s == "F" || s == "G" => {
                let eventually = s == "F";
                self.next();
                let interval = self.parse_interval()?;
                let inner = Box::new(self.parse_prefix()?);
                Ok(if eventually {
                    Ast::Eventually { interval, inner }
                } else {
                    Ast::Always { interval, inner }
                })
            }
            Some(TokenKind::Ident(s)) if s == "A" || s == "E" => {
                let exists = s == "E";
                self.next();
                let labels = self.parse_labels()?;
                if self.peek_is_ident("O") {
                    self.next();
                    let inner = Box::new(self.parse_prefix()?);
                    Ok(if exists {
                        Ast::ExistsNext { labels, inner }
                    } else {
                        Ast::ForallNext { labels, inner }
                    })
                } else {
                    // A[B] ( lhs U[kappa] rhs )
                    self.expect(TokenKind::LParen)?;
                    let lhs = self.parse_until()?;
                    let (l, c) = self.here();
                    if !self.peek_is_ident("U") {
                        return Err(err(l, c, "expected `U[<depth>]` in spatial until"));
                    }
                    self.next();
                    self.expect(TokenKind::LBracket)?;
                    let (l, c) = self.here();
                    let kappa = match self.next().map(|t| t.kind) {
                        Some(TokenKind::Number(n)) if n.fract() == 0.0 && n >= 1.0 => n as usize,
                        _ => return Err(err(l, c, "spatial until depth must be an integer >= 1")),
                    };
                    self.expect(TokenKind::RBracket)?;
                    let rhs = self.parse_until()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(Ast::SpatialUntil {
                        exists,
                        labels,
                        kappa,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    })
                }
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_atom(&mut self) -> Result<Ast, ParseError> {
        let (l, c) = self.here();
        match self.next().map(|t| t.kind) {
            Some(TokenKind::LParen) => {
                let inner = self.parse_until()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            Some(TokenKind::Ident(s)) if s == "true" => Ok(Ast::True),
            Some(TokenKind::Ident(s)) if s == "mu" => {
                let (ol, oc) = self.here();
                let op = match self.next().map(|t| t.kind) {
                    Some(TokenKind::Ge) => Some(PredOp::Ge),
                    Some(TokenKind::Le) => Some(PredOp::Le),
                    Some(TokenKind::EqEq) => None,
                    _ => return Err(err(ol, oc, "expected `>=`, `<=` or `==` after `mu`")),
                };
                let threshold = self.parse_threshold()?;
                Ok(match op {
                    Some(op) => Ast::Pred { op, threshold },
                    // mu == c is the conjunction of the two one-sided predicates.
                    None => Ast::And(vec![
                        Ast::Pred {
                            op: PredOp::Ge,
                            threshold,
                        },
                        Ast::Pred {
                            op: PredOp::Le,
                            threshold,
                        },
                    ]),
                })
            }
            Some(TokenKind::Ident(name)) => match self.env.definitions.get(&name) {
                Some(ast) => Ok(ast.clone()),
                None => Err(err(l, c, format!("unknown identifier `{name}`"))),
            },
            Some(k) => Err(err(l, c, format!("unexpected `{k}`"))),
            None => Err(err(l, c, "unexpected end of input")),
        }
    }

    fn parse_threshold(&mut self) -> Result<f64, ParseError> {
        let (l, c) = self.here();
        match self.next().map(|t| t.kind) {
            Some(TokenKind::Number(n)) => Ok(n),
            Some(TokenKind::Ident(name)) => self
                .env
                .constants
                .get(&name)
                .copied()
                .ok_or_else(|| err(l, c, format!("unknown constant `{name}`"))),
            _ => Err(err(l, c, "expected a threshold number or constant name")),
        }
    }

    fn parse_interval(&mut self) -> Result<Interval, ParseError> {
        let (l, c) = self.here();
        self.expect(TokenKind::LBracket)?;
        let start = self.parse_number()?;
        self.expect(TokenKind::Comma)?;
        let end = self.parse_number()?;
        // Intervals are half-open; the closing `)` doubles as the marker.
        self.expect(TokenKind::RParen)?;
        if !(start < end) || start < 0.0 {
            return Err(err(
                l,
                c,
                format!("malformed interval [{start},{end}): need 0 <= t1 < t2"),
            ));
        }
        Ok(Interval { start, end })
    }

    fn parse_number(&mut self) -> Result<f64, ParseError> {
        let (l, c) = self.here();
        match self.next().map(|t| t.kind) {
            Some(TokenKind::Number(n)) => Ok(n),
            Some(TokenKind::Ident(name)) => self
                .env
                .constants
                .get(&name)
                .copied()
                .ok_or_else(|| err(l, c, format!("unknown constant `{name}`"))),
            _ => Err(err(l, c, "expected a number")),
        }
    }

    fn parse_labels(&mut self) -> Result<LabelSet, ParseError> {
        self.expect(TokenKind::LBracket)?;
        if self.peek_is_ident("L") {
            self.next();
            self.expect(TokenKind::RBracket)?;
            return Ok(LabelSet::ALL);
        }
        let mut labels = Vec::new();
        loop {
            let (l, c) = self.here();
            match self.next().map(|t| t.kind) {
                Some(TokenKind::Ident(s)) => {
                    let label = match s.as_str() {
                        "NW" => QuadLabel::Nw,
                        "NE" => QuadLabel::Ne,
                        "SW" => QuadLabel::Sw,
                        "SE" => QuadLabel::Se,
                        _ => return Err(err(l, c, format!("unknown label `{s}`"))),
                    };
                    labels.push(label);
                }
                _ => return Err(err(l, c, "expected a quadrant label")),
            }
            match self.next().map(|t| t.kind) {
                Some(TokenKind::Comma) => continue,
                Some(TokenKind::RBracket) => break,
                _ => {
                    let (l, c) = self.here();
                    return Err(err(l, c, "expected `,` or `]` in label set"));
                }
            }
        }
        Ok(LabelSet::new(&labels))
    }
}

// -- stratification -------------------------------------------------------

fn is_temporal(ast: &Ast) -> bool {
    match ast {
        Ast::True | Ast::Pred { .. } => false,
        Ast::Not(inner) => is_temporal(inner),
        Ast::And(parts) | Ast::Or(parts) => parts.iter().any(is_temporal),
        Ast::ExistsNext { inner, .. } | Ast::ForallNext { inner, .. } => is_temporal(inner),
        Ast::SpatialUntil { lhs, rhs, .. } => is_temporal(lhs) || is_temporal(rhs),
        Ast::Eventually { .. } | Ast::Always { .. } | Ast::Until { .. } => true,
    }
}

fn stratify(ast: &Ast) -> Result<SpatelFormula, ParseError> {
    if !is_temporal(ast) {
        return Ok(SpatelFormula::Tssl(to_tssl(ast)?));
    }
    match ast {
        Ast::Not(inner) => Ok(SpatelFormula::Not(Box::new(stratify(inner)?))),
        Ast::And(parts) => Ok(SpatelFormula::And(
            parts.iter().map(stratify).collect::<Result<_, _>>()?,
        )),
        Ast::Or(parts) => Ok(SpatelFormula::Or(
            parts.iter().map(stratify).collect::<Result<_, _>>()?,
        )),
        Ast::Eventually { interval, inner } => Ok(SpatelFormula::Eventually {
            interval: *interval,
            inner: Box::new(stratify(inner)?),
        }),
        Ast::Always { interval, inner } => Ok(SpatelFormula::Always {
            interval: *interval,
            inner: Box::new(stratify(inner)?),
        }),
        Ast::Until { interval, lhs, rhs } => Ok(SpatelFormula::Until {
            interval: *interval,
            lhs: Box::new(stratify(lhs)?),
            rhs: Box::new(stratify(rhs)?),
        }),
        Ast::ExistsNext { .. } | Ast::ForallNext { .. } | Ast::SpatialUntil { .. } => Err(err(
            1,
            1,
            "temporal operator nested under a spatial operator",
        )),
        Ast::True | Ast::Pred { .. } => unreachable!("non-temporal atoms handled above"),
    }
}

fn to_tssl(ast: &Ast) -> Result<TsslFormula, ParseError> {
    match ast {
        Ast::True => Ok(TsslFormula::True),
        Ast::Pred { op, threshold } => Ok(TsslFormula::Pred {
            op: *op,
            threshold: *threshold,
        }),
        Ast::Not(inner) => Ok(TsslFormula::Not(Box::new(to_tssl(inner)?))),
        Ast::And(parts) => Ok(TsslFormula::And(
            parts.iter().map(to_tssl).collect::<Result<_, _>>()?,
        )),
        Ast::Or(parts) => Ok(TsslFormula::Or(
            parts.iter().map(to_tssl).collect::<Result<_, _>>()?,
        )),
        Ast::ExistsNext { labels, inner } => Ok(TsslFormula::ExistsNext {
            labels: *labels,
            inner: Box::new(to_tssl(inner)?),
        }),
        Ast::ForallNext { labels, inner } => Ok(TsslFormula::ForallNext {
            labels: *labels,
            inner: Box::new(to_tssl(inner)?),
        }),
        Ast::SpatialUntil {
            exists,
            labels,
            kappa,
            lhs,
            rhs,
        } => {
            let lhs = Box::new(to_tssl(lhs)?);
            let rhs = Box::new(to_tssl(rhs)?);
            Ok(if *exists {
                TsslFormula::ExistsUntil {
                    labels: *labels,
                    kappa: *kappa,
                    lhs,
                    rhs,
                }
            } else {
                TsslFormula::ForallUntil {
                    labels: *labels,
                    kappa: *kappa,
                    lhs,
                    rhs,
                }
            })
        }
        Ast::Eventually { .. } | Ast::Always { .. } | Ast::Until { .. } => Err(err(
            1,
            1,
            "temporal operator nested under a spatial operator",
        )),
    }
}
