//! Text form of expressions.
//!
//! Parsing happens in two passes: a syntax pass that accepts any
//! `name(args...)` call, then a resolution pass that checks operator names,
//! arities, variables and size limits. Syntax errors therefore win over
//! semantic ones. Positions are 1-based; an error at end of input points at
//! the last character consumed.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{BinaryOp, Expr, FeatureSchema, UnaryOp, MAX_DEPTH, MAX_NODES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    TrailingInput(char),
    InvalidNumber(String),
    UnknownFunction(String),
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    UnknownVariable(String),
    TooDeep(usize),
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    pub fn is_syntax(&self) -> bool {
        matches!(
            self.kind,
            ParseErrorKind::UnexpectedChar(_)
                | ParseErrorKind::UnexpectedEnd
                | ParseErrorKind::TrailingInput(_)
                | ParseErrorKind::InvalidNumber(_)
        )
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "syntax error: unexpected {c:?}")?,
            ParseErrorKind::UnexpectedEnd => f.write_str("syntax error: unexpected end of input")?,
            ParseErrorKind::TrailingInput(c) => write!(f, "syntax error: trailing input starting with {c:?}")?,
            ParseErrorKind::InvalidNumber(s) => write!(f, "syntax error: invalid number {s:?}")?,
            ParseErrorKind::UnknownFunction(s) => write!(f, "unknown function `{s}`")?,
            ParseErrorKind::Arity { name, expected, found } => {
                write!(f, "`{name}` takes {expected} argument(s), found {found}")?
            }
            ParseErrorKind::UnknownVariable(s) => write!(f, "unknown variable `{s}`")?,
            ParseErrorKind::TooDeep(d) => write!(f, "expression depth {d} exceeds {MAX_DEPTH}")?,
            ParseErrorKind::TooLarge(n) => write!(f, "expression has {n} nodes, more than {MAX_NODES}")?,
        }
        write!(f, " at line {} column {}", self.line, self.column)
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug)]
enum Syntax {
    Number(f64),
    Ident(String),
    Call(String, Vec<Node>),
}

#[derive(Debug)]
struct Node {
    syntax: Syntax,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    column: usize,
    // position of the last consumed character
    last: (usize, usize),
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
            last: (1, 0),
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        self.last = (self.line, self.column);
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: self.line,
            column: self.column,
        }
    }

    fn end_err(&self) -> ParseError {
        ParseError {
            kind: ParseErrorKind::UnexpectedEnd,
            line: self.last.0,
            column: self.last.1,
        }
    }

    fn unexpected(&mut self) -> ParseError {
        match self.peek() {
            Some(c) => self.err(ParseErrorKind::UnexpectedChar(c)),
            None => self.end_err(),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let (line, column) = (self.line, self.column);
        match self.peek() {
            None => Err(self.end_err()),
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let n = self.number()?;
                Ok(Node { syntax: Syntax::Number(n), line, column })
            }
            Some(c) if c.is_ascii_lowercase() || c == '_' => {
                let name = self.ident();
                self.skip_ws();
                if self.peek() != Some('(') {
                    return Ok(Node { syntax: Syntax::Ident(name), line, column });
                }
                self.bump();
                let mut args = Vec::new();
                loop {
                    args.push(self.expr()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(',') => {
                            self.bump();
                        }
                        Some(')') => {
                            self.bump();
                            break;
                        }
                        _ => return Err(self.unexpected()),
                    }
                }
                Ok(Node { syntax: Syntax::Call(name, args), line, column })
            }
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(c))),
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn digits(&mut self, s: &mut String) -> usize {
        let mut n = 0;
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
            n += 1;
        }
        n
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let (line, column) = (self.line, self.column);
        let mut s = String::new();
        if let Some(c) = self.peek().filter(|c| *c == '-' || *c == '+') {
            s.push(c);
            self.bump();
        }
        let mut mantissa = self.digits(&mut s);
        if self.peek() == Some('.') {
            s.push('.');
            self.bump();
            mantissa += self.digits(&mut s);
        }
        if mantissa == 0 {
            return Err(match self.peek() {
                None => self.end_err(),
                Some(_) => ParseError { kind: ParseErrorKind::InvalidNumber(s), line, column },
            });
        }
        if let Some(e) = self.peek().filter(|c| *c == 'e' || *c == 'E') {
            s.push(e);
            self.bump();
            if let Some(c) = self.peek().filter(|c| *c == '-' || *c == '+') {
                s.push(c);
                self.bump();
            }
            if self.digits(&mut s) == 0 {
                return Err(ParseError { kind: ParseErrorKind::InvalidNumber(s), line, column });
            }
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ParseError { kind: ParseErrorKind::InvalidNumber(s), line, column }),
        }
    }
}

fn unary(name: &str) -> Option<UnaryOp> {
    UnaryOp::ALL.into_iter().find(|o| o.name() == name)
}

fn binary(name: &str) -> Option<BinaryOp> {
    BinaryOp::ALL.into_iter().find(|o| o.name() == name)
}

fn resolve(node: Node, schema: &FeatureSchema) -> Result<Expr, ParseError> {
    let at = |kind| ParseError { kind, line: node.line, column: node.column };
    match node.syntax {
        Syntax::Number(v) => Ok(Expr::Const(v)),
        Syntax::Ident(name) => match schema.lookup(&name) {
            Some(f) => Ok(Expr::Var(f)),
            None => Err(at(ParseErrorKind::UnknownVariable(name))),
        },
        Syntax::Call(name, args) => {
            let expected = if unary(&name).is_some() {
                1
            } else if binary(&name).is_some() {
                2
            } else if name == "iflt" {
                4
            } else {
                return Err(at(ParseErrorKind::UnknownFunction(name)));
            };
            if args.len() != expected {
                let found = args.len();
                return Err(at(ParseErrorKind::Arity { name, expected, found }));
            }
            let mut resolved = args
                .into_iter()
                .map(|a| resolve(a, schema).map(Box::new))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter();
            let mut next = || resolved.next().expect("arity checked");
            Ok(if let Some(op) = unary(&name) {
                Expr::Unary(op, next())
            } else if let Some(op) = binary(&name) {
                Expr::Binary(op, next(), next())
            } else {
                Expr::IfLess(next(), next(), next(), next())
            })
        }
    }
}

/// Parses `text` against `schema`.
pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Expr, ParseError> {
    let mut lexer = Lexer::new(text);
    let root = lexer.expr()?;
    lexer.skip_ws();
    if let Some(c) = lexer.peek() {
        return Err(lexer.err(ParseErrorKind::TrailingInput(c)));
    }
    let (line, column) = (root.line, root.column);
    let expr = resolve(root, schema)?;
    let size = expr.size();
    if size > MAX_NODES {
        return Err(ParseError { kind: ParseErrorKind::TooLarge(size), line, column });
    }
    let depth = expr.depth();
    if depth > MAX_DEPTH {
        return Err(ParseError { kind: ParseErrorKind::TooDeep(depth), line, column });
    }
    Ok(expr)
}
