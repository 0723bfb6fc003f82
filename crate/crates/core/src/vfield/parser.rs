//! Recursive-descent parser for bracketed component lists such as
//! `[x1*(1 - x1^2 - x2^2) - x2, x2*(1 - x1^2 - x2^2) + x1]`.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary minus, `^` (right
//! associative, integer exponents only).

use std::collections::BTreeMap;

use super::ast::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown identifier `{name}` at line {line}, column {col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error("expected {expected} components, found {found}")]
    Arity { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: tl,
                col: tc,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("number `{text}` is out of range"),
                });
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Num(value),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if "+-*/^(),[]".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                line: tl,
                col: tc,
            });
            col += 1;
            i += 1;
            continue;
        }
        return Err(ParseError::Syntax {
            line: tl,
            col: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    params: &'a BTreeMap<String, usize>,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, sym: char) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Sym(sym) {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{sym}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn components(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect('[')?;
        let mut out = vec![self.expr()?];
        while self.peek().tok == Tok::Sym(',') {
            self.bump();
            out.push(self.expr()?);
        }
        self.expect(']')?;
        if self.peek().tok != Tok::End {
            return Err(self.error_here("trailing input after `]`"));
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let at = self.peek().clone();
        let exponent = self.unary()?;
        let value = fold_constant(&exponent).ok_or_else(|| ParseError::Syntax {
            line: at.line,
            col: at.col,
            message: "exponent must be a constant integer".into(),
        })?;
        if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
            return Err(ParseError::Syntax {
                line: at.line,
                col: at.col,
                message: format!("exponent {value} is not an integer"),
            });
        }
        Ok(Expr::Pow(Box::new(base), value as i32))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::Sym('(') {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        name: name.clone(),
                        line: t.line,
                        col: t.col,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(&idx) = self.params.get(&name) {
                    return Ok(Expr::Param(idx));
                }
                if let Some(var) = parse_variable(&name, self.dim) {
                    return Ok(Expr::Var(var));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                Err(ParseError::UnknownIdentifier {
                    name,
                    line: t.line,
                    col: t.col,
                })
            }
            ref other => Err(self.error_here(format!("expected an operand, found {}", describe(other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

fn parse_variable(name: &str, dim: usize) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let i: usize = digits.parse().ok()?;
    (1..=dim).contains(&i).then(|| i - 1)
}

/// Value of an expression built only from literals (no variables or
/// parameters).
fn fold_constant(e: &Expr) -> Option<f64> {
    Some(match e {
        Expr::Const(v) => *v,
        Expr::Neg(a) => -fold_constant(a)?,
        Expr::Binary(op, a, b) => {
            let (a, b) = (fold_constant(a)?, fold_constant(b)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        }
        Expr::Pow(a, n) => fold_constant(a)?.powi(*n),
        _ => return None,
    })
}

/// Parse `source` as exactly `dim` components; `params` maps names to their
/// slot index in the program's parameter table.
pub(crate) fn parse_components(
    source: &str,
    dim: usize,
    params: &BTreeMap<String, usize>,
) -> Result<Vec<Expr>, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(source)?,
        pos: 0,
        dim,
        params,
    };
    let comps = parser.components()?;
    if comps.len() != dim {
        return Err(ParseError::Arity {
            expected: dim,
            found: comps.len(),
        });
    }
    Ok(comps)
}
