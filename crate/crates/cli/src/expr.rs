//! Arithmetic expressions in one variable `x`.
//!
//! Grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | '(' expr ')'
//! ```
//!
//! `×` and `÷` are accepted as aliases; `^` is right associative and binds
//! tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset} in {input:?}")]
pub struct ParseError {
    pub input: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr, ParseError> {
        let tokens = lex(input)?;
        let mut p = Parser {
            input,
            tokens,
            pos: 0,
        };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(p.error_at(t.offset, "unexpected trailing input")),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
        }
    }

    /// Coefficients `[c0, c1, ...]` if the expression is a polynomial in `x`
    /// (division only by constants, exponents only non-negative integers).
    pub fn as_polynomial(&self) -> Option<Vec<f64>> {
        let mut c = match self {
            Expr::Num(v) => vec![*v],
            Expr::Var => vec![0.0, 1.0],
            Expr::Neg(e) => e.as_polynomial()?.into_iter().map(|c| -c).collect(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.as_polynomial()?, b.as_polynomial()?);
                match op {
                    BinOp::Add => poly_add(&a, &b, 1.0),
                    BinOp::Sub => poly_add(&a, &b, -1.0),
                    BinOp::Mul => poly_mul(&a, &b),
                    BinOp::Div => {
                        if b.len() != 1 || b[0] == 0.0 {
                            return None;
                        }
                        a.into_iter().map(|c| c / b[0]).collect()
                    }
                    BinOp::Pow => {
                        if b.len() != 1 {
                            return None;
                        }
                        let k = b[0];
                        if !(k >= 0.0 && k.fract() == 0.0 && k <= 64.0) {
                            return None;
                        }
                        (0..k as u32).fold(vec![1.0], |acc, _| poly_mul(&acc, &a))
                    }
                }
            }
        };
        while c.len() > 1 && c[c.len() - 1] == 0.0 {
            c.pop();
        }
        Some(c)
    }
}

/// `a^b`, using repeated multiplication for small integer exponents so that
/// polynomial inputs evaluate exactly as written.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn poly_add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).copied().unwrap_or(0.0) + sign * b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{s}{b})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Var,
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone, Copy)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(input: &str) -> Result<Vec<Token>, ParseError> {
    let err = |offset, message: &str| ParseError {
        input: input.to_string(),
        offset,
        message: message.to_string(),
    };
    let bytes: Vec<(usize, char)> = input.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let (offset, c) = bytes[i];
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            'x' | 'X' => Tok::Var,
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '×' => Tok::Op('*'),
            '÷' => Tok::Op('/'),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].1.is_ascii_digit() || bytes[i].1 == '.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i].1, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j].1, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].1.is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let end = bytes.get(i).map_or(input.len(), |b| b.0);
                let text = &input[offset..end];
                let v: f64 = text.parse().map_err(|_| err(bytes[start].0, "malformed number"))?;
                out.push(Token { tok: Tok::Num(v), offset });
                continue;
            }
            _ => return Err(err(offset, &format!("unexpected character {c:?}"))),
        };
        out.push(Token { tok, offset });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    input: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn error_at(&self, offset: usize, message: &str) -> ParseError {
        ParseError {
            input: self.input.to_string(),
            offset,
            message: message.to_string(),
        }
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { tok: Tok::Op(c), .. }) if ops.contains(&c) => {
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(t) = self.peek() else {
            return Err(self.error_at(self.input.len(), "unexpected end of input"));
        };
        self.pos += 1;
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Var => Ok(Expr::Var),
            Tok::LParen => {
                let e = self.expr()?;
                match self.peek() {
                    Some(Token { tok: Tok::RParen, .. }) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    Some(other) => Err(self.error_at(other.offset, "expected ')'")),
                    None => Err(self.error_at(self.input.len(), "expected ')'")),
                }
            }
            _ => Err(self.error_at(t.offset, "expected a number, 'x' or '('")),
        }
    }
}
