//! Scalar field expressions for config files.
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = "-" , unary | power ;
//! power   = atom , [ "^" , unary ] ;            (* right-associative *)
//! atom    = number | "pi" | coord | func , "(" , expr , ")" | "(" , expr , ")" ;
//! coord   = "x1" | "x2" | "x3" | "x4" | "x5" | "x6" | "x7" ;
//! func    = "sin" | "cos" | "exp" | "sqrt" ;
//! number  = digit , { digit } , [ "." , { digit } ] , [ ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ]
//!         | "." , digit , { digit } , [ exponent ] ;
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Pi,
    /// Coordinate index 0..7 (x1 is 0).
    Coord(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
#[error("parse error at line {line}, column {column}: expected {}, found {found}", expected.join(" | "))]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative number {0}")]
    SqrtOfNegative(f64),
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Sym(c) => write!(f, "'{c}'"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn err(line: usize, column: usize, expected: &[&str], found: impl Into<String>) -> ParseError {
    ParseError { line, column, expected: expected.iter().map(|s| s.to_string()).collect(), found: found.into() }
}

fn lex(text: &str) -> Result<Lexed, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = (line, col);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let x: f64 = s.parse().map_err(|_| err(start.0, start.1, &["number"], s.clone()))?;
            if !x.is_finite() {
                return Err(err(start.0, start.1, &["finite number"], s));
            }
            toks.push((Tok::Num(x), start.0, start.1));
            col += j - i;
            i = j;
        } else if c.is_ascii_alphabetic() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_alphanumeric() {
                j += 1;
            }
            toks.push((Tok::Ident(chars[i..j].iter().collect()), start.0, start.1));
            col += j - i;
            i = j;
        } else if "+-*/^()".contains(c) {
            toks.push((Tok::Sym(c), start.0, start.1));
            i += 1;
            col += 1;
        } else {
            return Err(err(line, col, &["number", "identifier", "operator", "'('", "')'"], format!("'{c}'")));
        }
    }
    toks.push((Tok::End, line, col));
    Ok(Lexed { toks })
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn fail(&self, expected: &[&str]) -> ParseError {
        let (t, l, c) = &self.toks[self.pos];
        err(*l, *c, expected, t.to_string())
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const ATOM: [&str; 5] = ["number", "'pi'", "coordinate x1..x7", "function", "'('"];
        match self.peek().clone() {
            Tok::Num(x) => {
                self.pos += 1;
                Ok(Expr::Num(x))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.fail(&["')'"]));
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "pi" => {
                        self.pos += 1;
                        return Ok(Expr::Pi);
                    }
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    s => {
                        if let Some(k) = s.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                            if (1..=7).contains(&k) && s.len() == 2 {
                                self.pos += 1;
                                return Ok(Expr::Coord(k - 1));
                            }
                        }
                        return Err(self.fail(&ATOM));
                    }
                };
                self.pos += 1;
                if !self.eat('(') {
                    return Err(self.fail(&["'('"]));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return Err(self.fail(&["')'"]));
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.fail(&ATOM)),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let Lexed { toks } = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.fail(&["operator", "end of input"]));
    }
    Ok(e)
}

impl Expr {
    pub fn evaluate(&self, x: &[f64; 7]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Coord(k) => x[*k],
            Expr::Neg(e) => -e.evaluate(x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.evaluate(x)?, b.evaluate(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let a = e.evaluate(x)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::SqrtOfNegative(a));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Whether the value can depend on coordinate `k` (0-based).
    pub fn uses_coordinate(&self, k: usize) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Coord(j) => *j == k,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_coordinate(k),
            Expr::Bin(_, a, b) => a.uses_coordinate(k) || b.uses_coordinate(k),
        }
    }
}

/// Fully parenthesized, so printing and reparsing gives the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Pi => write!(f, "pi"),
            Expr::Coord(k) => write!(f, "x{}", k + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
