//! Coefficient expressions: a small arithmetic language over slow variables
//! `x1..xn` and fast variables `y1..yn`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => libm::sin(v),
            Func::Cos => libm::cos(v),
            Func::Tanh => libm::tanh(v),
            Func::Exp => libm::exp(v),
            Func::Abs => v.abs(),
            Func::Sqrt => libm::sqrt(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree. Variable indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Slow(usize),
    Fast(usize),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn eval(&self, xs: &[f64], ys: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Slow(i) => xs[*i],
            Expr::Fast(i) => ys[*i],
            Expr::Neg(e) => -e.eval(xs, ys),
            Expr::Call(f, e) => f.apply(e.eval(xs, ys)),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(xs, ys), r.eval(xs, ys));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(e, k) => powi(e.eval(xs, ys), *k),
            Expr::Min(l, r) => l.eval(xs, ys).min(r.eval(xs, ys)),
            Expr::Max(l, r) => l.eval(xs, ys).max(r.eval(xs, ys)),
        }
    }

    fn any(&self, pred: &impl Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Const(_) | Expr::Slow(_) | Expr::Fast(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) | Expr::Pow(e, _) => e.any(pred),
            Expr::Binary(_, l, r) | Expr::Min(l, r) | Expr::Max(l, r) => l.any(pred) || r.any(pred),
        }
    }

    pub fn uses_slow(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Slow(_)))
    }

    pub fn uses_slow_index(&self, i: usize) -> bool {
        self.any(&|e| *e == Expr::Slow(i))
    }

    pub fn uses_fast(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Fast(_)))
    }

    pub fn is_constant(&self) -> bool {
        !self.uses_slow() && !self.uses_fast()
    }

    /// Literal zero after parsing, e.g. `"0"`.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn max_slow(&self) -> Option<usize> {
        match self {
            Expr::Slow(i) => Some(*i),
            Expr::Const(_) | Expr::Fast(_) => None,
            Expr::Neg(e) | Expr::Call(_, e) | Expr::Pow(e, _) => e.max_slow(),
            Expr::Binary(_, l, r) | Expr::Min(l, r) | Expr::Max(l, r) => l.max_slow().max(r.max_slow()),
        }
    }

    fn max_fast(&self) -> Option<usize> {
        match self {
            Expr::Fast(i) => Some(*i),
            Expr::Const(_) | Expr::Slow(_) => None,
            Expr::Neg(e) | Expr::Call(_, e) | Expr::Pow(e, _) => e.max_fast(),
            Expr::Binary(_, l, r) | Expr::Min(l, r) | Expr::Max(l, r) => l.max_fast().max(r.max_fast()),
        }
    }

    /// Whether every variable index fits the given dimensions.
    pub fn fits(&self, n_slow: usize, n_fast: usize) -> bool {
        self.max_slow().is_none_or(|i| i < n_slow) && self.max_fast().is_none_or(|i| i < n_fast)
    }

    /// Writes `self = f + g` where `f` does not use slow index `b` and `g` does
    /// not use slow index `a`, splitting top-level sums. `None` if some
    /// summand uses both.
    pub fn split_additive(&self, a: usize, b: usize) -> Option<(Expr, Expr)> {
        let mut terms = Vec::new();
        self.signed_terms(false, &mut terms);
        let (mut f, mut g) = (Expr::Const(0.0), Expr::Const(0.0));
        for (neg, t) in terms {
            let joined = |acc: Expr| Expr::Binary(if neg { BinOp::Sub } else { BinOp::Add }, Box::new(acc), Box::new(t.clone()));
            match (t.uses_slow_index(a), t.uses_slow_index(b)) {
                (true, true) => return None,
                (_, false) => f = joined(f),
                (false, true) => g = joined(g),
            }
        }
        Some((f, g))
    }

    fn signed_terms(&self, neg: bool, out: &mut Vec<(bool, Expr)>) {
        match self {
            Expr::Binary(BinOp::Add, l, r) => {
                l.signed_terms(neg, out);
                r.signed_terms(neg, out);
            }
            Expr::Binary(BinOp::Sub, l, r) => {
                l.signed_terms(neg, out);
                r.signed_terms(!neg, out);
            }
            Expr::Neg(e) => e.signed_terms(!neg, out),
            e => out.push((neg, e.clone())),
        }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if c.is_sign_negative() => 0,
            _ => 5,
        }
    }
}

fn powi(mut base: f64, mut k: u32) -> f64 {
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

struct Wrap<'a>(&'a Expr, bool);

impl fmt::Display for Wrap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Slow(i) => write!(f, "x{}", i + 1),
            Expr::Fast(i) => write!(f, "y{}", i + 1),
            Expr::Neg(e) => write!(f, "-{}", Wrap(e, e.level() < 3)),
            Expr::Call(func, e) => write!(f, "{}({})", func.name(), e),
            Expr::Binary(op, l, r) => {
                let (lvl, sym) = match op {
                    BinOp::Add => (1, "+"),
                    BinOp::Sub => (1, "-"),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                write!(f, "{} {} {}", Wrap(l, l.level() < lvl), sym, Wrap(r, r.level() <= lvl))
            }
            Expr::Pow(e, k) => write!(f, "{}^{}", Wrap(e, e.level() < 4), k),
            Expr::Min(l, r) => write!(f, "min({l}, {r})"),
            Expr::Max(l, r) => write!(f, "max({l}, {r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    n_slow: usize,
    n_fast: usize,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if b"+-*/^(),".contains(&c) {
            out.push((i, Tok::Sym(c as char)));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(Error::Syntax {
                offset: i,
                expected: vec!["expression".into()],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

fn strs(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

const PRIMARY_START: &[&str] = &["number", "variable", "function", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax { offset: self.offset(), expected: strs(expected), found: self.peek().describe() })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.fail(&[&format!("`{c}`")])
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while *self.peek() == Tok::Sym('^') {
            self.bump();
            match self.peek().clone() {
                Tok::Num(v) if v >= 0.0 && libm::trunc(v) == v && v <= u32::MAX as f64 => {
                    self.bump();
                    base = Expr::Pow(Box::new(base), v as u32);
                }
                _ => return self.fail(&["nonnegative integer exponent"]),
            }
        }
        Ok(base)
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Option<Expr>> {
        let (kind, rest) = name.split_at(1);
        if !(kind == "x" || kind == "y") || rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return Ok(None);
        }
        let idx: usize = rest.parse().unwrap_or(0);
        let limit = if kind == "x" { self.n_slow } else { self.n_fast };
        if idx == 0 || idx > limit {
            return Err(Error::UnknownIdentifier { name: name.to_string(), offset });
        }
        Ok(Some(if kind == "x" { Expr::Slow(idx - 1) } else { Expr::Fast(idx - 1) }))
    }

    fn primary(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.peek().clone() {
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
                if let Some(v) = self.variable(&name, offset)? {
                    return Ok(v);
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "min" || name == "max" {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(',')?;
                    let b = self.expr()?;
                    self.expect(')')?;
                    let (a, b) = (Box::new(a), Box::new(b));
                    return Ok(if name == "min" { Expr::Min(a, b) } else { Expr::Max(a, b) });
                }
                Err(Error::UnknownIdentifier { name, offset })
            }
            _ => self.fail(PRIMARY_START),
        }
    }
}

/// Parses `src` with variables `x1..x{n_slow}` and `y1..y{n_fast}`.
pub fn parse_expr(src: &str, n_slow: usize, n_fast: usize) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Syntax { offset: 0, expected: strs(PRIMARY_START), found: "end of input".into() });
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, n_slow, n_fast };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}
