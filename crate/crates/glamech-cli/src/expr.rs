//! Arithmetic expressions over bundle coordinates, with symbolic differentiation.
//!
//! Grammar: numbers, `pi`, variables, `+ - * / ^` (`^` binds tightest and is right
//! associative; unary minus binds looser than `^`), parentheses and the functions
//! `sin`, `cos`, `exp`, `sqrt`.

use std::fmt;
use std::sync::Arc;

use glamech::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    /// Only produced by differentiation of `u^v` with non-constant `v`.
    Ln,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Ln => v.ln(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parse failure with a 0-based character offset into the source.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at character {})", self.message, self.offset + 1)
    }
}

impl std::error::Error for ParseError {}

/// Variable names `x1..xm` then `y1..yr`, mapped to slots `0..m+r`.
#[derive(Clone, Copy, Debug)]
pub struct Vars {
    pub m: usize,
    pub r: usize,
}

impl Vars {
    pub fn base(m: usize) -> Self {
        Vars { m, r: 0 }
    }

    pub fn len(&self) -> usize {
        self.m + self.r
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, name: &str) -> Option<usize> {
        let (head, idx) = name.split_at(1);
        let k: usize = idx.parse().ok()?;
        if k == 0 || idx.starts_with('0') {
            return None;
        }
        match head {
            "x" if k <= self.m => Some(k - 1),
            "y" if k <= self.r => Some(self.m + k - 1),
            _ => None,
        }
    }

    fn name(&self, slot: usize) -> String {
        if slot < self.m {
            format!("x{}", slot + 1)
        } else {
            format!("y{}", slot - self.m + 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let v = text
                .parse::<f64>()
                .map_err(|_| ParseError { offset: start, message: format!("malformed number '{text}'") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ParseError { offset: i, message: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: &'a Vars,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), message: message.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            // right associative; the exponent may carry its own sign
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    if !self.eat('(') {
                        return self.err(format!("expected '(' after {name}"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected ')'");
                    }
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                match self.vars.lookup(&name) {
                    Some(k) => Ok(Expr::Var(k)),
                    None => Err(ParseError { offset, message: format!("unknown identifier '{name}'") }),
                }
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of expression"),
        }
    }
}

pub fn parse(src: &str, vars: &Vars) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, end: src.chars().count(), vars };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => num(-v),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => num(x / y),
        (Some(0.0), _) => num(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x.powf(y)),
        (_, Some(1.0)) => a,
        (_, Some(0.0)) => num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match as_num(&a) {
        Some(v) => num(f.apply(v)),
        None => Expr::Call(f, Box::new(a)),
    }
}

impl Expr {
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(k) => u[*k],
            Expr::Neg(a) => -a.eval(u),
            Expr::Add(a, b) => a.eval(u) + b.eval(u),
            Expr::Sub(a, b) => a.eval(u) - b.eval(u),
            Expr::Mul(a, b) => a.eval(u) * b.eval(u),
            Expr::Div(a, b) => a.eval(u) / b.eval(u),
            Expr::Pow(a, b) => {
                let (x, y) = (a.eval(u), b.eval(u));
                if y == y.trunc() && y.abs() <= 64.0 {
                    x.powi(y as i32)
                } else {
                    x.powf(y)
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(u)),
        }
    }

    /// Whether the expression mentions slot `k`.
    pub fn depends_on(&self, k: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(j) => *j == k,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(k),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(k) || b.depends_on(k)
            }
        }
    }

    /// `∂/∂u_k`, simplified.
    pub fn diff(&self, k: usize) -> Expr {
        if !self.depends_on(k) {
            return num(0.0);
        }
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(j) => num(if *j == k { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(k)),
            Expr::Add(a, b) => add(a.diff(k), b.diff(k)),
            Expr::Sub(a, b) => sub(a.diff(k), b.diff(k)),
            Expr::Mul(a, b) => add(mul(a.diff(k), (**b).clone()), mul((**a).clone(), b.diff(k))),
            Expr::Div(a, b) => {
                let (a, b) = ((**a).clone(), (**b).clone());
                let num_ = sub(mul(a.diff(k), b.clone()), mul(a, b.diff(k)));
                div(num_, pow(b, num(2.0)))
            }
            Expr::Pow(a, b) => {
                let (a, b) = ((**a).clone(), (**b).clone());
                if !b.depends_on(k) {
                    // b a^(b-1) a'
                    let da = a.diff(k);
                    mul(mul(b.clone(), pow(a, sub(b, num(1.0)))), da)
                } else {
                    // a^b (b' ln a + b a'/a)
                    let t = add(mul(b.diff(k), call(Func::Ln, a.clone())), div(mul(b.clone(), a.diff(k)), a.clone()));
                    mul(pow(a, b), t)
                }
            }
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let da = inner.diff(k);
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
                    Func::Ln => div(num(1.0), inner),
                };
                mul(outer, da)
            }
        }
    }

    pub fn display<'a>(&'a self, vars: &'a Vars) -> impl fmt::Display + 'a {
        Shown(self, vars)
    }
}

struct Shown<'a>(&'a Expr, &'a Vars);

impl fmt::Display for Shown<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.1;
        let s = |e: &'_ Expr| Shown(e, v).to_string();
        match self.0 {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(k) => write!(f, "{}", v.name(*k)),
            Expr::Neg(a) => write!(f, "(-{})", s(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", s(a), s(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", s(a), s(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", s(a), s(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", s(a), s(b)),
            Expr::Pow(a, b) => write!(f, "({} ^ {})", s(a), s(b)),
            Expr::Call(g, a) => write!(f, "{}({})", g.name(), s(a)),
        }
    }
}

/// Field of the given shape from row-major expressions over `n_in` slots, with symbolic
/// first partials.
pub fn expr_field(n_in: usize, shape: &[usize], exprs: Vec<Expr>) -> Field {
    let k = exprs.len();
    debug_assert_eq!(k, shape.iter().product::<usize>());
    let derivs: Vec<Expr> = (0..n_in).flat_map(|q| exprs.iter().map(move |e| e.diff(q))).collect();
    let (values, derivs) = (Arc::new(exprs), Arc::new(derivs));
    Field::new(n_in, shape, move |u| values.iter().map(|e| e.eval(u)).collect())
        .with_partials(move |u| derivs.iter().map(|e| e.eval(u)).collect())
}

/// Gradient field of a scalar expression with the symbolic Hessian as its partials.
pub fn gradient_field(n_in: usize, e: &Expr) -> Field {
    expr_field(n_in, &[n_in], (0..n_in).map(|k| e.diff(k)).collect())
}
