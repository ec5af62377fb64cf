//! Scalar expressions in the single variable `t`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' factor)?
//! atom   := number | 't' | func '(' expr ')' | '(' expr ')'
//! func   := exp | ln | sqrt | abs | atan | sin | cos
//! ```
//!
//! Unary minus binds looser than `^`, so `-t^2` is `-(t^2)`; `^` is
//! right-associative.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{node}` at t = {t}: {reason}")]
pub struct EvalError {
    pub node: String,
    pub t: f64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Atan,
    Sin,
    Cos,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Atan,
        Func::Sin,
        Func::Cos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: source.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("expected expression, found end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                if name == "t" {
                    return Ok(Expr::Var);
                }
                match Func::from_name(name) {
                    Some(f) => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Call(f, Box::new(arg)))
                    }
                    None => Err(ParseError::UnknownIdentifier {
                        offset: start,
                        name: name.to_string(),
                    }),
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.syntax("malformed number"));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                self.pos = q;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&s[start..p]).unwrap_or("");
        self.pos = p;
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax { offset: start, msg: "malformed number".into() })
    }
}

impl fmt::Display for Expr {
    /// Canonical fully parenthesized form; parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Expr::Const(c) => write!(f, "{:?}", c),
            Expr::Var => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Div(a, b) => write!(f, "({} / {})", a, b),
            Expr::Pow(a, b) => write!(f, "({} ^ {})", a, b),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

fn domain(node: &Expr, t: f64, reason: &'static str) -> EvalError {
    EvalError { node: node.to_string(), t, reason }
}

fn checked(node: &Expr, t: f64, v: f64) -> Result<f64, EvalError> {
    if v.is_nan() {
        Err(domain(node, t, "result is not a number"))
    } else {
        Ok(v)
    }
}

fn pow_value(node: &Expr, t: f64, a: f64, b: f64) -> Result<f64, EvalError> {
    if a == 0.0 && b < 0.0 {
        return Err(domain(node, t, "zero raised to a negative power"));
    }
    if a < 0.0 && b.fract() != 0.0 {
        return Err(domain(node, t, "negative base with non-integer exponent"));
    }
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        return Ok(a.powi(b as i32));
    }
    Ok(a.powf(b))
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var => t,
            Expr::Neg(a) => -a.eval(t)?,
            Expr::Add(a, b) => a.eval(t)? + b.eval(t)?,
            Expr::Sub(a, b) => a.eval(t)? - b.eval(t)?,
            Expr::Mul(a, b) => a.eval(t)? * b.eval(t)?,
            Expr::Div(a, b) => {
                let num = a.eval(t)?;
                let den = b.eval(t)?;
                if den == 0.0 {
                    return Err(domain(self, t, "division by zero"));
                }
                num / den
            }
            Expr::Pow(a, b) => pow_value(self, t, a.eval(t)?, b.eval(t)?)?,
            Expr::Call(Func::Ln, a) if ln1p_arg(a).is_some() => {
                // ln(1 + x) and ln(x + 1) keep full relative accuracy for small x.
                let x = ln1p_arg(a).map(|x| x.eval(t)).unwrap_or(Ok(0.0))?;
                if x <= -1.0 {
                    return Err(domain(self, t, "logarithm of a non-positive value"));
                }
                x.ln_1p()
            }
            Expr::Call(func, a) => {
                let x = a.eval(t)?;
                match func {
                    Func::Exp => x.exp(),
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(domain(self, t, "logarithm of a non-positive value"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(domain(self, t, "square root of a negative value"));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Atan => x.atan(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                }
            }
        };
        checked(self, t, v)
    }

    /// Natural logarithm of a positive value, computed structurally so that
    /// `exp(-1/t)` stays finite in log space where the value itself underflows.
    pub fn eval_ln(&self, t: f64) -> Result<f64, EvalError> {
        let structural = match self {
            Expr::Call(Func::Exp, a) => Some(a.eval(t)),
            Expr::Call(Func::Sqrt, a) => Some(a.eval_ln(t).map(|l| 0.5 * l)),
            Expr::Mul(a, b) => Some(a.eval_ln(t).and_then(|la| Ok(la + b.eval_ln(t)?))),
            Expr::Div(a, b) => Some(a.eval_ln(t).and_then(|la| Ok(la - b.eval_ln(t)?))),
            Expr::Pow(a, b) => Some(a.eval_ln(t).and_then(|la| Ok(b.eval(t)? * la))),
            _ => None,
        };
        if let Some(Ok(l)) = structural {
            if !l.is_nan() {
                return Ok(l);
            }
        }
        let v = self.eval(t)?;
        if v <= 0.0 {
            return Err(domain(self, t, "logarithm of a non-positive value"));
        }
        Ok(v.ln())
    }

    pub fn differentiate(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var => Const(1.0),
            Neg(a) => neg(a.differentiate()),
            Add(a, b) => add(a.differentiate(), b.differentiate()),
            Sub(a, b) => sub(a.differentiate(), b.differentiate()),
            Mul(a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.differentiate(), (**b).clone()),
                    mul((**a).clone(), b.differentiate()),
                ),
                pow((**b).clone(), Const(2.0)),
            ),
            Pow(a, b) => match (&**a, &**b) {
                (_, Const(c)) => mul(
                    mul(Const(*c), pow((**a).clone(), Const(c - 1.0))),
                    a.differentiate(),
                ),
                (Const(_), _) => mul(
                    mul(self.clone(), call(Func::Ln, (**a).clone())),
                    b.differentiate(),
                ),
                _ => mul(
                    self.clone(),
                    add(
                        mul(b.differentiate(), call(Func::Ln, (**a).clone())),
                        div(mul((**b).clone(), a.differentiate()), (**a).clone()),
                    ),
                ),
            },
            Call(func, a) => {
                let inner = a.differentiate();
                let x = (**a).clone();
                let outer = match func {
                    Func::Exp => call(Func::Exp, x),
                    Func::Ln => div(Const(1.0), x),
                    Func::Sqrt => div(Const(1.0), mul(Const(2.0), call(Func::Sqrt, x))),
                    Func::Abs => div(x.clone(), call(Func::Abs, x)),
                    Func::Atan => div(Const(1.0), add(Const(1.0), pow(x, Const(2.0)))),
                    Func::Sin => call(Func::Cos, x),
                    Func::Cos => neg(call(Func::Sin, x)),
                };
                mul(outer, inner)
            }
        }
    }

    /// Replace every occurrence of `t` by `inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(inner));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var => inner.clone(),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Pow(a, b) => Expr::Pow(s(a), s(b)),
            Expr::Call(f, a) => Expr::Call(*f, s(a)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

fn ln1p_arg(e: &Expr) -> Option<&Expr> {
    match e {
        Expr::Add(a, b) if is_const(a, 1.0) => Some(b),
        Expr::Add(a, b) if is_const(b, 1.0) => Some(a),
        _ => None,
    }
}

fn is_const(e: &Expr, c: f64) -> bool {
    matches!(e, Expr::Const(v) if *v == c)
}

fn neg(a: Expr) -> Expr {
    if is_const(&a, 0.0) {
        return Expr::Const(0.0);
    }
    Expr::Neg(Box::new(a))
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_const(&a, 0.0) {
        return b;
    }
    if is_const(&b, 0.0) {
        return a;
    }
    Expr::Add(Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_const(&b, 0.0) {
        return a;
    }
    if is_const(&a, 0.0) {
        return neg(b);
    }
    Expr::Sub(Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_const(&a, 0.0) || is_const(&b, 0.0) {
        return Expr::Const(0.0);
    }
    if is_const(&a, 1.0) {
        return b;
    }
    if is_const(&b, 1.0) {
        return a;
    }
    Expr::Mul(Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_const(&a, 0.0) {
        return Expr::Const(0.0);
    }
    Expr::Div(Box::new(a), Box::new(b))
}

fn pow(a: Expr, b: Expr) -> Expr {
    Expr::Pow(Box::new(a), Box::new(b))
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

pub fn evaluate(ast: &Expr, t: f64) -> Result<f64, EvalError> {
    ast.eval(t)
}

pub fn differentiate(ast: &Expr) -> Expr {
    ast.differentiate()
}

/// A parsed function of one variable with a lazily built derivative.
#[derive(Debug, Clone)]
pub struct ScalarFn {
    source: String,
    body: Expr,
    derivative: OnceLock<Box<ScalarFn>>,
    /// Open interval on which the function is meant to be evaluated.
    pub domain: (f64, f64),
}

impl PartialEq for ScalarFn {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && self.domain == other.domain
    }
}

impl ScalarFn {
    pub fn parse(source: &str) -> Result<ScalarFn, ParseError> {
        let body = parse_expression(source)?;
        Ok(ScalarFn {
            source: source.trim().to_string(),
            body,
            derivative: OnceLock::new(),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn from_expr(body: Expr) -> ScalarFn {
        ScalarFn {
            source: body.to_string(),
            body,
            derivative: OnceLock::new(),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> ScalarFn {
        self.domain = (lo, hi);
        self
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.body.eval(t)
    }

    pub fn eval_ln(&self, t: f64) -> Result<f64, EvalError> {
        self.body.eval_ln(t)
    }

    pub fn derivative(&self) -> &ScalarFn {
        self.derivative.get_or_init(|| {
            let mut d = ScalarFn::from_expr(self.body.differentiate());
            d.domain = self.domain;
            Box::new(d)
        })
    }

    pub fn eval_derivative(&self, t: f64) -> Result<f64, EvalError> {
        self.derivative().eval(t)
    }

    /// True when the body does not reference `t`.
    pub fn is_constant(&self) -> bool {
        fn walk(e: &Expr) -> bool {
            match e {
                Expr::Const(_) => true,
                Expr::Var => false,
                Expr::Neg(a) | Expr::Call(_, a) => walk(a),
                Expr::Add(a, b)
                | Expr::Sub(a, b)
                | Expr::Mul(a, b)
                | Expr::Div(a, b)
                | Expr::Pow(a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.body)
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
