//! Time-profile expressions: the scalar coefficients multiplying constant
//! matrices in a Hamiltonian or observable.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | 't' | func '(' sum ')' | '(' sum ')'
//! func    := sin | cos | exp | tanh
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-4`, and `2^3^2` is
//! `2^(3^2) = 512`. Exponents must evaluate to integers.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    NonIntegerExponent,
    NonFinite,
    NonFiniteTime,
    /// Differentiating `u^v` where `v` depends on `t`.
    VariableExponent,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation error at byte {offset}: {kind:?}")]
pub struct EvalError {
    pub offset: usize,
    pub kind: EvalErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Tanh => x.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Num(f64),
    Time,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Expression node. `offset` is the byte position in the source text and is
/// ignored by equality.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub offset: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Num(a), ExprKind::Num(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Time, ExprKind::Time) => true,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a == b,
            (ExprKind::Bin(o1, l1, r1), ExprKind::Bin(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (ExprKind::Call(f1, a1), ExprKind::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl Expr {
    fn new(kind: ExprKind, offset: usize) -> Self {
        Self { kind, offset }
    }

    pub fn num(x: f64) -> Self {
        Self::new(ExprKind::Num(x), 0)
    }

    pub fn time() -> Self {
        Self::new(ExprKind::Time, 0)
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Self {
        let offset = l.offset;
        Self::new(ExprKind::Bin(op, Box::new(l), Box::new(r)), offset)
    }

    pub fn call(f: Func, arg: Expr) -> Self {
        let offset = arg.offset;
        Self::new(ExprKind::Call(f, Box::new(arg)), offset)
    }

    pub fn neg(e: Expr) -> Self {
        let offset = e.offset;
        Self::new(ExprKind::Neg(Box::new(e)), offset)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        if !t.is_finite() {
            return Err(EvalError { offset: self.offset, kind: EvalErrorKind::NonFiniteTime });
        }
        self.eval_inner(t)
    }

    fn eval_inner(&self, t: f64) -> Result<f64, EvalError> {
        let err = |kind| EvalError { offset: self.offset, kind };
        let v = match &self.kind {
            ExprKind::Num(x) => *x,
            ExprKind::Time => t,
            ExprKind::Neg(e) => -e.eval_inner(t)?,
            ExprKind::Call(f, a) => f.apply(a.eval_inner(t)?),
            ExprKind::Bin(op, l, r) => {
                let a = l.eval_inner(t)?;
                let b = r.eval_inner(t)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(err(EvalErrorKind::DivisionByZero));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if b.fract() != 0.0 || b.abs() > i32::MAX as f64 {
                            return Err(EvalError { offset: r.offset, kind: EvalErrorKind::NonIntegerExponent });
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(err(EvalErrorKind::DivisionByZero));
                        }
                        a.powi(b as i32)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(EvalErrorKind::NonFinite))
        }
    }

    pub fn depends_on_time(&self) -> bool {
        match &self.kind {
            ExprKind::Num(_) => false,
            ExprKind::Time => true,
            ExprKind::Neg(e) | ExprKind::Call(_, e) => e.depends_on_time(),
            ExprKind::Bin(_, l, r) => l.depends_on_time() || r.depends_on_time(),
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn derivative(&self) -> Result<Expr, EvalError> {
        use BinOp::*;
        let at = self.offset;
        let d = match &self.kind {
            ExprKind::Num(_) => Expr::num(0.0),
            ExprKind::Time => Expr::num(1.0),
            ExprKind::Neg(e) => Expr::neg(e.derivative()?),
            ExprKind::Bin(Add, l, r) => Expr::bin(Add, l.derivative()?, r.derivative()?),
            ExprKind::Bin(Sub, l, r) => Expr::bin(Sub, l.derivative()?, r.derivative()?),
            ExprKind::Bin(Mul, l, r) => Expr::bin(
                Add,
                Expr::bin(Mul, l.derivative()?, (**r).clone()),
                Expr::bin(Mul, (**l).clone(), r.derivative()?),
            ),
            ExprKind::Bin(Div, l, r) => Expr::bin(
                Div,
                Expr::bin(
                    Sub,
                    Expr::bin(Mul, l.derivative()?, (**r).clone()),
                    Expr::bin(Mul, (**l).clone(), r.derivative()?),
                ),
                Expr::bin(Pow, (**r).clone(), Expr::num(2.0)),
            ),
            ExprKind::Bin(Pow, base, exponent) => {
                if exponent.depends_on_time() {
                    return Err(EvalError { offset: exponent.offset, kind: EvalErrorKind::VariableExponent });
                }
                // n · u^(n−1) · u'
                Expr::bin(
                    Mul,
                    Expr::bin(
                        Mul,
                        (**exponent).clone(),
                        Expr::bin(Pow, (**base).clone(), Expr::bin(Sub, (**exponent).clone(), Expr::num(1.0))),
                    ),
                    base.derivative()?,
                )
            }
            ExprKind::Call(f, a) => {
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, (**a).clone()),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, (**a).clone())),
                    Func::Exp => Expr::call(Func::Exp, (**a).clone()),
                    Func::Tanh => Expr::bin(
                        Sub,
                        Expr::num(1.0),
                        Expr::bin(Pow, Expr::call(Func::Tanh, (**a).clone()), Expr::num(2.0)),
                    ),
                };
                Expr::bin(Mul, outer, a.derivative()?)
            }
        };
        Ok(d.simplified().with_offset(at))
    }

    fn with_offset(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    /// Folds the trivial identities introduced by differentiation
    /// (`0·x`, `1·x`, `x+0`, ...). Never changes the value.
    fn simplified(self) -> Expr {
        use BinOp::*;
        let offset = self.offset;
        let is = |e: &Expr, v: f64| matches!(e.kind, ExprKind::Num(x) if x == v);
        match self.kind {
            ExprKind::Neg(e) => {
                let e = e.simplified();
                if is(&e, 0.0) {
                    Expr::num(0.0)
                } else {
                    Expr::new(ExprKind::Neg(Box::new(e)), offset)
                }
            }
            ExprKind::Call(f, a) => Expr::new(ExprKind::Call(f, Box::new(a.simplified())), offset),
            ExprKind::Bin(op, l, r) => {
                let l = l.simplified();
                let r = r.simplified();
                match op {
                    Add if is(&l, 0.0) => r,
                    Add | Sub if is(&r, 0.0) => l,
                    Sub if is(&l, 0.0) => Expr::neg(r),
                    Mul if is(&l, 0.0) || is(&r, 0.0) => Expr::num(0.0),
                    Mul if is(&l, 1.0) => r,
                    Mul if is(&r, 1.0) => l,
                    Div if is(&l, 0.0) && !matches!(r.kind, ExprKind::Num(x) if x == 0.0) => Expr::num(0.0),
                    _ => Expr::new(ExprKind::Bin(op, Box::new(l), Box::new(r)), offset),
                }
            }
            kind => Expr::new(kind, offset),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; re-parses to an equal tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => write!(f, "(-{:?})", -x),
            ExprKind::Num(x) => write!(f, "{x:?}"),
            ExprKind::Time => write!(f, "t"),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprKind::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Parses a profile expression.
pub fn parse_profile(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: String) -> ParseError {
        ParseError::Syntax { offset: self.pos, message }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            let at = self.pos;
            self.pos += 1;
            let rhs = self.product()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::new(ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), at);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            let at = self.pos;
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::new(ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), at);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            let at = self.pos;
            self.pos += 1;
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(e)), at));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            let at = self.pos;
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::new(ExprKind::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)), at));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input".into())),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
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
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                if self.peek() == Some(b'(') {
                    let func = Func::from_name(name)
                        .ok_or_else(|| ParseError::UnknownFunction { name: name.to_string(), offset: start })?;
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.expect(b')')?;
                    Ok(Expr::new(ExprKind::Call(func, Box::new(arg)), start))
                } else if name == "t" {
                    Ok(Expr::new(ExprKind::Time, start))
                } else {
                    Err(ParseError::UnknownVariable { name: name.to_string(), offset: start })
                }
            }
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(ParseError::Syntax { offset: save, message: "malformed exponent".into() });
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        let value: f64 = text
            .parse()
            .map_err(|_| ParseError::Syntax { offset: start, message: format!("malformed number `{text}`") })?;
        Ok(Expr::new(ExprKind::Num(value), start))
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{}`", c as char)))
        }
    }
}
