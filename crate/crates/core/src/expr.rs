//! The map-definition language.
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , integer ] ;
//! primary = number | "x" | "exp" , "(" , expr , ")" | "(" , expr , ")" ;
//! integer = digit , { digit } ;
//! number  = digit , { digit } , [ "." , digit , { digit } ] ,
//!           [ ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ] ;
//! ```
//!
//! Whitespace between tokens is ignored. Binary operators associate to the
//! left; `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{EvalError, ParseError};
use crate::jet::Jet;
use crate::scalar::{decimal_is_exact, Scalar};

const MAX_EXPONENT: u32 = 4096;
const MAX_NESTING: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// A nonnegative finite literal. Negative values are written as `Neg`.
    Const(f64),
    Var,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    IntPow(Box<Expr>, u32),
    Exp(Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    /// Literal constant; negative values become `Neg(Const(|v|))`.
    pub fn constant(v: f64) -> Expr {
        assert!(v.is_finite(), "non-finite constant");
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Const(-v)))
        } else {
            Expr::Const(v)
        }
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    pub fn powi(self, n: u32) -> Expr {
        Expr::IntPow(Box::new(self), n)
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Expr::IntPow(a, _) | Expr::Exp(a) | Expr::Neg(a) => 1 + a.node_count(),
        }
    }

    /// Replace every occurrence of `x` by `inner`, i.e. compose `self ∘ inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        self.rebuild(&|e| match e {
            Expr::Var => Some(inner.clone()),
            _ => None,
        })
    }

    /// Apply `f` to every literal.
    pub fn map_constants(&self, f: &dyn Fn(f64) -> f64) -> Expr {
        self.rebuild(&|e| match e {
            Expr::Const(c) => Some(Expr::constant(f(*c))),
            _ => None,
        })
    }

    fn rebuild(&self, leaf: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = leaf(self) {
            return e;
        }
        let b = |e: &Expr| Box::new(e.rebuild(leaf));
        match self {
            Expr::Const(_) | Expr::Var => self.clone(),
            Expr::Add(x, y) => Expr::Add(b(x), b(y)),
            Expr::Sub(x, y) => Expr::Sub(b(x), b(y)),
            Expr::Mul(x, y) => Expr::Mul(b(x), b(y)),
            Expr::Div(x, y) => Expr::Div(b(x), b(y)),
            Expr::IntPow(x, n) => Expr::IntPow(b(x), *n),
            Expr::Exp(x) => Expr::Exp(b(x)),
            Expr::Neg(x) => Expr::Neg(b(x)),
        }
    }

    /// Every denominator subexpression, outermost first.
    pub fn denominators(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out
    }

    fn collect_denominators<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Const(_) | Expr::Var => {}
            Expr::Div(a, b) => {
                out.push(b);
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Expr::IntPow(a, _) | Expr::Exp(a) | Expr::Neg(a) => a.collect_denominators(out),
        }
    }

    pub fn eval<T: Scalar>(&self, x: T) -> Result<T, EvalError> {
        Ok(match self {
            Expr::Const(c) => T::literal(*c, decimal_is_exact(*c)),
            Expr::Var => x,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => a.eval(x)?.checked_div(b.eval(x)?)?,
            Expr::IntPow(a, n) => a.eval(x)?.powi(*n),
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Neg(a) => -a.eval(x)?,
        })
    }

    /// Evaluate with the jet `x` substituted for the variable. With the
    /// identity jet this gives the derivatives of the expression; with any
    /// other jet it gives those of the composition.
    pub fn eval_jet<T: Scalar>(&self, x: &Jet<T>) -> Result<Jet<T>, EvalError> {
        let k = x.order();
        Ok(match self {
            Expr::Const(c) => Jet::constant(T::literal(*c, decimal_is_exact(*c)), k)?,
            Expr::Var => x.clone(),
            Expr::Add(a, b) => a.eval_jet(x)? + b.eval_jet(x)?,
            Expr::Sub(a, b) => a.eval_jet(x)? - b.eval_jet(x)?,
            Expr::Mul(a, b) => a.eval_jet(x)? * b.eval_jet(x)?,
            Expr::Div(a, b) => a.eval_jet(x)?.checked_div(&b.eval_jet(x)?)?,
            Expr::IntPow(a, n) => a.eval_jet(x)?.powi(*n),
            Expr::Exp(a) => a.eval_jet(x)?.exp(),
            Expr::Neg(a) => -a.eval_jet(x)?,
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::IntPow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Const(_) | Expr::Var | Expr::Exp(_) => 5,
        }
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, p: u8| {
            a.write_operand(f, p)?;
            write!(f, " {op} ")?;
            b.write_operand(f, p + 1)
        };
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "x"),
            Expr::Add(a, b) => bin(f, a, "+", b, 1),
            Expr::Sub(a, b) => bin(f, a, "-", b, 1),
            Expr::Mul(a, b) => bin(f, a, "*", b, 2),
            Expr::Div(a, b) => bin(f, a, "/", b, 2),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_operand(f, 3)
            }
            Expr::IntPow(a, n) => {
                a.write_operand(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $v:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$v(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Parse an expression in the map language.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected '{}'", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn error(&self, message: String) -> ParseError {
        ParseError {
            position: self.pos,
            message,
        }
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
            Err(self.error(match self.src.get(self.pos) {
                Some(&got) => format!("expected '{}', found '{}'", c as char, got as char),
                None => format!("expected '{}', found end of input", c as char),
            }))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error("expression nested too deeply".to_string()));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = lhs * self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = lhs / self.unary()?;
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            self.enter()?;
            let e = -self.unary()?;
            self.depth -= 1;
            return Ok(e);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected a nonnegative integer exponent".to_string()));
            }
            let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            let n: u32 = match text.parse() {
                Ok(n) if n <= MAX_EXPONENT => n,
                _ => {
                    self.pos = start;
                    return Err(self.error(format!("exponent must be at most {MAX_EXPONENT}")));
                }
            };
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'x') => {
                self.pos += 1;
                Ok(Expr::Var)
            }
            Some(b'e') if self.src[self.pos..].starts_with(b"exp") => {
                self.pos += 3;
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e.exp())
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) => Err(self.error(format!("unexpected '{}'", c as char))),
            None => Err(self.error("unexpected end of input".to_string())),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos > s
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            if !digits(self) {
                return Err(self.error("expected digits after '.'".to_string()));
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                // Not an exponent, e.g. the start of `exp`.
                self.pos = mark;
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Const(v)),
            _ => {
                self.pos = start;
                Err(self.error(format!("invalid number '{text}'")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(usize),
    Var,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, u32),
    Exp(usize),
    Neg(usize),
}

/// Flattened post-order form of an expression for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    consts: Vec<(f64, bool)>,
}

// Identical subtrees share one slot.
type Key = (u8, u64, u64);

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut t = Tape {
            ops: Vec::with_capacity(e.node_count()),
            consts: Vec::new(),
        };
        t.push(e, &mut BTreeMap::new());
        t
    }

    fn push(&mut self, e: &Expr, seen: &mut BTreeMap<Key, usize>) -> usize {
        let w = |i: usize| i as u64;
        let (key, op) = match e {
            Expr::Const(c) => ((0, c.to_bits(), 0), None),
            Expr::Var => ((1, 0, 0), Some(Op::Var)),
            Expr::Add(a, b) => {
                let (a, b) = (self.push(a, seen), self.push(b, seen));
                ((2, w(a), w(b)), Some(Op::Add(a, b)))
            }
            Expr::Sub(a, b) => {
                let (a, b) = (self.push(a, seen), self.push(b, seen));
                ((3, w(a), w(b)), Some(Op::Sub(a, b)))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.push(a, seen), self.push(b, seen));
                ((4, w(a), w(b)), Some(Op::Mul(a, b)))
            }
            Expr::Div(a, b) => {
                let (a, b) = (self.push(a, seen), self.push(b, seen));
                ((5, w(a), w(b)), Some(Op::Div(a, b)))
            }
            Expr::IntPow(a, n) => {
                let a = self.push(a, seen);
                ((6, w(a), u64::from(*n)), Some(Op::Pow(a, *n)))
            }
            Expr::Exp(a) => {
                let a = self.push(a, seen);
                ((7, w(a), 0), Some(Op::Exp(a)))
            }
            Expr::Neg(a) => {
                let a = self.push(a, seen);
                ((8, w(a), 0), Some(Op::Neg(a)))
            }
        };
        if let Some(&slot) = seen.get(&key) {
            return slot;
        }
        let op = op.unwrap_or_else(|| {
            let Expr::Const(c) = e else { unreachable!() };
            self.consts.push((*c, decimal_is_exact(*c)));
            Op::Const(self.consts.len() - 1)
        });
        self.ops.push(op);
        seen.insert(key, self.ops.len() - 1);
        self.ops.len() - 1
    }

    pub fn eval<T: Scalar>(&self, x: T) -> Result<T, EvalError> {
        let mut r: Vec<T> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(i) => T::literal(self.consts[i].0, self.consts[i].1),
                Op::Var => x,
                Op::Add(a, b) => r[a] + r[b],
                Op::Sub(a, b) => r[a] - r[b],
                Op::Mul(a, b) => r[a] * r[b],
                Op::Div(a, b) => r[a].checked_div(r[b])?,
                Op::Pow(a, n) => r[a].powi(n),
                Op::Exp(a) => r[a].exp(),
                Op::Neg(a) => -r[a],
            };
            r.push(v);
        }
        Ok(r[r.len() - 1])
    }

    pub fn eval_jet<T: Scalar>(&self, x: &Jet<T>) -> Result<Jet<T>, EvalError> {
        let k = x.order();
        let mut r: Vec<Jet<T>> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(i) => Jet::constant(T::literal(self.consts[i].0, self.consts[i].1), k)?,
                Op::Var => x.clone(),
                Op::Add(a, b) => r[a].clone() + r[b].clone(),
                Op::Sub(a, b) => r[a].clone() - r[b].clone(),
                Op::Mul(a, b) => r[a].product(&r[b]),
                Op::Div(a, b) => r[a].checked_div(&r[b])?,
                Op::Pow(a, n) => r[a].powi(n),
                Op::Exp(a) => r[a].exp(),
                Op::Neg(a) => -r[a].clone(),
            };
            r.push(v);
        }
        Ok(r.pop().expect("tape is never empty"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn simple_division() {
        assert_eq!(
            p("x/8"),
            Expr::Div(Box::new(Expr::Var), Box::new(Expr::Const(8.0)))
        );
    }

    #[test]
    fn three_term_sum_is_left_nested() {
        let e = p("x/16 + x^2/32 + 29/32");
        match e {
            Expr::Add(lhs, rhs) => {
                assert!(matches!(*lhs, Expr::Add(..)));
                assert_eq!(*rhs, Expr::Const(29.0) / Expr::Const(32.0));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn unbalanced_parenthesis_position() {
        let err = parse_expr("x/(").unwrap_err();
        assert_eq!(err.position, 3);
    }

    #[test]
    fn precedence() {
        assert_eq!(p("-x^2"), -(Expr::Var.powi(2)));
        assert_eq!(p("2*-x"), Expr::Const(2.0) * -Expr::Var);
        assert_eq!(
            p("1-2-3"),
            (Expr::Const(1.0) - Expr::Const(2.0)) - Expr::Const(3.0)
        );
        assert_eq!(p("exp(x)^2"), Expr::Var.exp().powi(2));
        assert_eq!(p("2e-3*x"), Expr::Const(2e-3) * Expr::Var);
    }

    #[test]
    fn rejects_bad_input() {
        for s in [
            "", "x^-1", "x^2^3", "y", "2x", "exp x", "1.", "x^1.5", "((x)",
        ] {
            assert!(parse_expr(s).is_err(), "accepted {s:?}");
        }
    }

    #[test]
    fn round_trip_of_builder_trees() {
        let trees = [
            Expr::Var + (Expr::Var + Expr::Const(1.0)),
            Expr::Var - (Expr::Var - Expr::Var),
            Expr::Var / (Expr::Var * Expr::Const(3.0)),
            -(-Expr::Var),
            (Expr::Var.powi(2)).powi(3),
            -(Expr::Var + Expr::Const(0.1)).exp(),
            Expr::constant(-0.25) * Expr::Var,
            Expr::Var - Expr::constant(-2.0),
        ];
        for t in trees {
            let s = t.to_string();
            assert_eq!(p(&s), t, "round trip through {s:?}");
        }
    }

    #[test]
    fn tape_matches_tree() {
        let e = p("x/16 + x^2/32 + 29/32 - exp(-x)*3/(2+x)");
        let t = Tape::compile(&e);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(t.eval(x).unwrap(), e.eval(x).unwrap());
            let j = Jet::variable(x, 4).unwrap();
            assert_eq!(t.eval_jet(&j).unwrap(), e.eval_jet(&j).unwrap());
        }
    }

    #[test]
    fn substitution_composes() {
        let f2 = p("x/8 + x^2/32");
        let ff = f2.substitute(&f2);
        let x = 0.7;
        let y = f2.eval(x).unwrap();
        assert_eq!(ff.eval(x).unwrap(), f2.eval(y).unwrap());
    }
}
