//! A minimal expression language for model functions in scenario files.
//!
//! Grammar (usual precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | variable | call | '(' expr ')'
//! call   := name '(' expr (',' expr)* ')'
//! ```
//!
//! Variables are `t` (time), `x` (position or displacement) and `r` (density
//! or radius, alias `rho`). Functions: `abs`, `exp`, `min`, `max` (two or more
//! arguments), `pow(a, b)` and `bump(s)`, the smooth bump
//! `exp(1 - 1/(1 - s^2))` on `|s| < 1` and `0` elsewhere.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Min,
    Max,
    Pow,
    Bump,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable bindings for [`Expr::eval`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: f64,
    pub x: f64,
    pub r: f64,
}

/// `exp(1 - 1/(1 - s^2))` on `|s| < 1`, zero elsewhere; peak value 1 at 0.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Derivative of [`bump`].
pub fn bump_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        -2.0 * s / (d * d) * bump(s)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::R) => env.r,
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => pow(a.eval(env), b.eval(env)),
            Expr::Call(f, args) => match f {
                Func::Abs => args[0].eval(env).abs(),
                Func::Exp => args[0].eval(env).exp(),
                Func::Bump => bump(args[0].eval(env)),
                Func::Pow => pow(args[0].eval(env), args[1].eval(env)),
                Func::Min => args
                    .iter()
                    .map(|a| a.eval(env))
                    .fold(f64::INFINITY, f64::min),
                Func::Max => args
                    .iter()
                    .map(|a| a.eval(env))
                    .fold(f64::NEG_INFINITY, f64::max),
            },
        }
    }

    /// Whether the expression mentions `var` anywhere.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) => a.depends_on(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on(var) || b.depends_on(var),
            Expr::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Value of a variable-free expression.
    pub fn as_constant(&self) -> Option<f64> {
        if [Var::T, Var::X, Var::R].iter().any(|v| self.depends_on(*v)) {
            None
        } else {
            Some(self.eval(&Env::default()))
        }
    }
}

/// Largest degree [`Expr::polynomial_on_side`] will produce.
pub const MAX_POLY_DEGREE: usize = 4;

fn poly_add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (k, c) in a.iter().enumerate() {
        out[k] += c;
    }
    for (k, c) in b.iter().enumerate() {
        out[k] += sign * c;
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    if a.len() + b.len() - 1 > MAX_POLY_DEGREE + 1 {
        return None;
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Some(out)
}

fn pow_poly(base: &Expr, exp: &Expr, side: f64) -> Option<Vec<f64>> {
    let e = exp.as_constant()?;
    if e.fract() != 0.0 || !(0.0..=MAX_POLY_DEGREE as f64).contains(&e) {
        return None;
    }
    let p = base.polynomial_on_side(side)?;
    let mut out = vec![1.0];
    for _ in 0..e as usize {
        out = poly_mul(&out, &p)?;
    }
    Some(out)
}

impl Expr {
    /// Coefficients (ascending powers of `x`) of the expression restricted to
    /// the half line `side * x >= 0`, if it is a polynomial there of degree at
    /// most [`MAX_POLY_DEGREE`]. `abs` is resolved when its argument is
    /// `c * x`; anything else non-polynomial gives `None`.
    pub fn polynomial_on_side(&self, side: f64) -> Option<Vec<f64>> {
        if self.depends_on(Var::T) || self.depends_on(Var::R) {
            return None;
        }
        if let Some(c) = self.as_constant() {
            return c.is_finite().then(|| vec![c]);
        }
        match self {
            Expr::Var(Var::X) => Some(vec![0.0, 1.0]),
            Expr::Neg(a) => Some(a.polynomial_on_side(side)?.iter().map(|c| -c).collect()),
            Expr::Add(a, b) => Some(poly_add(
                &a.polynomial_on_side(side)?,
                &b.polynomial_on_side(side)?,
                1.0,
            )),
            Expr::Sub(a, b) => Some(poly_add(
                &a.polynomial_on_side(side)?,
                &b.polynomial_on_side(side)?,
                -1.0,
            )),
            Expr::Mul(a, b) => poly_mul(&a.polynomial_on_side(side)?, &b.polynomial_on_side(side)?),
            Expr::Div(a, b) => {
                let d = b.as_constant()?;
                Some(a.polynomial_on_side(side)?.iter().map(|c| c / d).collect())
            }
            Expr::Pow(a, b) => pow_poly(a, b, side),
            Expr::Call(Func::Pow, args) => pow_poly(&args[0], &args[1], side),
            Expr::Call(Func::Abs, args) => {
                let p = args[0].polynomial_on_side(side)?;
                let linear_through_zero = p.len() <= 2 && p[0] == 0.0;
                linear_through_zero.then(|| {
                    let c = p.get(1).copied().unwrap_or(0.0);
                    vec![0.0, side * c.abs()]
                })
            }
            _ => None,
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Var::T => "t",
            Var::X => "x",
            Var::R => "r",
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression {
            column: self.pos + 1,
            message: message.to_string(),
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src;
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                p += 1;
            }
            if p < bytes.len() && bytes[p].is_ascii_digit() {
                while p < bytes.len() && bytes[p].is_ascii_digit() {
                    p += 1;
                }
                self.pos = p;
            }
        }
        let text = std::str::from_utf8(&bytes[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Expression {
                column: start + 1,
                message: format!("malformed number '{text}'"),
            })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if self.peek() == Some(b'(') {
            let func = match name {
                "abs" => Func::Abs,
                "exp" => Func::Exp,
                "min" => Func::Min,
                "max" => Func::Max,
                "pow" => Func::Pow,
                "bump" => Func::Bump,
                _ => {
                    return Err(Error::Expression {
                        column: start + 1,
                        message: format!("unknown function '{name}'"),
                    })
                }
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected ')' after arguments"));
            }
            let ok = match func {
                Func::Abs | Func::Exp | Func::Bump => args.len() == 1,
                Func::Pow => args.len() == 2,
                Func::Min | Func::Max => args.len() >= 2,
            };
            if !ok {
                return Err(Error::Expression {
                    column: start + 1,
                    message: format!("wrong number of arguments for '{name}'"),
                });
            }
            return Ok(Expr::Call(func, args));
        }
        match name {
            "t" => Ok(Expr::Var(Var::T)),
            "x" => Ok(Expr::Var(Var::X)),
            "r" | "rho" => Ok(Expr::Var(Var::R)),
            _ => Err(Error::Expression {
                column: start + 1,
                message: format!("unknown variable '{name}'"),
            }),
        }
    }
}
