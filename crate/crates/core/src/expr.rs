//! Coefficient expressions over `x`, `y` (torus coordinates) and `u`.
//!
//! The grammar covers constants, `+ - * /`, integer powers `^n`, unary
//! minus, `sin(...)`, `cos(...)` and the named constant `pi`. Expressions are
//! differentiated symbolically so that mechanical models get exact gradients.

use std::fmt;

use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    U,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("unexpected character {0:?} at offset {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unknown identifier {0:?}")]
    UnknownIdent(String),
    #[error("exponent must be an integer literal, got {0:?}")]
    BadExponent(String),
    #[error("trailing input at offset {0}")]
    Trailing(usize),
}

impl Expr {
    pub fn c(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn x() -> Self {
        Expr::Var(Var::X)
    }

    pub fn y() -> Self {
        Expr::Var(Var::Y)
    }

    pub fn u() -> Self {
        Expr::Var(Var::U)
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(ParseError::Trailing(p.pos));
        }
        Ok(e.simplify())
    }

    pub fn eval<T: Real>(&self, x: T, y: T, u: T) -> T {
        match self {
            Expr::Const(c) => T::from_f64(*c),
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::U) => u,
            Expr::Neg(a) => -a.eval(x, y, u),
            Expr::Add(a, b) => a.eval(x, y, u) + b.eval(x, y, u),
            Expr::Sub(a, b) => a.eval(x, y, u) - b.eval(x, y, u),
            Expr::Mul(a, b) => a.eval(x, y, u) * b.eval(x, y, u),
            Expr::Div(a, b) => a.eval(x, y, u) / b.eval(x, y, u),
            Expr::Pow(a, n) => a.eval(x, y, u).powi(*n),
            Expr::Sin(a) => a.eval(x, y, u).sin(),
            Expr::Cos(a) => a.eval(x, y, u).cos(),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn derivative(&self, v: Var) -> Expr {
        use Expr::*;
        let d = match self {
            Const(_) => Const(0.0),
            Var(w) => Const(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.derivative(v))),
            Add(a, b) => Add(Box::new(a.derivative(v)), Box::new(b.derivative(v))),
            Sub(a, b) => Sub(Box::new(a.derivative(v)), Box::new(b.derivative(v))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.derivative(v)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.derivative(v)))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.derivative(v)), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.derivative(v)))),
                )),
                Box::new(Pow(b.clone(), 2)),
            ),
            Pow(a, n) => Mul(
                Box::new(Mul(Box::new(Const(f64::from(*n))), Box::new(Pow(a.clone(), n - 1)))),
                Box::new(a.derivative(v)),
            ),
            Sin(a) => Mul(Box::new(Cos(a.clone())), Box::new(a.derivative(v))),
            Cos(a) => Neg(Box::new(Mul(Box::new(Sin(a.clone())), Box::new(a.derivative(v))))),
        };
        d.simplify()
    }

    /// Constant folding and removal of additive/multiplicative identities.
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) | Var(_) => self.clone(),
            Neg(a) => match a.simplify() {
                Const(c) => Const(-c),
                Neg(inner) => *inner,
                s => Neg(Box::new(s)),
            },
            Add(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p + q),
                (Const(z), s) | (s, Const(z)) if z == 0.0 => s,
                (s, t) => Add(Box::new(s), Box::new(t)),
            },
            Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p - q),
                (s, Const(z)) if z == 0.0 => s,
                (Const(z), t) if z == 0.0 => Neg(Box::new(t)).simplify(),
                (s, t) => Sub(Box::new(s), Box::new(t)),
            },
            Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p * q),
                (Const(z), _) | (_, Const(z)) if z == 0.0 => Const(0.0),
                (Const(o), s) | (s, Const(o)) if o == 1.0 => s,
                (s, t) => Mul(Box::new(s), Box::new(t)),
            },
            Div(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p / q),
                (Const(z), _) if z == 0.0 => Const(0.0),
                (s, Const(o)) if o == 1.0 => s,
                (s, t) => Div(Box::new(s), Box::new(t)),
            },
            Pow(a, n) => match (a.simplify(), *n) {
                (_, 0) => Const(1.0),
                (s, 1) => s,
                (Const(c), n) => Const(c.powi(n)),
                (s, n) => Pow(Box::new(s), n),
            },
            Sin(a) => match a.simplify() {
                Const(c) => Const(c.sin()),
                s => Sin(Box::new(s)),
            },
            Cos(a) => match a.simplify() {
                Const(c) => Const(c.cos()),
                s => Cos(Box::new(s)),
            },
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Var(Var::U) => write!(f, "u"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            if self.src.get(self.pos) == Some(&b'-') {
                self.pos += 1;
            }
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'.')
            {
                self.pos += 1;
            }
            let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
            let n: i32 = lit
                .parse()
                .map_err(|_| ParseError::BadExponent(lit.to_string()))?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let c = self.peek().ok_or(ParseError::UnexpectedEnd)?;
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < self.src.len() {
                let b = self.src[self.pos];
                let exp_sign = (b == b'-' || b == b'+')
                    && matches!(self.src.get(self.pos.wrapping_sub(1)), Some(b'e' | b'E'));
                if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
            return lit
                .parse()
                .map(Expr::Const)
                .map_err(|_| ParseError::UnexpectedChar(c as char, start));
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
            return match ident {
                "x" => Ok(Expr::x()),
                "y" => Ok(Expr::y()),
                "u" => Ok(Expr::u()),
                "pi" => Ok(Expr::c(std::f64::consts::PI)),
                "sin" | "cos" => {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    Ok(if ident == "sin" {
                        Expr::Sin(Box::new(arg))
                    } else {
                        Expr::Cos(Box::new(arg))
                    })
                }
                other => Err(ParseError::UnknownIdent(other.to_string())),
            };
        }
        Err(ParseError::UnexpectedChar(c as char, self.pos))
    }

    fn expect(&mut self, want: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(ParseError::UnexpectedChar(c as char, self.pos)),
            None => Err(ParseError::UnexpectedEnd),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(e: &Expr, x: f64, u: f64) -> f64 {
        e.eval(x, 0.0, u)
    }

    #[test]
    fn parses_precedence_and_functions() {
        let e = Expr::parse("-1 + cos(x) + 2*u^2 - 3/2").unwrap();
        let x = 0.7;
        let u = -1.3;
        assert!((ev(&e, x, u) - (-1.0 + x.cos() + 2.0 * u * u - 1.5)).abs() < 1e-15);
        let e = Expr::parse("sin(2*pi*x)*1e-1").unwrap();
        assert!((ev(&e, 0.25, 0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Expr::parse("tan(x)"), Err(ParseError::UnknownIdent(_))));
        assert!(matches!(Expr::parse("x^1.5"), Err(ParseError::BadExponent(_))));
        assert!(matches!(Expr::parse("(x"), Err(ParseError::UnexpectedEnd)));
        assert!(matches!(Expr::parse("x y"), Err(ParseError::Trailing(_))));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = Expr::parse("cos(x)*u^3 + sin(x*x)/(2 + cos(u))").unwrap();
        let dx = e.derivative(Var::X);
        let du = e.derivative(Var::U);
        for &(x, u) in &[(0.3, 0.2), (-1.1, 0.9), (2.5, -0.4)] {
            let h = 1e-6;
            let fdx = (ev(&e, x + h, u) - ev(&e, x - h, u)) / (2.0 * h);
            let fdu = (ev(&e, x, u + h) - ev(&e, x, u - h)) / (2.0 * h);
            assert!((ev(&dx, x, u) - fdx).abs() < 1e-8);
            assert!((ev(&du, x, u) - fdu).abs() < 1e-8);
        }
    }

    #[test]
    fn simplify_folds_constants() {
        let e = Expr::parse("0*x + 1*u + (2+3)").unwrap();
        assert_eq!(e, Expr::Add(Box::new(Expr::u()), Box::new(Expr::c(5.0))));
        assert!(!e.depends_on(Var::X));
        assert_eq!(Expr::parse("u").unwrap().derivative(Var::U).as_const(), Some(1.0));
    }
}
