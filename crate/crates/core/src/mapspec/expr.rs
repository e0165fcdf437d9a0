use std::fmt;

use num_traits::{Pow, Zero};

use crate::scalar::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Expression over the coordinates `x0..xn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Integer power.
    Pow(Box<Expr>, i32),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(e, k) => e.eval(x).powi(*k),
            Expr::Min(a, b) => a.eval(x).min(b.eval(x)),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
        }
    }

    /// Exact evaluation. Constants are taken at their binary value. `None`
    /// on division by zero or a non-finite constant.
    pub fn eval_exact(&self, x: &[Rational]) -> Option<Rational> {
        Some(match self {
            Expr::Const(c) => Rational::from_float(*c)?,
            Expr::Var(i) => x[*i].clone(),
            Expr::Neg(e) => -e.eval_exact(x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval_exact(x)?, b.eval_exact(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b.is_zero() => return None,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(e, k) => {
                let base = e.eval_exact(x)?;
                if *k < 0 && base.is_zero() {
                    return None;
                }
                Pow::pow(base, *k)
            }
            Expr::Min(a, b) => {
                let (a, b) = (a.eval_exact(x)?, b.eval_exact(x)?);
                if b < a { b } else { a }
            }
            Expr::Max(a, b) => {
                let (a, b) = (a.eval_exact(x)?, b.eval_exact(x)?);
                if b > a { b } else { a }
            }
        })
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) => e.max_var(),
            Expr::Bin(_, a, b) | Expr::Min(a, b) | Expr::Max(a, b) => a.max_var().max(b.max_var()),
        }
    }

    // 1: sums, 2: products, 3: unary minus, 4: powers, 5: atoms.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 3)
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                a.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p + 1)
            }
            Expr::Pow(e, k) => {
                e.fmt_prec(f, 5)?;
                write!(f, "^{k}")
            }
            Expr::Min(a, b) | Expr::Max(a, b) => {
                let name = if matches!(self, Expr::Min(..)) { "min" } else { "max" };
                write!(f, "{name}(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ", ")?;
                b.fmt_prec(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
