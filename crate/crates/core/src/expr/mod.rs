//! Scalar field expressions in the chart coordinates `x` and `y`.
//!
//! Expressions are parsed from a small infix grammar, evaluated in double
//! precision and differentiated symbolically. The derivative of an [`Expr`]
//! is again an [`Expr`], so derivatives of any order are available.

mod diff;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse_expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

/// Coordinate variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Atan,
    Neg,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Atan,
        Func::Neg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Neg => "neg",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply(self, v: f64) -> Result<f64, ExprError> {
        let out = match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Exp => v.exp(),
            Func::Log => {
                if v <= 0.0 {
                    return Err(ExprError::Domain(format!("log of non-positive value {v}")));
                }
                v.ln()
            }
            Func::Sqrt => {
                if v < 0.0 {
                    return Err(ExprError::Domain(format!("sqrt of negative value {v}")));
                }
                v.sqrt()
            }
            Func::Atan => v.atan(),
            Func::Neg => -v,
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn apply(self, l: f64, r: f64) -> Result<f64, ExprError> {
        match self {
            BinOp::Add => Ok(l + r),
            BinOp::Sub => Ok(l - r),
            BinOp::Mul => Ok(l * r),
            BinOp::Div => {
                if r == 0.0 {
                    Err(ExprError::Domain("division by zero".into()))
                } else {
                    Ok(l / r)
                }
            }
            BinOp::Pow => pow(l, r),
        }
    }
}

fn pow(base: f64, exp: f64) -> Result<f64, ExprError> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        if base == 0.0 && exp < 0.0 {
            return Err(ExprError::Domain("zero raised to a negative power".into()));
        }
        return Ok(base.powi(exp as i32));
    }
    if base < 0.0 {
        return Err(ExprError::Domain(format!(
            "negative base {base} with non-integer exponent {exp}"
        )));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(ExprError::Domain("zero raised to a negative power".into()));
    }
    Ok(base.powf(exp))
}

/// Immutable expression tree. Cloning is cheap (shared subtrees).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Unary(Func, Arc<Expr>),
    Binary(BinOp, Arc<Expr>, Arc<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    pub fn unary(f: Func, e: Expr) -> Expr {
        Expr::Unary(f, Arc::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Arc::new(l), Arc::new(r))
    }

    /// Evaluates at `(x, y)`. Non-finite results are reported as domain errors.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Unary(f, e) => f.apply(e.eval(x, y)?)?,
            Expr::Binary(op, l, r) => op.apply(l.eval(x, y)?, r.eval(x, y)?)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!(
                "non-finite value while evaluating `{self}` at ({x}, {y})"
            )))
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, var: Var) -> Expr {
        diff::diff(self, var)
    }

    /// `Some(value)` if the expression does not depend on `x` or `y`.
    pub fn constant_value(&self) -> Option<f64> {
        if self.depends_on(Var::X) || self.depends_on(Var::Y) {
            None
        } else {
            self.eval(0.0, 0.0).ok()
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Unary(_, e) => e.depends_on(var),
            Expr::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Unary(_, e) => 1 + e.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

/// Prints a fully parenthesised form that parses back to an
/// evaluation-equivalent tree. Literals use the shortest round-trip repr.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Unary(func, e) => write!(f, "{}({})", func.name(), e),
            Expr::Binary(op, l, r) => write!(f, "({} {} {})", l, op.symbol(), r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let e = parse_expr("x^2+y").unwrap();
        assert_eq!(e.eval(2.0, 3.0).unwrap(), 7.0);
        assert_eq!(parse_expr("cosh(0)").unwrap().eval(0.3, 0.1).unwrap(), 1.0);
        let e = parse_expr("2/(1-x^2-y^2)").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 2.0);
        // 2 / (1 - 0.25) = 8/3
        assert!((e.eval(0.5, 0.0).unwrap() - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let e = parse_expr("log(x)").unwrap();
        assert!(matches!(e.eval(-1.0, 0.0), Err(ExprError::Domain(_))));
        let e = parse_expr("1/(x-y)").unwrap();
        assert!(matches!(e.eval(1.0, 1.0), Err(ExprError::Domain(_))));
        let e = parse_expr("sqrt(y)").unwrap();
        assert!(matches!(e.eval(0.0, -2.0), Err(ExprError::Domain(_))));
        let e = parse_expr("x^0.5").unwrap();
        assert!(e.eval(-4.0, 0.0).is_err());
        assert_eq!(parse_expr("x^3").unwrap().eval(-2.0, 0.0).unwrap(), -8.0);
        assert!(parse_expr("exp(x)").unwrap().eval(1000.0, 0.0).is_err());
    }

    #[test]
    fn constant_detection() {
        assert_eq!(parse_expr("2*pi").unwrap().constant_value(), Some(std::f64::consts::TAU));
        assert_eq!(parse_expr("x-x").unwrap().constant_value(), None);
    }

    #[test]
    fn display_reparses() {
        for src in ["x*cosh(y/x)", "-x^2", "2^-1", "1e-5*y", "neg(3)-(-2)"] {
            let e = parse_expr(src).unwrap();
            let back = parse_expr(&e.to_string()).unwrap();
            for &(x, y) in &[(0.7, 0.3), (1.3, -0.4)] {
                assert_eq!(e.eval(x, y).unwrap(), back.eval(x, y).unwrap(), "{src}");
            }
        }
    }
}
