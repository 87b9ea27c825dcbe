//! Symbolic differentiation with a light algebraic cleanup of the result.
//!
//! The cleanup only removes additive zeros and multiplicative ones and folds
//! operations whose operands are both literals; folding computes exactly the
//! same IEEE operation evaluation would, so values are unchanged.

use super::{BinOp, Expr, Func, Var};

pub(super) fn diff(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Unary(f, u) => {
            let du = diff(u, var);
            if is_zero(&du) {
                return Expr::Num(0.0);
            }
            let u = (**u).clone();
            let outer = match f {
                Func::Neg => return neg(du),
                Func::Sin => Expr::unary(Func::Cos, u),
                Func::Cos => neg(Expr::unary(Func::Sin, u)),
                Func::Sinh => Expr::unary(Func::Cosh, u),
                Func::Cosh => Expr::unary(Func::Sinh, u),
                Func::Tanh => {
                    let t = Expr::unary(Func::Tanh, u);
                    sub(Expr::Num(1.0), mul(t.clone(), t))
                }
                Func::Exp => Expr::unary(Func::Exp, u),
                Func::Log => return div(du, u),
                Func::Sqrt => {
                    return div(du, mul(Expr::Num(2.0), Expr::unary(Func::Sqrt, u)));
                }
                Func::Atan => return div(du, add(Expr::Num(1.0), mul(u.clone(), u))),
            };
            mul(outer, du)
        }
        Expr::Binary(op, l, r) => {
            let dl = diff(l, var);
            let dr = diff(r, var);
            let (l, r) = ((**l).clone(), (**r).clone());
            match op {
                BinOp::Add => add(dl, dr),
                BinOp::Sub => sub(dl, dr),
                BinOp::Mul => add(mul(dl, r.clone()), mul(l, dr)),
                BinOp::Div => {
                    if is_zero(&dr) {
                        div(dl, r)
                    } else {
                        div(sub(mul(dl, r.clone()), mul(l, dr)), mul(r.clone(), r))
                    }
                }
                BinOp::Pow => {
                    if is_zero(&dr) {
                        // d(u^c) = c u^(c-1) u'
                        let c1 = sub(r.clone(), Expr::Num(1.0));
                        mul(mul(r, pow(l, c1)), dl)
                    } else if is_zero(&dl) {
                        // d(c^v) = c^v log(c) v'
                        mul(mul(e.clone(), Expr::unary(Func::Log, l)), dr)
                    } else {
                        // u^v (v' log u + v u' / u)
                        let inner = add(
                            mul(dr, Expr::unary(Func::Log, l.clone())),
                            div(mul(r, dl), l),
                        );
                        mul(e.clone(), inner)
                    }
                }
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => op.apply(*x, *y).ok().filter(|v| v.is_finite()).map(Expr::Num),
        _ => None,
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    fold(BinOp::Add, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Add, a, b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return neg(b);
    }
    fold(BinOp::Sub, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Sub, a, b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::Num(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    fold(BinOp::Mul, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Mul, a, b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_one(&b) {
        return a;
    }
    fold(BinOp::Div, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Div, a, b))
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is_one(&b) {
        return a;
    }
    fold(BinOp::Pow, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Pow, a, b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Unary(Func::Neg, inner) => (*inner).clone(),
        other => Expr::unary(Func::Neg, other),
    }
}
