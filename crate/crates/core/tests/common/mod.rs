#![allow(dead_code)]

use kjs_core::expr::{BinOp, Expr, Func, Var};
use rand::Rng;

/// Random expression tree of depth at most `depth` over the full grammar.
pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    if depth <= 1 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => Expr::x(),
            1 => Expr::y(),
            _ => Expr::num((rng.gen_range(-3.0f64..3.0) * 100.0).round() / 100.0),
        };
    }
    if rng.gen_bool(0.4) {
        let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
        Expr::unary(f, random_expr(rng, depth - 1))
    } else {
        let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];
        let op = ops[rng.gen_range(0..ops.len())];
        let l = random_expr(rng, depth - 1);
        let r = if op == BinOp::Pow && rng.gen_bool(0.6) {
            Expr::num(rng.gen_range(-3i32..=4) as f64)
        } else {
            random_expr(rng, depth - 1)
        };
        Expr::binary(op, l, r)
    }
}

/// Fourth-order central difference (Richardson-extrapolated) of `e` along
/// `var`, or `None` if `e` is not evaluable and moderate on the stencil.
pub fn richardson(e: &Expr, var: Var, x: f64, y: f64, h: f64) -> Option<f64> {
    let f = |d: f64| {
        let v = match var {
            Var::X => e.eval(x + d, y),
            Var::Y => e.eval(x, y + d),
        };
        v.ok().filter(|v| v.is_finite() && v.abs() < 1e6)
    };
    let central = |h: f64| Some((f(h)? - f(-h)?) / (2.0 * h));
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    Some((4.0 * d2 - d1) / 3.0)
}

/// Relative discrepancy between the symbolic derivative and finite
/// differences at a point, when both are well defined there. Points where
/// two step sizes disagree (a singularity nearby) are skipped.
pub fn ad_fd_error(e: &Expr, d: &Expr, var: Var, x: f64, y: f64) -> Option<f64> {
    e.eval(x, y).ok().filter(|v| v.is_finite() && v.abs() < 1e6)?;
    let ad = d.eval(x, y).ok().filter(|v| v.is_finite())?;
    let a = richardson(e, var, x, y, 1e-3)?;
    let b = richardson(e, var, x, y, 5e-4)?;
    let scale = 1.0f64.max(a.abs());
    if (a - b).abs() > 1e-8 * scale {
        return None;
    }
    Some((ad - b).abs() / scale)
}
