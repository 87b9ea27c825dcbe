//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := ["-"] power
//! power  := atom ["^" factor]
//! atom   := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers are `x`, `y`, the constant `pi`, and the functions of [`Func`].

use super::{BinOp, Expr, ExprError, Func, Var};

pub fn parse_expr(source: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: source.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error(&format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::unary(Func::Neg, self.power()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            // right-associative: the exponent is a full factor
            let exp = self.factor()?;
            Ok(Expr::binary(BinOp::Pow, base, exp))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.error(&format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax { offset: start, message: format!("bad number `{text}`") })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let save = self.pos;
        if self.eat(b'(') {
            let Some(func) = Func::from_name(name) else {
                return Err(ExprError::UnknownIdent { name: name.to_string(), offset: start });
            };
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)` after function argument"));
            }
            return Ok(Expr::unary(func, arg));
        }
        self.pos = save;
        match name {
            "x" => Ok(Expr::Var(Var::X)),
            "y" => Ok(Expr::Var(Var::Y)),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            _ if Func::from_name(name).is_some() => Err(ExprError::Syntax {
                offset: self.pos,
                message: format!("function `{name}` requires an argument"),
            }),
            _ => Err(ExprError::UnknownIdent { name: name.to_string(), offset: start }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable() {
        assert_eq!(parse_expr("x").unwrap(), Expr::Var(Var::X));
    }

    #[test]
    fn nested_structure() {
        let e = parse_expr("x*cosh(y/x)").unwrap();
        let want = Expr::binary(
            BinOp::Mul,
            Expr::x(),
            Expr::unary(Func::Cosh, Expr::binary(BinOp::Div, Expr::y(), Expr::x())),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn precedence_and_associativity() {
        let ev = |s: &str| parse_expr(s).unwrap().eval(0.0, 0.0).unwrap();
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("8/4/2"), 1.0);
        assert_eq!(ev("1-2-3"), -4.0);
        assert_eq!(ev("2*3+4*5"), 26.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("1.5e2 + .5 + 2E-1"), 150.7);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse_expr("x + foo(2)") {
            Err(ExprError::UnknownIdent { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 4);
            }
            other => panic!("{other:?}"),
        }
        match parse_expr("(x+1") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("z"), Err(ExprError::UnknownIdent { .. })));
        assert!(matches!(parse_expr(""), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("x y"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("1e"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("tan(x)"), Err(ExprError::UnknownIdent { .. })));
        assert!(matches!(parse_expr("sin"), Err(ExprError::Syntax { .. })));
    }
}
