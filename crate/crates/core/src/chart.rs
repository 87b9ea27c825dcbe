//! Local model of a Killing submersion over a planar chart.
//!
//! The ambient metric is
//! `λ²(dx² + dy²) + μ²(dt − λ(a dx + b dy))²`, with conformal factor `λ`,
//! Killing length `μ`, and connection coefficients `a`, `b` tied to the
//! bundle curvature `τ` by `(λb)_x − (λa)_y = 2τλ²/μ`. Heights of graphs are
//! measured from the coordinate section `t = 0`.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, ExprError, Var};
use crate::geom::Point;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("field `{field}` at ({}, {}): {source}", point.x, point.y)]
    Eval {
        field: &'static str,
        point: Point,
        #[source]
        source: ExprError,
    },
    #[error("field `{field}` is not positive at ({}, {}): value {value}", point.x, point.y)]
    NonPositive { field: &'static str, point: Point, value: f64 },
    #[error("field `{field}` is not {period}-periodic in x: defect {defect:e} at ({}, {})", point.x, point.y)]
    NotPeriodic { field: &'static str, period: f64, defect: f64, point: Point },
    #[error("invalid region: {0}")]
    Region(String),
    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
}

/// Chart region in the `(x, y)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl Region {
    pub fn validate(&self) -> Result<(), ChartError> {
        match *self {
            Region::Rect { x0, x1, y0, y1 } if x0 < x1 && y0 < y1 => Ok(()),
            Region::Disk { r, .. } if r > 0.0 => Ok(()),
            _ => Err(ChartError::Region(format!("{self:?}"))),
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Region::Rect { x0, x1, y0, y1 } => (Point::new(x0, y0), Point::new(x1, y1)),
            Region::Disk { cx, cy, r } => (Point::new(cx - r, cy - r), Point::new(cx + r, cy + r)),
        }
    }

    /// Closed containment with a relative slack of `1e-12`. In periodic
    /// charts the `x` bounds of a rectangle are not enforced.
    pub fn contains(&self, p: Point, periodic: bool) -> bool {
        match *self {
            Region::Rect { x0, x1, y0, y1 } => {
                let sx = 1e-12 * (x1 - x0);
                let sy = 1e-12 * (y1 - y0);
                (periodic || (p.x >= x0 - sx && p.x <= x1 + sx)) && p.y >= y0 - sy && p.y <= y1 + sy
            }
            Region::Disk { cx, cy, r } => p.dist(Point::new(cx, cy)) <= r * (1.0 + 1e-12),
        }
    }

    /// Cell-centre sample grid of `n × n` points; for disks only the points
    /// strictly inside are kept.
    pub fn grid(&self, n: usize) -> Vec<Point> {
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = Point::new(
                    lo.x + (i as f64 + 0.5) * (hi.x - lo.x) / n as f64,
                    lo.y + (j as f64 + 0.5) * (hi.y - lo.y) / n as f64,
                );
                match *self {
                    Region::Disk { cx, cy, r } if p.dist(Point::new(cx, cy)) >= r => {}
                    _ => out.push(p),
                }
            }
        }
        out
    }
}

/// An expression together with its value when it is constant.
#[derive(Debug, Clone)]
pub struct Field {
    expr: Expr,
    constant: Option<f64>,
}

impl Field {
    pub fn new(expr: Expr) -> Self {
        let constant = expr.constant_value();
        Field { expr, constant }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn constant(&self) -> Option<f64> {
        self.constant
    }

    #[inline]
    pub fn eval(&self, p: Point) -> Result<f64, ExprError> {
        match self.constant {
            Some(v) => Ok(v),
            None => self.expr.eval(p.x, p.y),
        }
    }

    fn partials(&self) -> (Field, Field) {
        (Field::new(self.expr.diff(Var::X)), Field::new(self.expr.diff(Var::Y)))
    }
}

/// The five scalar fields of the local model on a planar region.
#[derive(Debug, Clone)]
pub struct SubmersionChart {
    pub region: Region,
    /// Period of the identification `x ~ x + P`, if any.
    pub period: Option<f64>,
    lambda: Field,
    mu: Field,
    tau: Field,
    a: Field,
    b: Field,
    lambda_x: Field,
    lambda_y: Field,
    mu_x: Field,
    mu_y: Field,
    rho: Field,
    rho_x: Field,
    rho_y: Field,
}

/// Values of the metric data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartSample {
    pub lambda: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
}

impl SubmersionChart {
    pub fn new(
        region: Region,
        period: Option<f64>,
        lambda: Expr,
        mu: Expr,
        tau: Expr,
        a: Expr,
        b: Expr,
    ) -> Result<Self, ChartError> {
        region.validate()?;
        if let Some(p) = period {
            match region {
                Region::Rect { x0, x1, .. } if p > 0.0 && ((x1 - x0) - p).abs() <= 1e-9 * p => {}
                _ => {
                    return Err(ChartError::Region(format!(
                        "periodic charts need a rectangle of x-width equal to the period {p}"
                    )))
                }
            }
        }
        let rho = Expr::binary(crate::expr::BinOp::Mul, lambda.clone(), mu.clone());
        let lambda = Field::new(lambda);
        let mu = Field::new(mu);
        let rho = Field::new(rho);
        let (lambda_x, lambda_y) = lambda.partials();
        let (mu_x, mu_y) = mu.partials();
        let (rho_x, rho_y) = rho.partials();
        Ok(SubmersionChart {
            region,
            period,
            lambda,
            mu,
            tau: Field::new(tau),
            a: Field::new(a),
            b: Field::new(b),
            lambda_x,
            lambda_y,
            mu_x,
            mu_y,
            rho,
            rho_x,
            rho_y,
        })
    }

    /// Flat chart `λ = μ = 1`, `τ = a = b = 0` on a region.
    pub fn flat(region: Region, period: Option<f64>) -> Result<Self, ChartError> {
        let one = Expr::num(1.0);
        let zero = Expr::num(0.0);
        Self::new(region, period, one.clone(), one, zero.clone(), zero.clone(), zero)
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.region.contains(p, self.is_periodic())
    }

    pub fn lambda_expr(&self) -> &Expr {
        self.lambda.expr()
    }
    pub fn mu_expr(&self) -> &Expr {
        self.mu.expr()
    }
    pub fn tau_expr(&self) -> &Expr {
        self.tau.expr()
    }
    pub fn a_expr(&self) -> &Expr {
        self.a.expr()
    }
    pub fn b_expr(&self) -> &Expr {
        self.b.expr()
    }

    /// True when `λ`, `μ`, `a`, `b` are all constant, so that element
    /// integrands are constant on every triangle.
    pub fn is_homogeneous(&self) -> bool {
        [&self.lambda, &self.mu, &self.a, &self.b].iter().all(|f| f.constant().is_some())
    }

    fn ev(&self, field: &'static str, f: &Field, p: Point) -> Result<f64, ChartError> {
        f.eval(p).map_err(|source| ChartError::Eval { field, point: p, source })
    }

    pub fn lambda(&self, p: Point) -> Result<f64, ChartError> {
        self.ev("lambda", &self.lambda, p)
    }

    pub fn mu(&self, p: Point) -> Result<f64, ChartError> {
        self.ev("mu", &self.mu, p)
    }

    pub fn tau(&self, p: Point) -> Result<f64, ChartError> {
        self.ev("tau", &self.tau, p)
    }

    pub fn sample(&self, p: Point) -> Result<ChartSample, ChartError> {
        Ok(ChartSample {
            lambda: self.lambda(p)?,
            mu: self.mu(p)?,
            a: self.ev("a", &self.a, p)?,
            b: self.ev("b", &self.b, p)?,
        })
    }

    /// Conformal factor `ρ = λμ` of the μ-metric.
    pub fn rho(&self, p: Point) -> Result<f64, ChartError> {
        self.ev("rho", &self.rho, p)
    }

    pub fn rho_grad(&self, p: Point) -> Result<Point, ChartError> {
        Ok(Point::new(self.ev("rho_x", &self.rho_x, p)?, self.ev("rho_y", &self.rho_y, p)?))
    }

    pub fn lambda_grad(&self, p: Point) -> Result<Point, ChartError> {
        Ok(Point::new(
            self.ev("lambda_x", &self.lambda_x, p)?,
            self.ev("lambda_y", &self.lambda_y, p)?,
        ))
    }

    pub fn mu_grad(&self, p: Point) -> Result<Point, ChartError> {
        Ok(Point::new(self.ev("mu_x", &self.mu_x, p)?, self.ev("mu_y", &self.mu_y, p)?))
    }

    /// Maps `x` into the fundamental interval of a periodic chart.
    pub fn wrap(&self, p: Point) -> Point {
        match (self.period, self.region) {
            (Some(period), Region::Rect { x0, .. }) => {
                Point::new(x0 + (p.x - x0).rem_euclid(period), p.y)
            }
            _ => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub max_defect: f64,
    pub worst_point: Point,
    pub min_lambda: f64,
    pub min_mu: f64,
    pub samples: usize,
}

/// Samples `|(λb)_x − (λa)_y − 2τλ²/μ|` on a `grid_n × grid_n` grid using
/// symbolic derivatives, and checks positivity and periodicity of the fields.
pub fn validate_chart(c: &SubmersionChart, grid_n: usize) -> Result<CompatibilityReport, ChartError> {
    if grid_n < 2 {
        return Err(ChartError::GridTooSmall(grid_n));
    }
    let mul = |l: &Expr, r: &Expr| Expr::binary(crate::expr::BinOp::Mul, l.clone(), r.clone());
    let lb_x = Field::new(mul(c.lambda.expr(), c.b.expr()).diff(Var::X));
    let la_y = Field::new(mul(c.lambda.expr(), c.a.expr()).diff(Var::Y));

    let mut report = CompatibilityReport {
        max_defect: 0.0,
        worst_point: Point::default(),
        min_lambda: f64::INFINITY,
        min_mu: f64::INFINITY,
        samples: 0,
    };
    for p in c.region.grid(grid_n) {
        let lambda = c.lambda(p)?;
        let mu = c.mu(p)?;
        if lambda <= 0.0 {
            return Err(ChartError::NonPositive { field: "lambda", point: p, value: lambda });
        }
        if mu <= 0.0 {
            return Err(ChartError::NonPositive { field: "mu", point: p, value: mu });
        }
        let tau = c.tau(p)?;
        let defect =
            (c.ev("(lambda b)_x", &lb_x, p)? - c.ev("(lambda a)_y", &la_y, p)? - 2.0 * tau * lambda * lambda / mu)
                .abs();
        if defect > report.max_defect || report.samples == 0 {
            report.max_defect = defect;
            report.worst_point = p;
        }
        report.min_lambda = report.min_lambda.min(lambda);
        report.min_mu = report.min_mu.min(mu);
        report.samples += 1;

        if let Some(period) = c.period {
            let q = Point::new(p.x + period, p.y);
            let fields: [(&'static str, &Field); 5] =
                [("lambda", &c.lambda), ("mu", &c.mu), ("tau", &c.tau), ("a", &c.a), ("b", &c.b)];
            for (name, f) in fields {
                let (u, v) = (c.ev(name, f, p)?, c.ev(name, f, q)?);
                let defect = (u - v).abs();
                if defect > 1e-9 * (1.0 + u.abs()) {
                    return Err(ChartError::NotPeriodic { field: name, period, defect, point: p });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn chart(l: &str, m: &str, t: &str, a: &str, b: &str) -> SubmersionChart {
        let region = Region::Rect { x0: 0.5, x1: 2.0, y0: -1.0, y1: 1.0 };
        let p = |s: &str| parse_expr(s).unwrap();
        SubmersionChart::new(region, None, p(l), p(m), p(t), p(a), p(b)).unwrap()
    }

    #[test]
    fn flat_has_zero_defect() {
        let r = validate_chart(&chart("1", "1", "0", "0", "0"), 8).unwrap();
        assert_eq!(r.max_defect, 0.0);
        assert_eq!(r.samples, 64);
    }

    #[test]
    fn heisenberg_gauge_is_compatible() {
        // d/dx(t x) - d/dy(-t y) = 2t = 2 tau lambda^2 / mu
        let r = validate_chart(&chart("1", "1", "0.5", "-0.5*y", "0.5*x"), 16).unwrap();
        assert!(r.max_defect < 1e-15);
        let bad = validate_chart(&chart("1", "1", "0.5", "0", "0"), 16).unwrap();
        assert!((bad.max_defect - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_fields_rejected() {
        let err = validate_chart(&chart("1", "x-1", "0", "0", "0"), 8).unwrap_err();
        assert!(matches!(err, ChartError::NonPositive { field: "mu", .. }));
    }

    #[test]
    fn evaluation_error_reports_point() {
        let err = validate_chart(&chart("log(y)", "1", "0", "0", "0"), 8).unwrap_err();
        assert!(matches!(err, ChartError::Eval { field: "lambda", .. }), "{err}");
    }

    #[test]
    fn small_grid_rejected() {
        assert!(matches!(
            validate_chart(&chart("1", "1", "0", "0", "0"), 1),
            Err(ChartError::GridTooSmall(1))
        ));
    }

    #[test]
    fn periodicity_checked() {
        let region = Region::Rect { x0: 0.0, x1: 1.0, y0: -1.0, y1: 1.0 };
        let p = |s: &str| parse_expr(s).unwrap();
        let c = SubmersionChart::new(region, Some(1.0), p("1"), p("1+x"), p("0"), p("0"), p("0")).unwrap();
        assert!(matches!(validate_chart(&c, 4), Err(ChartError::NotPeriodic { field: "mu", .. })));
        let c = SubmersionChart::new(region, Some(1.0), p("1"), p("2+cos(2*pi*x)"), p("0"), p("0"), p("0"))
            .unwrap();
        assert!(validate_chart(&c, 4).is_ok());
        assert!(SubmersionChart::new(region, Some(2.0), p("1"), p("1"), p("0"), p("0"), p("0")).is_err());
    }
}
