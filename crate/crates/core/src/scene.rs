//! Builtin charts and their canonical Jenkins–Serrin problems.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::chart::{ChartError, Region, SubmersionChart};
use crate::domain::{build_domain, polygon_loop, segment_curve, ArcLabel, BoundaryArc, DomainError, JSDomain};
use crate::expr::parse_expr;
use crate::geom::Point;
use crate::mugeo::{mu_geodesic_shoot, NormalSide};

/// Bundle curvature of the builtin Nil₃ chart.
pub const NIL3_TAU: f64 = 0.5;

/// Tolerance used when validating the canonical domains.
pub const SCENE_GEO_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct SceneInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub has_domain: bool,
}

pub const SCENES: [SceneInfo; 6] = [
    SceneInfo {
        name: "flat-scherk",
        description: "Euclidean R^3; square (-pi/2, pi/2)^2 with +inf on y = +-pi/2 and -inf on x = +-pi/2",
        has_domain: true,
    },
    SceneInfo {
        name: "rotational-r3",
        description: "R^3 as a rotational submersion (lambda = 1, mu = x); quadrilateral between the catenaries a = 1 (+inf) and a = 2 (-inf), |y| <= 1/2",
        has_domain: true,
    },
    SceneInfo {
        name: "nil3",
        description: "Nil3 with tau = 1/2, a = -tau y, b = tau x; unit square with alternating infinite sides",
        has_domain: true,
    },
    SceneInfo {
        name: "h2xr",
        description: "H^2 x R in the Poincare disk, lambda = 2/(1 - x^2 - y^2)",
        has_domain: false,
    },
    SceneInfo {
        name: "s2xr-cap",
        description: "S^2 x R in stereographic coordinates, lambda = 2/(1 + x^2 + y^2), on the disk of radius 2",
        has_domain: false,
    },
    SceneInfo {
        name: "flat-cylinder",
        description: "flat strip R/2piZ x (-1, 1), +inf on y = 1 and -inf on y = -1 (no solution)",
        has_domain: true,
    },
];

#[derive(Debug, Clone)]
pub struct Scene {
    pub name: &'static str,
    pub chart: SubmersionChart,
    pub domain: Option<JSDomain>,
}

fn chart(region: Region, period: Option<f64>, fields: [&str; 5]) -> Result<SubmersionChart, ChartError> {
    let [l, m, t, a, b] = fields.map(|s| parse_expr(s).expect("builtin expression"));
    SubmersionChart::new(region, period, l, m, t, a, b)
}

/// Chart (and canonical domain where there is one) of a builtin scene.
pub fn builtin_scene(name: &str) -> Result<Scene, DomainError> {
    let info = SCENES.iter().find(|s| s.name == name).ok_or_else(|| ChartError::UnknownScene(name.to_string()))?;
    let name = info.name;
    let (chart, domain) = match name {
        "flat-scherk" => {
            let c = SubmersionChart::flat(Region::Rect { x0: -2.0, x1: 2.0, y0: -2.0, y1: 2.0 }, None)?;
            let h = FRAC_PI_2;
            let corners = [Point::new(-h, -h), Point::new(h, -h), Point::new(h, h), Point::new(-h, h)];
            let labels = [ArcLabel::PlusInfinity, ArcLabel::MinusInfinity, ArcLabel::PlusInfinity, ArcLabel::MinusInfinity];
            let d = build_domain(&c, vec![polygon_loop(&corners, &labels, 64)], Point::default(), SCENE_GEO_TOL)?;
            (c, Some(d))
        }
        "rotational-r3" => {
            let c = chart(Region::Rect { x0: 1e-3, x1: 6.0, y0: -6.0, y1: 6.0 }, None, ["1", "x", "0", "0", "0"])?;
            let d = rotational_quadrilateral(&c, 1.0, 2.0, 0.5)?;
            (c, Some(d))
        }
        "nil3" => {
            let t = NIL3_TAU;
            let (a, b) = (format!("-{t:?}*y"), format!("{t:?}*x"));
            let c = chart(Region::Rect { x0: -1.0, x1: 2.0, y0: -1.0, y1: 2.0 }, None, ["1", "1", &format!("{t:?}"), &a, &b])?;
            let corners = [Point::new(0., 0.), Point::new(1., 0.), Point::new(1., 1.), Point::new(0., 1.)];
            let labels = [ArcLabel::PlusInfinity, ArcLabel::MinusInfinity, ArcLabel::PlusInfinity, ArcLabel::MinusInfinity];
            let d = build_domain(&c, vec![polygon_loop(&corners, &labels, 64)], Point::new(0.5, 0.5), SCENE_GEO_TOL)?;
            (c, Some(d))
        }
        "h2xr" => (chart(Region::Disk { cx: 0.0, cy: 0.0, r: 1.0 }, None, ["2/(1-x^2-y^2)", "1", "0", "0", "0"])?, None),
        "s2xr-cap" => (chart(Region::Disk { cx: 0.0, cy: 0.0, r: 2.0 }, None, ["2/(1+x^2+y^2)", "1", "0", "0", "0"])?, None),
        "flat-cylinder" => {
            let p = 2.0 * PI;
            let c = SubmersionChart::flat(Region::Rect { x0: 0.0, x1: p, y0: -1.0, y1: 1.0 }, Some(p))?;
            let bottom = segment_curve(Point::new(0.0, -1.0), Point::new(p, -1.0), 128);
            let top = segment_curve(Point::new(p, 1.0), Point::new(0.0, 1.0), 128);
            let loops = vec![
                vec![BoundaryArc::new(bottom, ArcLabel::MinusInfinity)],
                vec![BoundaryArc::new(top, ArcLabel::PlusInfinity)],
            ];
            let d = build_domain(&c, loops, Point::new(PI, 0.0), SCENE_GEO_TOL)?;
            (c, Some(d))
        }
        _ => unreachable!("scene table and constructors agree"),
    };
    Ok(Scene { name, chart, domain })
}

/// Catenary `x = a cosh(y/a)` for `|y| ≤ c`, shot as a μ-geodesic upwards.
pub fn catenary_arc(c: &SubmersionChart, a: f64, half: f64, samples: usize) -> Result<crate::mugeo::GeodesicArc, DomainError> {
    let start = Point::new(a * (half / a).cosh(), -half);
    let theta = Point::new(-(half / a).sinh(), 1.0).angle();
    let length = a * (half + a * (2.0 * half / a).sinh() / 2.0);
    Ok(mu_geodesic_shoot(c, start, theta, length, length / samples as f64)?)
}

/// Quadrilateral of the rotational chart bounded by two catenaries (`+∞` on
/// the inner one, `−∞` on the outer one) and the horizontal lines `y = ±c`
/// carrying the data 0.
pub fn rotational_quadrilateral(c: &SubmersionChart, a_in: f64, a_out: f64, half: f64) -> Result<JSDomain, DomainError> {
    let inner = catenary_arc(c, a_in, half, 128)?;
    let outer = catenary_arc(c, a_out, half, 128)?;
    let zero = || ArcLabel::Finite(parse_expr("0").expect("literal"));
    let (p0, p1) = (inner.start(), outer.start());
    let (p2, p3) = (outer.end(), inner.end());
    let arcs = vec![
        BoundaryArc::new(segment_curve(p0, p1, 32), zero()),
        BoundaryArc::new(outer.to_curve(NormalSide::Left), ArcLabel::MinusInfinity),
        BoundaryArc::new(segment_curve(p2, p3, 32), zero()),
        BoundaryArc::new(inner.reversed().to_curve(NormalSide::Left), ArcLabel::PlusInfinity),
    ];
    let mid = Point::new(0.5 * (a_in + a_out), 0.0);
    build_domain(c, vec![arcs], mid, SCENE_GEO_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::validate_chart;

    #[test]
    fn every_scene_builds_and_is_compatible() {
        for info in &SCENES {
            let s = builtin_scene(info.name).unwrap();
            assert_eq!(s.domain.is_some(), info.has_domain, "{}", info.name);
            let r = validate_chart(&s.chart, 64).unwrap();
            assert!(r.max_defect < 1e-8, "{}: {}", info.name, r.max_defect);
            assert!(r.min_lambda > 0.0 && r.min_mu > 0.0);
        }
    }

    #[test]
    fn unknown_scene_is_an_error() {
        assert!(matches!(builtin_scene("klein"), Err(DomainError::Chart(ChartError::UnknownScene(_)))));
    }

    #[test]
    fn rotational_quadrilateral_lengths() {
        let s = builtin_scene("rotational-r3").unwrap();
        let d = s.domain.unwrap();
        let exact = |a: f64| a * (0.5 + a * (1.0 / a).sinh() / 2.0);
        assert!((d.arc_lengths[1] - exact(2.0)).abs() < 1e-8);
        assert!((d.arc_lengths[3] - exact(1.0)).abs() < 1e-8);
    }

    #[test]
    fn scherk_and_cylinder_decisions() {
        use crate::domain::{check_js_conditions, EdgeKind, DEFAULT_MAX_POLYGONS};
        let d = builtin_scene("flat-scherk").unwrap().domain.unwrap();
        let r = check_js_conditions(&d, DEFAULT_MAX_POLYGONS).unwrap();
        assert!(r.solvable && r.admissible);
        assert_eq!(r.polygons.len(), 5);
        assert!((r.special_case.boundary_alpha - 2.0 * PI).abs() < 1e-10);
        let triangles: Vec<_> = r.polygons.iter().filter(|p| !p.is_boundary).collect();
        assert_eq!(triangles.len(), 4);
        for t in triangles {
            assert!((t.gamma - (2.0 + 2f64.sqrt()) * PI).abs() < 1e-8, "{}", t.gamma);
        }

        let d = builtin_scene("flat-cylinder").unwrap().domain.unwrap();
        let r = check_js_conditions(&d, DEFAULT_MAX_POLYGONS).unwrap();
        assert!(!r.solvable);
        let witness = r.violations.iter().find(|v| {
            r.polygons[v.polygon].edges.iter().any(|e| matches!(e.kind, EdgeKind::ClosedGeodesic(_)))
        });
        let v = witness.expect("closed geodesic witness");
        assert!((v.rhs - 4.0 * PI).abs() < 1e-8);
    }
}
