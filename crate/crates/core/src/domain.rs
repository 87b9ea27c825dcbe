//! Jenkins–Serrin problem statements and their solvability decision.
//!
//! A domain is bounded by arcs carrying `+∞`, `−∞`, or finite continuous
//! data. Infinite arcs must be μ-geodesics and finite arcs μ-convex towards
//! the domain. The problem is solvable iff it is admissible and every
//! inscribed μ-polygon `P` satisfies `2α(P) < γ(P)` and `2β(P) < γ(P)`,
//! where the boundary itself is tested with `α = β` instead when there are
//! no finite arcs.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::chart::{ChartError, SubmersionChart};
use crate::expr::{Expr, ExprError};
use crate::geom::{
    dist_point_polyline, hausdorff, point_in_polygon, polylines_cross, segments_intersect, signed_area, Point,
};
use crate::mugeo::{
    find_closed_geodesic, max_abs_mu_curvature, mu_geodesic_connect_all, mu_geodesic_curvature, mu_length,
    ConnectOptions, CurveSample, GeodesicArc, MugeoError, NormalSide,
};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Mugeo(#[from] MugeoError),
    #[error("boundary data of arc {arc}: {source}")]
    Data {
        arc: usize,
        #[source]
        source: ExprError,
    },
    #[error("arc {arc} needs at least {min} samples, has {got}")]
    TooFewSamples { arc: usize, min: usize, got: usize },
    #[error("loop {lp} is not closed: gap {gap:e} after arc {arc}")]
    Discontinuous { lp: usize, arc: usize, gap: f64 },
    #[error("arc {arc} is labelled infinite but is not a μ-geodesic: |κ̃| = {curvature:e} at ({}, {})", point.x, point.y)]
    NonGeodesicArc { arc: usize, point: Point, curvature: f64 },
    #[error("finite arc {arc} is not μ-convex towards the domain: κ̃ = {curvature:e} at ({}, {})", point.x, point.y)]
    NonConvexArc { arc: usize, point: Point, curvature: f64 },
    #[error("boundary loop {0} intersects itself")]
    SelfIntersecting(usize),
    #[error("boundary loops {0} and {1} intersect")]
    LoopsIntersect(usize, usize),
    #[error("interior point ({}, {}) is not inside the domain", .0.x, .0.y)]
    InteriorPointOutside(Point),
    #[error("unsupported domain topology: {0}")]
    Topology(String),
}

/// Boundary data on an arc.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcLabel {
    PlusInfinity,
    MinusInfinity,
    Finite(Expr),
}

impl ArcLabel {
    pub fn is_infinite(&self) -> bool {
        !matches!(self, ArcLabel::Finite(_))
    }

    pub fn tag(&self) -> EdgeTag {
        match self {
            ArcLabel::PlusInfinity => EdgeTag::Plus,
            ArcLabel::MinusInfinity => EdgeTag::Minus,
            ArcLabel::Finite(_) => EdgeTag::Finite,
        }
    }
}

impl Serialize for ArcLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ArcLabel::PlusInfinity => s.serialize_str("+inf"),
            ArcLabel::MinusInfinity => s.serialize_str("-inf"),
            ArcLabel::Finite(e) => s.serialize_str(&format!("finite:{e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryArc {
    pub curve: CurveSample,
    pub label: ArcLabel,
}

impl BoundaryArc {
    pub fn new(curve: CurveSample, label: ArcLabel) -> Self {
        BoundaryArc { curve, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Simply connected, or with holes (polygon enumeration needs one loop).
    Planar,
    /// Strip between two closed loops of a periodic chart.
    PeriodicAnnulus,
}

/// A junction of two consecutive arcs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corner {
    pub vertex: usize,
    pub point: Point,
    pub incoming: usize,
    pub outgoing: usize,
    /// Interior angle in `(0, 2π)`.
    pub angle: f64,
}

/// A validated Jenkins–Serrin problem.
#[derive(Debug, Clone)]
pub struct JSDomain {
    pub chart: SubmersionChart,
    pub arcs: Vec<BoundaryArc>,
    /// Arc indices of each loop, in boundary order (domain on the left).
    pub loops: Vec<Vec<usize>>,
    pub vertices: Vec<Point>,
    /// `(start, end)` vertex of every non-closed arc.
    pub arc_vertices: Vec<Option<(usize, usize)>>,
    pub arc_lengths: Vec<f64>,
    pub corners: Vec<Corner>,
    pub interior_point: Point,
    pub topology: Topology,
    loop_polylines: Vec<Vec<Point>>,
}

fn loop_scale(arcs: &[BoundaryArc]) -> f64 {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for a in arcs {
        for p in &a.curve.points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    (hi - lo).norm().max(1e-300)
}

fn polyline_of(arcs: &[BoundaryArc], ids: &[usize]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for &a in ids {
        let pts = &arcs[a].curve.points;
        let skip = usize::from(!out.is_empty());
        out.extend_from_slice(&pts[skip..]);
    }
    out
}

fn simple_polyline(poly: &[Point], closed: bool) -> bool {
    let n = poly.len();
    let segs = if closed { n } else { n - 1 };
    let seg = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..segs {
        let (a, b) = seg(i);
        for j in (i + 2)..segs {
            if closed && i == 0 && j == segs - 1 {
                continue;
            }
            let (c, d) = seg(j);
            if a.x.max(b.x) < c.x.min(d.x)
                || c.x.max(d.x) < a.x.min(b.x)
                || a.y.max(b.y) < c.y.min(d.y)
                || c.y.max(d.y) < a.y.min(b.y)
            {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Validates a Jenkins–Serrin problem. Each loop is an ordered list of
/// arcs whose ends meet; outer loops counterclockwise and holes clockwise,
/// so the domain lies to the left (loops given the other way round are
/// reversed). In periodic charts the domain is the strip between two closed
/// loops, each a single arc running once around the period.
pub fn build_domain(
    chart: &SubmersionChart,
    loops: Vec<Vec<BoundaryArc>>,
    interior_point: Point,
    geo_tol: f64,
) -> Result<JSDomain, DomainError> {
    if loops.is_empty() || loops.iter().any(|l| l.is_empty()) {
        return Err(DomainError::Topology("empty boundary loop".into()));
    }
    let topology = if chart.is_periodic() { Topology::PeriodicAnnulus } else { Topology::Planar };
    let mut arcs: Vec<BoundaryArc> = Vec::new();
    let mut loop_ids: Vec<Vec<usize>> = Vec::new();
    for lp in loops {
        let start = arcs.len();
        loop_ids.push((start..start + lp.len()).collect());
        arcs.extend(lp);
    }
    let scale = loop_scale(&arcs);
    let join_tol = 1e-9 * scale.max(1.0);

    for (i, arc) in arcs.iter().enumerate() {
        let min = if arc.label.is_infinite() { 3 } else { 2 };
        if arc.curve.len() < min {
            return Err(DomainError::TooFewSamples { arc: i, min, got: arc.curve.len() });
        }
        for (index, &point) in arc.curve.points.iter().enumerate() {
            if !chart.contains(point) {
                return Err(MugeoError::CurveExitsRegion { index, point }.into());
            }
        }
    }

    match topology {
        Topology::Planar => {
            for (li, ids) in loop_ids.iter().enumerate() {
                for k in 0..ids.len() {
                    let (a, b) = (ids[k], ids[(k + 1) % ids.len()]);
                    let gap = arcs[a].curve.last().dist(arcs[b].curve.first());
                    if gap > join_tol {
                        return Err(DomainError::Discontinuous { lp: li, arc: a, gap });
                    }
                }
            }
            // orientation: the first loop is outer, the rest are holes
            for (li, ids) in loop_ids.iter_mut().enumerate() {
                let mut poly = polyline_of(&arcs, ids);
                poly.pop();
                let area = signed_area(&poly);
                let want_ccw = li == 0;
                if (area > 0.0) != want_ccw {
                    ids.reverse();
                    for &a in ids.iter() {
                        arcs[a].curve = arcs[a].curve.reversed();
                    }
                }
            }
        }
        Topology::PeriodicAnnulus => {
            let period = chart.period.expect("periodic chart");
            if loop_ids.len() != 2 || loop_ids.iter().any(|l| l.len() != 1) {
                return Err(DomainError::Topology(
                    "periodic domains are strips bounded by exactly two closed arcs".into(),
                ));
            }
            for (li, ids) in loop_ids.iter().enumerate() {
                let c = &arcs[ids[0]].curve;
                let shift = c.last() - c.first();
                if (shift.x.abs() - period).abs() > join_tol || shift.y.abs() > join_tol {
                    return Err(DomainError::Discontinuous { lp: li, arc: ids[0], gap: shift.y.abs() });
                }
            }
            // the lower loop runs in +x, the upper one in -x
            let mean_y = |a: usize| {
                let p = &arcs[a].curve.points;
                p.iter().map(|q| q.y).sum::<f64>() / p.len() as f64
            };
            if mean_y(loop_ids[0][0]) > mean_y(loop_ids[1][0]) {
                loop_ids.swap(0, 1);
            }
            for (k, ids) in loop_ids.iter().enumerate() {
                let c = &arcs[ids[0]].curve;
                let forward = c.last().x > c.first().x;
                if forward != (k == 0) {
                    arcs[ids[0]].curve = c.reversed();
                }
            }
        }
    }
    for arc in arcs.iter_mut() {
        arc.curve.normal = NormalSide::Left;
    }

    let loop_polylines: Vec<Vec<Point>> = loop_ids.iter().map(|ids| polyline_of(&arcs, ids)).collect();
    for (li, poly) in loop_polylines.iter().enumerate() {
        let closed = topology == Topology::Planar;
        let mut p = poly.clone();
        if closed {
            p.pop();
        }
        if !simple_polyline(&p, closed) {
            return Err(DomainError::SelfIntersecting(li));
        }
    }
    for i in 0..loop_polylines.len() {
        for j in (i + 1)..loop_polylines.len() {
            if polylines_cross(&loop_polylines[i], &loop_polylines[j], &[], 0.0) {
                return Err(DomainError::LoopsIntersect(i, j));
            }
        }
    }

    for (i, arc) in arcs.iter().enumerate() {
        match &arc.label {
            ArcLabel::PlusInfinity | ArcLabel::MinusInfinity => {
                let (k, idx) = max_abs_mu_curvature(chart, &arc.curve)?;
                if k > geo_tol {
                    return Err(DomainError::NonGeodesicArc { arc: i, point: arc.curve.points[idx], curvature: k });
                }
            }
            ArcLabel::Finite(f) => {
                for j in 1..arc.curve.len() - 1 {
                    let k = mu_geodesic_curvature(chart, &arc.curve, j)?;
                    if k < -geo_tol {
                        return Err(DomainError::NonConvexArc { arc: i, point: arc.curve.points[j], curvature: k });
                    }
                }
                for p in &arc.curve.points {
                    f.eval(p.x, p.y).map_err(|source| DomainError::Data { arc: i, source })?;
                }
            }
        }
    }

    // vertices and corners
    let mut vertices: Vec<Point> = Vec::new();
    let mut arc_vertices = vec![None; arcs.len()];
    let mut corners = Vec::new();
    if topology == Topology::Planar {
        for ids in &loop_ids {
            let closed_single = ids.len() == 1;
            if closed_single {
                continue;
            }
            let base = vertices.len();
            for k in 0..ids.len() {
                vertices.push(arcs[ids[k]].curve.first());
            }
            for k in 0..ids.len() {
                let next = base + (k + 1) % ids.len();
                arc_vertices[ids[k]] = Some((base + k, next));
                let (a, b) = (ids[k], ids[(k + 1) % ids.len()]);
                let t_in = *arcs[a].curve.tangents.last().unwrap();
                let t_out = arcs[b].curve.tangents[0];
                let turn = t_in.cross(t_out).atan2(t_in.dot(t_out));
                corners.push(Corner {
                    vertex: next,
                    point: vertices[next],
                    incoming: a,
                    outgoing: b,
                    angle: std::f64::consts::PI - turn,
                });
            }
        }
    }

    let arc_lengths = arcs.iter().map(|a| mu_length(chart, &a.curve)).collect::<Result<Vec<_>, _>>()?;

    let d = JSDomain {
        chart: chart.clone(),
        arcs,
        loops: loop_ids,
        vertices,
        arc_vertices,
        arc_lengths,
        corners,
        interior_point,
        topology,
        loop_polylines,
    };
    if !d.contains(interior_point) {
        return Err(DomainError::InteriorPointOutside(interior_point));
    }
    Ok(d)
}

/// Height of a periodic loop (a graph over `x`) above the abscissa `x`.
pub(crate) fn periodic_height(poly: &[Point], period: f64, x: f64) -> f64 {
    let (x0, x1) = (poly[0].x.min(poly[poly.len() - 1].x), poly[0].x.max(poly[poly.len() - 1].x));
    let xw = x0 + (x - x0).rem_euclid(period);
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (lo, hi) = (a.x.min(b.x), a.x.max(b.x));
        if xw >= lo && xw <= hi && hi > lo {
            return a.y + (b.y - a.y) * (xw - a.x) / (b.x - a.x);
        }
    }
    let _ = x1;
    poly[0].y
}

impl JSDomain {
    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        match self.topology {
            Topology::Planar => {
                let inside_outer = point_in_polygon(p, &self.loop_polylines[0]);
                inside_outer && self.loop_polylines[1..].iter().all(|h| !point_in_polygon(p, h))
            }
            Topology::PeriodicAnnulus => {
                let period = self.chart.period.unwrap();
                let lo = periodic_height(&self.loop_polylines[0], period, p.x);
                let hi = periodic_height(&self.loop_polylines[1], period, p.x);
                p.y > lo && p.y < hi
            }
        }
    }

    /// Boundary polyline of each loop (closing point repeated for planar loops).
    pub fn loop_polylines(&self) -> &[Vec<Point>] {
        &self.loop_polylines
    }

    pub fn has_finite_arcs(&self) -> bool {
        self.arcs.iter().any(|a| !a.label.is_infinite())
    }

    /// Euclidean diameter of the boundary samples.
    pub fn diameter(&self) -> f64 {
        loop_scale(&self.arcs)
    }

    pub fn centroid(&self) -> Point {
        let pts: Vec<Point> = self.loop_polylines[0].clone();
        match self.topology {
            Topology::Planar => {
                let mut poly = pts;
                poly.pop();
                let a = signed_area(&poly);
                let n = poly.len();
                let mut c = Point::default();
                for i in 0..n {
                    let (p, q) = (poly[i], poly[(i + 1) % n]);
                    c = c + (p + q) * p.cross(q);
                }
                c * (1.0 / (6.0 * a))
            }
            Topology::PeriodicAnnulus => {
                let all: Vec<Point> = self.loop_polylines.iter().flatten().copied().collect();
                let n = all.len() as f64;
                all.iter().fold(Point::default(), |acc, p| acc + *p) * (1.0 / n)
            }
        }
    }

    /// Distance from `p` to the boundary polylines.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.loop_polylines.iter().map(|l| dist_point_polyline(p, l)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// First convex corner between two arcs with the same infinite label.
    pub witness: Option<Corner>,
}

/// A problem is admissible unless two `+∞` arcs (or two `−∞` arcs) meet at a
/// convex corner (interior angle below `π`).
pub fn check_admissibility(d: &JSDomain) -> AdmissibilityReport {
    let witness = d.corners.iter().copied().find(|c| {
        let (a, b) = (&d.arcs[c.incoming].label, &d.arcs[c.outgoing].label);
        let same_infinite = matches!(
            (a, b),
            (ArcLabel::PlusInfinity, ArcLabel::PlusInfinity) | (ArcLabel::MinusInfinity, ArcLabel::MinusInfinity)
        );
        same_infinite && c.angle < std::f64::consts::PI - 1e-9
    });
    AdmissibilityReport { admissible: witness.is_none(), witness }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeTag {
    Plus,
    Minus,
    Finite,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "kebab-case")]
pub enum EdgeKind {
    Boundary(usize),
    Chord(usize),
    ClosedGeodesic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolygonEdge {
    #[serde(flatten)]
    pub kind: EdgeKind,
    pub tag: EdgeTag,
    pub length: f64,
}

/// A μ-geodesic chord of the domain between two vertices.
#[derive(Debug, Clone, Serialize)]
pub struct Chord {
    pub from: usize,
    pub to: usize,
    pub length: f64,
    #[serde(skip)]
    pub arc: GeodesicArc,
}

/// Cycle of boundary arcs and interior geodesics bounding an open connected
/// subset of the domain, with its μ-lengths `α` (on `+∞` arcs), `β` (on
/// `−∞` arcs) and `γ` (total).
#[derive(Debug, Clone, Serialize)]
pub struct InscribedPolygon {
    pub vertices: Vec<usize>,
    pub edges: Vec<PolygonEdge>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// The polygon is the whole boundary of the domain.
    pub is_boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolygonSet {
    pub polygons: Vec<InscribedPolygon>,
    pub chords: Vec<Chord>,
    #[serde(skip)]
    pub closed_geodesics: Vec<GeodesicArc>,
    pub closed_geodesic_lengths: Vec<f64>,
    pub overflow: bool,
    /// Vertex pairs for which no interior chord was found.
    pub chord_failures: Vec<String>,
}

impl PolygonSet {
    /// Concatenated polyline of a polygon, following its vertex cycle.
    pub fn polyline(&self, d: &JSDomain, poly: &InscribedPolygon) -> Vec<Vec<Point>> {
        poly.edges
            .iter()
            .map(|e| match e.kind {
                EdgeKind::Boundary(a) => d.arcs[a].curve.points.clone(),
                EdgeKind::Chord(c) => self.chords[c].arc.points.clone(),
                EdgeKind::ClosedGeodesic(g) => self.closed_geodesics[g].points.clone(),
            })
            .collect()
    }
}

pub const DEFAULT_MAX_POLYGONS: usize = 10_000;
/// Connect solutions kept per vertex pair.
pub const CHORDS_PER_PAIR: usize = 4;

fn edge_tag(d: &JSDomain, kind: EdgeKind) -> EdgeTag {
    match kind {
        EdgeKind::Boundary(a) => d.arcs[a].label.tag(),
        _ => EdgeTag::Interior,
    }
}

fn chord_is_interior(d: &JSDomain, arc: &GeodesicArc) -> bool {
    let n = arc.points.len();
    arc.points[1..n - 1].iter().all(|&p| d.contains(p))
        && arc.points[1..n - 1].iter().all(|&p| d.boundary_distance(p) > 1e-9 * d.diameter())
}

/// Enumerates inscribed μ-polygons: simple cycles in the graph of boundary
/// arcs and interior μ-geodesic chords between vertices (periodic strips:
/// boundary loops together with closed geodesics found by shooting around
/// the period). The result is sorted by vertex list and then by `γ`.
pub fn enumerate_inscribed_polygons(d: &JSDomain, max_count: usize) -> Result<PolygonSet, DomainError> {
    match d.topology {
        Topology::Planar => enumerate_planar(d, max_count),
        Topology::PeriodicAnnulus => enumerate_periodic(d, max_count),
    }
}

fn enumerate_planar(d: &JSDomain, max_count: usize) -> Result<PolygonSet, DomainError> {
    if d.loops.len() != 1 || d.loops[0].len() < 2 {
        return Err(DomainError::Topology(
            "polygon enumeration supports simply connected domains with at least two vertices".into(),
        ));
    }
    let scale = d.diameter();
    let nv = d.vertices.len();
    let mut set = PolygonSet {
        polygons: Vec::new(),
        chords: Vec::new(),
        closed_geodesics: Vec::new(),
        closed_geodesic_lengths: Vec::new(),
        overflow: false,
        chord_failures: Vec::new(),
    };

    let opts = ConnectOptions {
        tol: 1e-10 * scale.max(1.0),
        max_solutions: CHORDS_PER_PAIR,
        ..ConnectOptions::default()
    };
    for i in 0..nv {
        for j in (i + 1)..nv {
            let (p, q) = (d.vertices[i], d.vertices[j]);
            let found = match mu_geodesic_connect_all(&d.chart, p, q, &opts) {
                Ok(v) => v,
                Err(MugeoError::NoConnection { .. }) => {
                    set.chord_failures.push(format!("no geodesic between vertices {i} and {j}"));
                    continue;
                }
                Err(e) => {
                    set.chord_failures.push(format!("vertices {i} and {j}: {e}"));
                    continue;
                }
            };
            for arc in found {
                let coincides_with_side = d.arcs.iter().enumerate().any(|(a, ba)| {
                    matches!(d.arc_vertices[a], Some((s, e)) if (s == i && e == j) || (s == j && e == i))
                        && hausdorff(&arc.points, &ba.curve.points) < 1e-6 * scale
                });
                if coincides_with_side || !chord_is_interior(d, &arc) {
                    continue;
                }
                let pts = &arc.points;
                if !simple_polyline(pts, false) {
                    continue;
                }
                set.chords.push(Chord { from: i, to: j, length: arc.length, arc });
            }
        }
    }

    // multigraph edges: (u, v, kind, length)
    let mut edges: Vec<(usize, usize, EdgeKind, f64)> = Vec::new();
    for (a, av) in d.arc_vertices.iter().enumerate() {
        if let Some((s, e)) = av {
            edges.push((*s, *e, EdgeKind::Boundary(a), d.arc_lengths[a]));
        }
    }
    for (c, ch) in set.chords.iter().enumerate() {
        edges.push((ch.from, ch.to, EdgeKind::Chord(c), ch.length));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (k, &(u, v, _, _)) in edges.iter().enumerate() {
        adj[u].push(k);
        adj[v].push(k);
    }

    let mut cycles: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut ordered: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    'search: for start in 0..nv {
        let mut stack: Vec<(usize, Vec<usize>, Vec<usize>)> = vec![(start, vec![start], vec![])];
        while let Some((v, path, used)) = stack.pop() {
            for &k in adj[v].iter().rev() {
                if used.contains(&k) {
                    continue;
                }
                let (a, b, _, _) = edges[k];
                let w = if a == v { b } else { a };
                if w == start && !used.is_empty() {
                    let mut e = used.clone();
                    e.push(k);
                    let mut key = e.clone();
                    key.sort_unstable();
                    if cycles.insert(key) {
                        ordered.push((path.clone(), e));
                        if cycles.len() > max_count {
                            set.overflow = true;
                            break 'search;
                        }
                    }
                } else if w > start && !path.contains(&w) {
                    let mut p = path.clone();
                    p.push(w);
                    let mut u = used.clone();
                    u.push(k);
                    stack.push((w, p, u));
                }
            }
        }
    }

    let all_boundary: BTreeSet<usize> =
        edges.iter().enumerate().filter(|(_, e)| matches!(e.2, EdgeKind::Boundary(_))).map(|(k, _)| k).collect();
    for (path, used) in ordered.into_iter().take(max_count) {
        let kinds: Vec<EdgeKind> = used.iter().map(|&k| edges[k].2).collect();
        let lines: Vec<Vec<Point>> = kinds
            .iter()
            .map(|k| match *k {
                EdgeKind::Boundary(a) => d.arcs[a].curve.points.clone(),
                EdgeKind::Chord(c) => set.chords[c].arc.points.clone(),
                EdgeKind::ClosedGeodesic(_) => unreachable!(),
            })
            .collect();
        if !edges_disjoint(&used, &edges, &lines, &d.vertices, 1e-9 * scale) {
            continue;
        }
        if !bounds_open_subset(d, &path, &used, &edges, &lines, scale) {
            continue;
        }
        let poly_edges: Vec<PolygonEdge> = used
            .iter()
            .map(|&k| PolygonEdge { kind: edges[k].2, tag: edge_tag(d, edges[k].2), length: edges[k].3 })
            .collect();
        let used_set: BTreeSet<usize> = used.iter().copied().collect();
        set.polygons.push(summarize(path, poly_edges, used_set == all_boundary));
    }
    sort_polygons(&mut set.polygons);
    Ok(set)
}

fn summarize(vertices: Vec<usize>, edges: Vec<PolygonEdge>, is_boundary: bool) -> InscribedPolygon {
    let sum = |t: EdgeTag| edges.iter().filter(|e| e.tag == t).map(|e| e.length).sum::<f64>();
    let alpha = sum(EdgeTag::Plus);
    let beta = sum(EdgeTag::Minus);
    let gamma = edges.iter().map(|e| e.length).sum();
    InscribedPolygon { vertices, edges, alpha, beta, gamma, is_boundary }
}

fn sort_polygons(polys: &mut [InscribedPolygon]) {
    polys.sort_by(|a, b| {
        let mut va = a.vertices.clone();
        let mut vb = b.vertices.clone();
        va.sort_unstable();
        vb.sort_unstable();
        va.cmp(&vb)
            .then(a.gamma.total_cmp(&b.gamma))
            .then_with(|| {
                let ka: Vec<EdgeKind> = a.edges.iter().map(|e| e.kind).collect();
                let kb: Vec<EdgeKind> = b.edges.iter().map(|e| e.kind).collect();
                ka.cmp(&kb)
            })
    });
}

fn edges_disjoint(
    used: &[usize],
    edges: &[(usize, usize, EdgeKind, f64)],
    lines: &[Vec<Point>],
    vertices: &[Point],
    eps: f64,
) -> bool {
    for i in 0..used.len() {
        for j in (i + 1)..used.len() {
            let (a0, a1, _, _) = edges[used[i]];
            let (b0, b1, _, _) = edges[used[j]];
            let shared: Vec<Point> =
                [a0, a1].iter().filter(|v| **v == b0 || **v == b1).map(|&v| vertices[v]).collect();
            // the boundary is simple already
            if matches!(edges[used[i]].2, EdgeKind::Boundary(_)) && matches!(edges[used[j]].2, EdgeKind::Boundary(_))
            {
                continue;
            }
            let tol = if shared.is_empty() { 0.0 } else { eps.max(1e-12) };
            if polylines_cross(&lines[i], &lines[j], &shared, tol) {
                return false;
            }
            // parallel overlap near a shared vertex is detected by distance
            if !shared.is_empty() {
                let interior = |l: &[Point]| -> Vec<Point> {
                    l.iter().copied().filter(|p| shared.iter().all(|s| s.dist(*p) > 1e3 * tol)).collect()
                };
                let ia = interior(&lines[i]);
                if ia.iter().any(|p| dist_point_polyline(*p, &lines[j]) < 10.0 * tol) {
                    return false;
                }
            }
        }
    }
    true
}

fn bounds_open_subset(
    d: &JSDomain,
    path: &[usize],
    used: &[usize],
    edges: &[(usize, usize, EdgeKind, f64)],
    lines: &[Vec<Point>],
    scale: f64,
) -> bool {
    // orient every edge along the vertex cycle and concatenate
    let mut poly: Vec<Point> = Vec::new();
    for (k, &e) in used.iter().enumerate() {
        let from = path[k];
        let mut pts = lines[k].clone();
        if edges[e].0 != from {
            pts.reverse();
        }
        let skip = usize::from(!poly.is_empty());
        poly.extend_from_slice(&pts[skip..]);
    }
    poly.pop();
    let area = signed_area(&poly);
    if area.abs() < 1e-12 * scale * scale {
        return false;
    }
    // a point just inside the cycle, next to the midpoint of its first edge
    let m = poly.len() / 2;
    let first = &poly[..poly.len().min(lines[0].len())];
    let j = first.len() / 2;
    let (a, b) = (first[j.saturating_sub(1)], first[j.min(first.len() - 1).max(1)]);
    let _ = m;
    let tangent = (b - a).normalized();
    let inward = tangent.perp() * area.signum();
    let probe = a.lerp(b, 0.5) + inward * (1e-6 * scale);
    point_in_polygon(probe, &poly) && d.contains(probe)
}

fn enumerate_periodic(d: &JSDomain, max_count: usize) -> Result<PolygonSet, DomainError> {
    let period = d.chart.period.expect("periodic chart");
    let (lower, upper) = (&d.loop_polylines[0], &d.loop_polylines[1]);
    let x0 = d.interior_point.x;
    let y_lo = periodic_height(lower, period, x0);
    let y_hi = periodic_height(upper, period, x0);
    let step = period / 256.0;

    let mut set = PolygonSet {
        polygons: Vec::new(),
        chords: Vec::new(),
        closed_geodesics: Vec::new(),
        closed_geodesic_lengths: Vec::new(),
        overflow: false,
        chord_failures: Vec::new(),
    };
    for f in [0.25, 0.5, 0.75] {
        let start = Point::new(x0, y_lo + f * (y_hi - y_lo));
        let Some(g) = find_closed_geodesic(&d.chart, start, 0.0, step)? else {
            set.chord_failures.push(format!("no closed geodesic through ({}, {})", start.x, start.y));
            continue;
        };
        let inside = g.points[1..g.points.len() - 1].iter().all(|&p| d.contains(p));
        let dup = set.closed_geodesics.iter().any(|h| hausdorff(&h.points, &g.points) < 1e-6 * period);
        if inside && !dup {
            set.closed_geodesic_lengths.push(g.length);
            set.closed_geodesics.push(g);
        }
    }

    let loop_edge = |li: usize| {
        let a = d.loops[li][0];
        PolygonEdge { kind: EdgeKind::Boundary(a), tag: d.arcs[a].label.tag(), length: d.arc_lengths[a] }
    };
    let geo_edge = |g: usize, length: f64| PolygonEdge {
        kind: EdgeKind::ClosedGeodesic(g),
        tag: EdgeTag::Interior,
        length,
    };
    let mut polys = vec![summarize(vec![], vec![loop_edge(0), loop_edge(1)], true)];
    for (g, &len) in set.closed_geodesic_lengths.iter().enumerate() {
        for li in 0..2 {
            polys.push(summarize(vec![], vec![loop_edge(li), geo_edge(g, len)], false));
        }
    }
    for g in 0..set.closed_geodesics.len() {
        for h in (g + 1)..set.closed_geodesics.len() {
            let e = vec![geo_edge(g, set.closed_geodesic_lengths[g]), geo_edge(h, set.closed_geodesic_lengths[h])];
            polys.push(summarize(vec![], e, false));
        }
    }
    if polys.len() > max_count {
        polys.truncate(max_count);
        set.overflow = true;
    }
    set.polygons = polys;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    /// `2α(P) < γ(P)`
    TwoAlphaLessGamma,
    /// `2β(P) < γ(P)`
    TwoBetaLessGamma,
    /// `α(∂Ω) = β(∂Ω)` when there are no finite arcs.
    BoundaryBalance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    /// Index into [`JSReport::polygons`].
    pub polygon: usize,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    /// The strict inequality holds numerically, but by less than `1e-9·γ`.
    pub marginal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecialCase {
    pub no_finite_arcs: bool,
    pub boundary_alpha: f64,
    pub boundary_beta: f64,
    pub boundary_balanced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JSReport {
    pub admissible: bool,
    pub admissibility_witness: Option<Corner>,
    pub solvable: bool,
    /// Enumeration overflowed, so a positive answer is not certified.
    pub inconclusive: bool,
    pub violations: Vec<Violation>,
    pub special_case: SpecialCase,
    pub polygons: Vec<InscribedPolygon>,
    pub chords: Vec<Chord>,
    pub closed_geodesic_lengths: Vec<f64>,
    pub notes: Vec<String>,
}

/// Relative tolerance of the boundary balance test and the marginal band of
/// the strict inequalities.
pub const JS_REL_TOL: f64 = 1e-9;

/// Decides solvability: admissibility plus the strict length inequalities
/// on every enumerated polygon. Marginal passes count as violations.
pub fn check_js_conditions(d: &JSDomain, max_count: usize) -> Result<JSReport, DomainError> {
    let adm = check_admissibility(d);
    let set = enumerate_inscribed_polygons(d, max_count)?;
    let no_finite = !d.has_finite_arcs();
    let boundary_alpha: f64 =
        d.arcs.iter().zip(&d.arc_lengths).filter(|(a, _)| a.label == ArcLabel::PlusInfinity).map(|(_, l)| l).sum();
    let boundary_beta: f64 =
        d.arcs.iter().zip(&d.arc_lengths).filter(|(a, _)| a.label == ArcLabel::MinusInfinity).map(|(_, l)| l).sum();
    let boundary_balanced =
        (boundary_alpha - boundary_beta).abs() <= JS_REL_TOL * boundary_alpha.max(boundary_beta).max(1e-300);

    let mut violations = Vec::new();
    for (pi, p) in set.polygons.iter().enumerate() {
        if p.is_boundary && no_finite {
            if !boundary_balanced {
                violations.push(Violation {
                    polygon: pi,
                    inequality: Inequality::BoundaryBalance,
                    lhs: p.alpha,
                    rhs: p.beta,
                    marginal: false,
                });
            }
            continue;
        }
        for (ineq, side) in [(Inequality::TwoAlphaLessGamma, p.alpha), (Inequality::TwoBetaLessGamma, p.beta)] {
            let margin = p.gamma - 2.0 * side;
            if margin < JS_REL_TOL * p.gamma {
                violations.push(Violation {
                    polygon: pi,
                    inequality: ineq,
                    lhs: 2.0 * side,
                    rhs: p.gamma,
                    marginal: margin > 0.0,
                });
            }
        }
    }
    let mut notes = set.chord_failures.clone();
    if set.overflow {
        notes.push(format!("polygon enumeration stopped at {max_count} polygons"));
    }
    Ok(JSReport {
        admissible: adm.admissible,
        admissibility_witness: adm.witness,
        solvable: adm.admissible && violations.is_empty(),
        inconclusive: set.overflow && violations.is_empty(),
        violations,
        special_case: SpecialCase { no_finite_arcs: no_finite, boundary_alpha, boundary_beta, boundary_balanced },
        polygons: set.polygons,
        chords: set.chords,
        closed_geodesic_lengths: set.closed_geodesic_lengths,
        notes,
    })
}

/// Straight polyline from `a` to `b` with `n` segments.
pub fn segment_curve(a: Point, b: Point, n: usize) -> CurveSample {
    let n = n.max(1);
    let pts: Vec<Point> = (0..=n).map(|k| a.lerp(b, k as f64 / n as f64)).collect();
    let t = (b - a).normalized();
    CurveSample::with_tangents(pts, vec![t; n + 1], NormalSide::Left)
}

/// Polygon with straight sides through `corners` (in order), labelled in turn.
pub fn polygon_loop(corners: &[Point], labels: &[ArcLabel], samples_per_side: usize) -> Vec<BoundaryArc> {
    let n = corners.len();
    (0..n)
        .map(|k| {
            BoundaryArc::new(segment_curve(corners[k], corners[(k + 1) % n], samples_per_side), labels[k].clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Region;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn flat() -> SubmersionChart {
        SubmersionChart::flat(Region::Rect { x0: -4.0, x1: 4.0, y0: -4.0, y1: 4.0 }, None).unwrap()
    }

    fn rect(w: f64, h: f64, labels: [ArcLabel; 4]) -> Vec<BoundaryArc> {
        let c = [Point::new(0., 0.), Point::new(w, 0.), Point::new(w, h), Point::new(0., h)];
        polygon_loop(&c, &labels, 16)
    }

    use ArcLabel::{MinusInfinity as M, PlusInfinity as P};
    fn zero() -> ArcLabel {
        ArcLabel::Finite(Expr::num(0.0))
    }

    #[test]
    fn scherk_square_is_accepted_and_admissible() {
        let c = FRAC_PI_2;
        let corners = [Point::new(-c, -c), Point::new(c, -c), Point::new(c, c), Point::new(-c, c)];
        let arcs = polygon_loop(&corners, &[P, M, P, M], 32);
        let d = build_domain(&flat(), vec![arcs], Point::default(), 1e-5).unwrap();
        assert_eq!(d.vertices.len(), 4);
        assert!(check_admissibility(&d).admissible);
        for corner in &d.corners {
            assert!((corner.angle - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_loop_is_reoriented() {
        let mut arcs = rect(1.0, 2.0, [P, zero(), P, zero()]);
        arcs.reverse();
        for a in arcs.iter_mut() {
            a.curve = a.curve.reversed();
        }
        let d = build_domain(&flat(), vec![arcs], Point::new(0.5, 1.0), 1e-5).unwrap();
        assert!(d.corners.iter().all(|c| (c.angle - FRAC_PI_2).abs() < 1e-12));
    }

    #[test]
    fn concave_finite_arc_rejected() {
        let mut arcs = rect(1.0, 1.0, [zero(), zero(), zero(), zero()]);
        // right side bulging into the domain
        let pts: Vec<Point> =
            (0..=20).map(|k| k as f64 / 20.0).map(|t| Point::new(1.0 - 0.8 * t * (1.0 - t), t)).collect();
        arcs[1] = BoundaryArc::new(CurveSample::from_points(pts, NormalSide::Left), zero());
        let err = build_domain(&flat(), vec![arcs], Point::new(0.3, 0.5), 1e-5).unwrap_err();
        assert!(matches!(err, DomainError::NonConvexArc { arc: 1, .. }), "{err}");
    }

    #[test]
    fn convex_finite_arc_accepted() {
        let mut arcs = rect(1.0, 1.0, [zero(), zero(), zero(), zero()]);
        let pts: Vec<Point> =
            (0..=20).map(|k| k as f64 / 20.0).map(|t| Point::new(1.0 + 0.3 * t * (1.0 - t), t)).collect();
        arcs[1] = BoundaryArc::new(CurveSample::from_points(pts, NormalSide::Left), zero());
        assert!(build_domain(&flat(), vec![arcs], Point::new(0.3, 0.5), 1e-5).is_ok());
    }

    #[test]
    fn curved_infinite_arc_rejected() {
        let mut arcs = rect(1.0, 1.0, [zero(), P, zero(), zero()]);
        let pts: Vec<Point> =
            (0..=20).map(|k| k as f64 / 20.0).map(|t| Point::new(1.0 + 0.3 * t * (1.0 - t), t)).collect();
        arcs[1] = BoundaryArc::new(CurveSample::from_points(pts, NormalSide::Left), P);
        let err = build_domain(&flat(), vec![arcs], Point::new(0.3, 0.5), 1e-5).unwrap_err();
        assert!(matches!(err, DomainError::NonGeodesicArc { arc: 1, .. }), "{err}");
    }

    #[test]
    fn self_intersecting_loop_rejected() {
        // bow tie
        let c = [Point::new(0., 0.), Point::new(1., 1.), Point::new(1., 0.), Point::new(0., 1.)];
        let arcs = polygon_loop(&c, &[zero(), zero(), zero(), zero()], 4);
        let err = build_domain(&flat(), vec![arcs], Point::new(0.5, 0.2), 1e-5).unwrap_err();
        assert!(matches!(err, DomainError::SelfIntersecting(0)), "{err}");
    }

    #[test]
    fn open_loop_rejected() {
        let mut arcs = rect(1.0, 1.0, [zero(), zero(), zero(), zero()]);
        arcs.pop();
        let err = build_domain(&flat(), vec![arcs], Point::new(0.5, 0.5), 1e-5).unwrap_err();
        assert!(matches!(err, DomainError::Discontinuous { .. }));
    }

    #[test]
    fn adjacent_plus_sides_inadmissible() {
        let arcs = rect(1.0, 1.0, [P, P, zero(), zero()]);
        let d = build_domain(&flat(), vec![arcs], Point::new(0.5, 0.5), 1e-5).unwrap();
        let r = check_admissibility(&d);
        assert!(!r.admissible);
        let w = r.witness.unwrap();
        assert_eq!(w.point, Point::new(1.0, 0.0));
        assert!((w.angle - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn reentrant_plus_corner_is_admissible() {
        // L-shape with the reentrant corner at (1, 1) between two +inf sides
        let c = [
            Point::new(0., 0.),
            Point::new(2., 0.),
            Point::new(2., 1.),
            Point::new(1., 1.),
            Point::new(1., 2.),
            Point::new(0., 2.),
        ];
        let labels = [zero(), zero(), P, P, zero(), zero()];
        let d = build_domain(&flat(), vec![polygon_loop(&c, &labels, 8)], Point::new(0.5, 0.5), 1e-5).unwrap();
        let reentrant = d.corners.iter().find(|k| k.point == Point::new(1., 1.)).unwrap();
        assert!((reentrant.angle - 1.5 * PI).abs() < 1e-12);
        assert!(check_admissibility(&d).admissible);
    }

    #[test]
    fn triangle_has_only_its_boundary() {
        let c = [Point::new(0., 0.), Point::new(1., 0.), Point::new(0., 1.)];
        let d = build_domain(&flat(), vec![polygon_loop(&c, &[zero(), P, zero()], 8)], Point::new(0.2, 0.2), 1e-5)
            .unwrap();
        let set = enumerate_inscribed_polygons(&d, 100).unwrap();
        assert_eq!(set.polygons.len(), 1);
        assert!(set.polygons[0].is_boundary);
        assert!(set.chords.is_empty());
    }

    #[test]
    fn rectangle_decision_matches_arithmetic() {
        for (a, b, solvable) in [(1.0, 2.0, true), (2.0, 1.0, false), (1.5, 1.5, false)] {
            // +inf on both length-a sides
            let d = build_domain(&flat(), vec![rect(a, b, [P, zero(), P, zero()])], Point::new(a / 2., b / 2.), 1e-5)
                .unwrap();
            let r = check_js_conditions(&d, DEFAULT_MAX_POLYGONS).unwrap();
            assert_eq!(r.solvable, solvable, "a={a} b={b}");
            assert_eq!(r.polygons.len(), 5);
            if a == b {
                assert!(r.violations.iter().all(|v| r.polygons[v.polygon].is_boundary));
            }
        }
    }

    #[test]
    fn enumeration_is_deterministic() {
        let d = build_domain(&flat(), vec![rect(1.0, 2.0, [P, zero(), P, zero()])], Point::new(0.5, 1.0), 1e-5)
            .unwrap();
        let a = enumerate_inscribed_polygons(&d, 100).unwrap();
        let b = enumerate_inscribed_polygons(&d, 100).unwrap();
        let key = |s: &PolygonSet| {
            s.polygons.iter().map(|p| (p.vertices.clone(), p.gamma.to_bits())).collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
        for p in &a.polygons {
            assert!(p.alpha + p.beta <= p.gamma * (1.0 + 1e-12));
        }
    }

    #[test]
    fn overflow_is_flagged() {
        let d = build_domain(&flat(), vec![rect(1.0, 2.0, [P, zero(), P, zero()])], Point::new(0.5, 1.0), 1e-5)
            .unwrap();
        let r = check_js_conditions(&d, 2).unwrap();
        assert!(r.inconclusive || !r.violations.is_empty());
        assert!(r.polygons.len() <= 2);
    }
}
