//! P1 triangulations of Jenkins–Serrin domains with boundary markers.
//!
//! Planar domains use a constrained Delaunay triangulation of the
//! discretized boundary, seeded with an interior triangular lattice and then
//! refined for angle quality; periodic strips use a structured mesh whose
//! right seam is identified with the left one through the degree-of-freedom
//! map.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
use thiserror::Error;

use crate::domain::{periodic_height, JSDomain, Topology};
use crate::geom::{dist_point_segment, segments_intersect, Point};
use crate::mugeo::CurveSample;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh size h = {h} is too large for a domain of diameter {diameter}")]
    SizeTooLarge { h: f64, diameter: f64 },
    #[error("mesh size must be positive, got {0}")]
    InvalidSize(f64),
    #[error("discretized boundary intersects itself near ({}, {})", .0.x, .0.y)]
    BoundaryIntersection(Point),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Marker {
    Interior,
    /// Interior point of a boundary arc.
    Arc(usize),
    /// Junction of two arcs; index into the domain's corner list.
    Corner(usize),
}

impl Marker {
    pub fn is_boundary(self) -> bool {
        self != Marker::Interior
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub markers: Vec<Marker>,
    pub h: f64,
    /// Unknown associated with each vertex; seam copies share the unknown of
    /// their partner.
    pub dof_map: Vec<usize>,
    pub n_dofs: usize,
    /// `(seam copy, original)` vertex pairs of a periodic mesh.
    pub periodic_pairs: Vec<(usize, usize)>,
}

impl TriMesh {
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * (b - a).cross(c - a)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        (a + b + c) * (1.0 / 3.0)
    }

    /// Distinct edges of the triangulation as sorted vertex pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    pub fn max_edge(&self) -> f64 {
        self.edges().iter().map(|&(a, b)| self.vertices[a].dist(self.vertices[b])).fold(0.0, f64::max)
    }

    /// `V − E + F` after the periodic identification.
    pub fn euler_characteristic(&self) -> i64 {
        let mut e: Vec<(usize, usize)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (self.dof_map[a], self.dof_map[b]);
                (a.min(b), a.max(b))
            })
            .collect();
        e.sort_unstable();
        e.dedup();
        self.n_dofs as i64 - e.len() as i64 + self.triangles.len() as i64
    }

    /// Edges on the boundary (used by exactly one triangle), oriented with
    /// the mesh on the left.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut out: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .filter(|&(a, b)| count[&(a.min(b), a.max(b))] == 1)
            .collect();
        out.sort_unstable();
        out
    }

    /// Smallest interior angle of triangle `t`, in radians.
    pub fn min_angle(&self, t: usize) -> f64 {
        let p = self.triangles[t].map(|i| self.vertices[i]);
        (0..3)
            .map(|k| {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let (u, v) = (b - a, c - a);
                u.cross(v).abs().atan2(u.dot(v))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Plain-text export: a header, one `x y marker` line per vertex, then
    /// one `i j k` line per triangle (0-based vertex indices).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# triangle mesh\n");
        s.push_str("# marker: interior | arc:<k> | corner:<k>\n");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for (p, m) in self.vertices.iter().zip(&self.markers) {
            let tag = match m {
                Marker::Interior => "interior".to_string(),
                Marker::Arc(k) => format!("arc:{k}"),
                Marker::Corner(k) => format!("corner:{k}"),
            };
            let _ = writeln!(s, "{:.17e} {:.17e} {tag}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

/// Bucket grid for point location in a mesh.
#[derive(Debug, Clone)]
pub struct Locator {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    period: Option<(f64, f64)>,
}

impl Locator {
    pub fn new(m: &TriMesh, period: Option<f64>) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &m.vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let cell = m.h.max(1e-12);
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in m.triangles.iter().enumerate() {
            let ps = tri.map(|i| m.vertices[i]);
            let (x0, x1) = (ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
            let (i0, i1) = (((x0 - lo.x) / cell) as usize, (((x1 - lo.x) / cell) as usize).min(nx - 1));
            let (j0, j1) = (((y0 - lo.y) / cell) as usize, (((y1 - lo.y) / cell) as usize).min(ny - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Locator { lo, cell, nx, ny, buckets, period: period.map(|p| (lo.x, p)) }
    }

    /// Triangle containing `p` (closed, with a relative slack of `1e-10`)
    /// and the barycentric coordinates of `p` in it.
    pub fn locate(&self, m: &TriMesh, p: Point) -> Option<(usize, [f64; 3])> {
        let p = match self.period {
            Some((x0, per)) => Point::new(x0 + (p.x - x0).rem_euclid(per), p.y),
            None => p,
        };
        let fi = (p.x - self.lo.x) / self.cell;
        let fj = (p.y - self.lo.y) / self.cell;
        if fi < -1e-9 || fj < -1e-9 {
            return None;
        }
        let (i, j) = ((fi.max(0.0) as usize).min(self.nx - 1), (fj.max(0.0) as usize).min(self.ny - 1));
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let b = barycentric(m, t, p);
            let worst = b.iter().copied().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, _, w)| worst > w) {
                best = Some((t, b, worst));
            }
        }
        best.filter(|&(_, _, w)| w >= -1e-10).map(|(t, b, _)| (t, b))
    }
}

pub fn barycentric(m: &TriMesh, t: usize, p: Point) -> [f64; 3] {
    let [a, b, c] = m.triangles[t].map(|i| m.vertices[i]);
    let area = (b - a).cross(c - a);
    let l1 = (c - b).cross(p - b) / area;
    let l2 = (a - c).cross(p - c) / area;
    [l1, l2, 1.0 - l1 - l2]
}

/// Points along `curve` with chord length below `h` and distance from the
/// curve to each chord below `sag`. Endpoints included; `min_edges` should
/// be a power of two.
fn discretize_curve(curve: &CurveSample, h: f64, sag: f64, min_edges: usize) -> Vec<Point> {
    let n = curve.len();
    // parameter u in [0, n-1]: segment index plus local t
    let eval = |u: f64| -> Point {
        let i = (u.floor() as usize).min(n - 2);
        curve.segment_eval(i, u - i as f64).0
    };
    let chord: Vec<f64> = {
        let mut acc = vec![0.0];
        for k in 0..n - 1 {
            let prev = *acc.last().unwrap();
            acc.push(prev + curve.points[k].dist(curve.points[k + 1]));
        }
        acc
    };
    let total = chord[n - 1];
    // powers of two keep the discretizations for h and h/2 nested
    let m = min_edges.max(((total / h).ceil() as usize).next_power_of_two());
    let param_at = |s: f64| -> f64 {
        let k = chord.partition_point(|&c| c <= s).clamp(1, n - 1);
        let (c0, c1) = (chord[k - 1], chord[k]);
        (k - 1) as f64 + if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 }
    };
    let mut params: Vec<f64> = (0..=m).map(|j| param_at(total * j as f64 / m as f64)).collect();
    params[m] = (n - 1) as f64;

    let mut out = vec![0.0];
    let mut stack: Vec<(f64, f64)> = params.windows(2).rev().map(|w| (w[0], w[1])).collect();
    while let Some((ua, ub)) = stack.pop() {
        let (pa, pb) = (eval(ua), eval(ub));
        let mut worst = 0.0f64;
        for k in 1..8 {
            let q = eval(ua + (ub - ua) * k as f64 / 8.0);
            worst = worst.max(dist_point_segment(q, pa, pb));
        }
        for (k, q) in curve.points.iter().enumerate() {
            let kf = k as f64;
            if kf > ua && kf < ub {
                worst = worst.max(dist_point_segment(*q, pa, pb));
            }
        }
        if (pa.dist(pb) > h || worst > sag) && ub - ua > 1e-9 {
            let um = 0.5 * (ua + ub);
            stack.push((um, ub));
            stack.push((ua, um));
        } else {
            out.push(ub);
        }
    }
    let mut pts: Vec<Point> = out.into_iter().map(eval).collect();
    pts[0] = curve.first();
    *pts.last_mut().unwrap() = curve.last();
    pts
}

/// Triangulates `d` with maximal edge length `h`.
pub fn triangulate(d: &JSDomain, h: f64) -> Result<TriMesh, MeshError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(MeshError::InvalidSize(h));
    }
    let diameter = d.diameter();
    if h > 0.5 * diameter {
        return Err(MeshError::SizeTooLarge { h, diameter });
    }
    match d.topology {
        Topology::Planar => triangulate_planar(d, h),
        Topology::PeriodicAnnulus => triangulate_periodic(d, h),
    }
}

/// Boundary sagitta tolerance relative to `h²`.
const SAGITTA: f64 = 0.05;

fn triangulate_planar(d: &JSDomain, h: f64) -> Result<TriMesh, MeshError> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut markers: Vec<Marker> = Vec::new();
    let mut constraints: Vec<[usize; 2]> = Vec::new();
    let mut constraint_arc: Vec<usize> = Vec::new();
    let corner_of: HashMap<usize, usize> = d.corners.iter().enumerate().map(|(k, c)| (c.outgoing, k)).collect();

    for ids in &d.loops {
        let loop_start = vertices.len();
        for &a in ids {
            let pts = discretize_curve(&d.arcs[a].curve, h, SAGITTA * h * h, 4);
            let first = vertices.len();
            // the last point is the first point of the next arc
            for (k, p) in pts[..pts.len() - 1].iter().enumerate() {
                vertices.push(*p);
                markers.push(match (k, corner_of.get(&a)) {
                    (0, Some(&c)) => Marker::Corner(c),
                    _ => Marker::Arc(a),
                });
            }
            for k in first..vertices.len() {
                constraints.push([k, k + 1]);
                constraint_arc.push(a);
            }
        }
        let last = constraints.len() - 1;
        constraints[last][1] = loop_start;
    }
    let n_boundary = vertices.len();
    check_boundary_simple(&vertices, &constraints)?;

    let mut spacing = 0.8 * h;
    for _ in 0..8 {
        let mut pts = vertices.clone();
        pts.extend(lattice(d, spacing));
        let input: Vec<Point2<f64>> = pts.iter().map(|p| Point2::new(p.x, p.y)).collect();
        let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(input, constraints.clone())
            .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
        if cdt.num_vertices() != pts.len() {
            return Err(MeshError::Triangulation("duplicate mesh vertices".into()));
        }
        let params = RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(22.0))
            .with_max_allowed_area(spacing * spacing * 3f64.sqrt() / 4.0 * 1.2)
            .with_max_additional_vertices(20 * pts.len() + 1000);
        let result = cdt.refine(params);
        let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();

        let mut all: Vec<Point> = Vec::with_capacity(cdt.num_vertices());
        for v in cdt.vertices() {
            let p = v.position();
            all.push(Point::new(p.x, p.y));
        }
        let mut triangles = Vec::new();
        for f in cdt.inner_faces() {
            if excluded.contains(&f.fix()) {
                continue;
            }
            let vs = f.vertices().map(|v| v.fix().index());
            let [a, b, c] = vs.map(|i| all[i]);
            let area = 0.5 * (b - a).cross(c - a);
            triangles.push(if area > 0.0 { vs } else { [vs[0], vs[2], vs[1]] });
        }
        // vertices inserted on split boundary edges take the arc of that edge
        let eps = 1e-10 * d.diameter();
        let mut m_all = markers.clone();
        for p in &all[m_all.len()..] {
            let on_edge = constraints
                .iter()
                .zip(&constraint_arc)
                .find(|(e, _)| dist_point_segment(*p, vertices[e[0]], vertices[e[1]]) < eps);
            m_all.push(on_edge.map_or(Marker::Interior, |(_, &a)| Marker::Arc(a)));
        }
        let mesh = compact(all, triangles, m_all, h);
        if mesh.vertices.len() < n_boundary {
            return Err(MeshError::Triangulation("boundary vertices lost".into()));
        }
        if mesh.max_edge() <= h * (1.0 + 1e-12) {
            return Ok(mesh);
        }
        spacing *= 0.85;
    }
    Err(MeshError::Triangulation(format!("could not reach maximal edge length {h}")))
}

/// Drops vertices not referenced by any triangle, keeping order.
fn compact(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, markers: Vec<Marker>, h: f64) -> TriMesh {
    let mut used = vec![false; vertices.len()];
    for t in &triangles {
        for &i in t {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut vs = Vec::new();
    let mut ms = Vec::new();
    for i in 0..vertices.len() {
        if used[i] {
            remap[i] = vs.len();
            vs.push(vertices[i]);
            ms.push(markers[i]);
        }
    }
    let triangles: Vec<[usize; 3]> = triangles.into_iter().map(|t| t.map(|i| remap[i])).collect();
    let n = vs.len();
    TriMesh {
        vertices: vs,
        triangles,
        markers: ms,
        h,
        dof_map: (0..n).collect(),
        n_dofs: n,
        periodic_pairs: Vec::new(),
    }
}

fn check_boundary_simple(v: &[Point], edges: &[[usize; 2]]) -> Result<(), MeshError> {
    for (i, e) in edges.iter().enumerate() {
        let (a, b) = (v[e[0]], v[e[1]]);
        for f in &edges[i + 1..] {
            if f[0] == e[0] || f[0] == e[1] || f[1] == e[0] || f[1] == e[1] {
                continue;
            }
            let (c, dd) = (v[f[0]], v[f[1]]);
            if a.x.max(b.x) < c.x.min(dd.x)
                || c.x.max(dd.x) < a.x.min(b.x)
                || a.y.max(b.y) < c.y.min(dd.y)
                || c.y.max(dd.y) < a.y.min(b.y)
            {
                continue;
            }
            if segments_intersect(a, b, c, dd) {
                return Err(MeshError::BoundaryIntersection(a));
            }
        }
    }
    Ok(())
}

/// Triangular lattice of spacing `s` inside `d`, kept `0.5 s` away from the
/// boundary.
fn lattice(d: &JSDomain, s: f64) -> Vec<Point> {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for l in d.loop_polylines() {
        for p in l {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    let dy = s * 3f64.sqrt() / 2.0;
    let mut out = Vec::new();
    let rows = ((hi.y - lo.y) / dy).ceil() as usize;
    let cols = ((hi.x - lo.x) / s).ceil() as usize + 1;
    for r in 0..=rows {
        let y = lo.y + r as f64 * dy;
        let shift = if r % 2 == 1 { 0.5 * s } else { 0.0 };
        for c in 0..=cols {
            let p = Point::new(lo.x + shift + c as f64 * s, y);
            if d.contains(p) && d.boundary_distance(p) > 0.5 * s {
                out.push(p);
            }
        }
    }
    out
}

fn triangulate_periodic(d: &JSDomain, h: f64) -> Result<TriMesh, MeshError> {
    let period = d.chart.period.expect("periodic chart");
    let polys = d.loop_polylines();
    let (lower, upper) = (&polys[0], &polys[1]);
    let (arc_lo, arc_hi) = (d.loops[0][0], d.loops[1][0]);
    let x0 = lower[0].x.min(lower[lower.len() - 1].x);
    let max_height = (0..=64)
        .map(|k| {
            let x = x0 + period * k as f64 / 64.0;
            periodic_height(upper, period, x) - periodic_height(lower, period, x)
        })
        .fold(0.0, f64::max);
    let step = h / 2f64.sqrt();
    let nx = ((period / step).ceil() as usize).max(4);
    let ny = ((max_height / step).ceil() as usize).max(2);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut markers = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { x0 + period } else { x0 + period * i as f64 / nx as f64 };
            let (ylo, yhi) = (periodic_height(lower, period, x), periodic_height(upper, period, x));
            let y = match j {
                0 => ylo,
                _ if j == ny => yhi,
                _ => ylo + (yhi - ylo) * j as f64 / ny as f64,
            };
            vertices.push(Point::new(x, y));
            markers.push(match j {
                0 => Marker::Arc(arc_lo),
                _ if j == ny => Marker::Arc(arc_hi),
                _ => Marker::Interior,
            });
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, e) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, e]);
        }
    }
    let mut dof_map = vec![0; vertices.len()];
    let mut n_dofs = 0;
    let mut periodic_pairs = Vec::new();
    for j in 0..=ny {
        for i in 0..nx {
            dof_map[id(i, j)] = n_dofs;
            n_dofs += 1;
        }
    }
    for j in 0..=ny {
        dof_map[id(nx, j)] = dof_map[id(0, j)];
        periodic_pairs.push((id(nx, j), id(0, j)));
    }
    let mesh = TriMesh { vertices, triangles, markers, h, dof_map, n_dofs, periodic_pairs };
    if mesh.max_edge() > h * (1.0 + 1e-12) {
        return Err(MeshError::Triangulation(format!("strip cells too tall for h = {h}")));
    }
    if (0..mesh.triangles.len()).any(|t| mesh.area(t) <= 1e-14 * h * h) {
        return Err(MeshError::Triangulation("degenerate strip cell".into()));
    }
    Ok(mesh)
}

/// Signed area enclosed by the boundary edges (sum over all loops).
pub fn boundary_area(m: &TriMesh) -> f64 {
    m.boundary_edges().iter().map(|&(a, b)| 0.5 * m.vertices[a].cross(m.vertices[b])).sum()
}

/// Total area of the mesh triangles.
pub fn mesh_area(m: &TriMesh) -> f64 {
    (0..m.triangles.len()).map(|t| m.area(t)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Region, SubmersionChart};
    use crate::domain::{build_domain, polygon_loop, ArcLabel};
    use crate::expr::Expr;
    use crate::geom::{dist_point_polyline, hausdorff};
    use crate::scene::builtin_scene;
    use std::f64::consts::PI;

    fn unit_square() -> JSDomain {
        let c = SubmersionChart::flat(Region::Rect { x0: -1.0, x1: 2.0, y0: -1.0, y1: 2.0 }, None).unwrap();
        let corners = [Point::new(0., 0.), Point::new(1., 0.), Point::new(1., 1.), Point::new(0., 1.)];
        let z = || ArcLabel::Finite(Expr::num(0.0));
        build_domain(&c, vec![polygon_loop(&corners, &[z(), z(), z(), z()], 4)], Point::new(0.5, 0.5), 1e-5).unwrap()
    }

    fn check_invariants(m: &TriMesh) {
        for t in 0..m.triangles.len() {
            assert!(m.area(t) > 1e-14 * m.h * m.h);
        }
        assert!(m.max_edge() <= m.h * (1.0 + 1e-12));
        for (a, b) in m.boundary_edges() {
            let periodic_seam = m.periodic_pairs.iter().any(|&(s, o)| s == a || s == b || o == a || o == b)
                && (m.vertices[a].x - m.vertices[b].x).abs() < 1e-12;
            if !periodic_seam {
                assert!(m.markers[a].is_boundary() && m.markers[b].is_boundary());
            }
        }
    }

    #[test]
    fn unit_square_mesh() {
        let d = unit_square();
        let m = triangulate(&d, 0.25).unwrap();
        assert!(m.triangles.len() >= 32, "{}", m.triangles.len());
        check_invariants(&m);
        assert_eq!(m.euler_characteristic(), 1);
        assert!((mesh_area(&m) - 1.0).abs() < 1e-12);
        assert_eq!(m.markers.iter().filter(|k| matches!(k, Marker::Corner(_))).count(), 4);
        // every vertex on the square's sides is marked
        for (p, k) in m.vertices.iter().zip(&m.markers) {
            let on_side = p.x.abs() < 1e-12 || p.y.abs() < 1e-12 || (p.x - 1.0).abs() < 1e-12 || (p.y - 1.0).abs() < 1e-12;
            assert_eq!(on_side, k.is_boundary(), "{p:?}");
        }
    }

    #[test]
    fn refinement_doubles_boundary_edges() {
        let d = unit_square();
        let coarse = triangulate(&d, 0.25).unwrap();
        let fine = triangulate(&d, 0.125).unwrap();
        assert!(fine.boundary_edges().len() >= 2 * coarse.boundary_edges().len());
        let corners = |m: &TriMesh| m.markers.iter().filter(|k| matches!(k, Marker::Corner(_))).count();
        assert_eq!(corners(&coarse), corners(&fine));
    }

    #[test]
    fn quality_away_from_corners() {
        let d = builtin_scene("flat-scherk").unwrap().domain.unwrap();
        let h = 0.2;
        let m = triangulate(&d, h).unwrap();
        check_invariants(&m);
        for t in 0..m.triangles.len() {
            let near_corner = d.corners.iter().any(|c| c.point.dist(m.centroid(t)) < 2.0 * h);
            if !near_corner {
                assert!(m.min_angle(t) >= 20f64.to_radians() - 1e-9, "{} {:?} {:?}", m.min_angle(t).to_degrees(), m.centroid(t), m.triangles[t].map(|i| m.markers[i]));
            }
        }
    }

    #[test]
    fn cylinder_seam_identified() {
        let d = builtin_scene("flat-cylinder").unwrap().domain.unwrap();
        let m = triangulate(&d, 0.2).unwrap();
        check_invariants(&m);
        let seam: Vec<usize> =
            (0..m.vertices.len()).filter(|&i| (m.vertices[i].x - 2.0 * PI).abs() < 1e-12).collect();
        assert_eq!(m.periodic_pairs.len(), seam.len());
        assert_eq!(m.n_dofs, m.vertices.len() - seam.len());
        let mut dofs = m.dof_map.clone();
        dofs.sort_unstable();
        dofs.dedup();
        assert_eq!(dofs.len(), m.n_dofs);
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn rotational_boundary_follows_catenaries() {
        let d = builtin_scene("rotational-r3").unwrap().domain.unwrap();
        let m = triangulate(&d, 0.1).unwrap();
        check_invariants(&m);
        assert_eq!(m.euler_characteristic(), 1);
        for (a, arc) in d.arcs.iter().enumerate() {
            // polyline built from the mesh boundary edges on this arc
            let edges: Vec<[Point; 2]> = m
                .boundary_edges()
                .into_iter()
                .filter(|&(u, v)| {
                    let on = |i: usize| matches!(m.markers[i], Marker::Arc(k) if k == a)
                        || matches!(m.markers[i], Marker::Corner(_)) && dist_point_polyline(m.vertices[i], &arc.curve.points) < 1e-12;
                    on(u) && on(v)
                })
                .map(|(u, v)| [m.vertices[u], m.vertices[v]])
                .collect();
            assert!(!edges.is_empty());
            let mesh_pts: Vec<Point> = edges.iter().flat_map(|e| [e[0], e[0].lerp(e[1], 0.5), e[1]]).collect();
            let from_samples = arc
                .curve
                .points
                .iter()
                .map(|p| edges.iter().map(|e| dist_point_segment(*p, e[0], e[1])).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            let to_samples = hausdorff(&mesh_pts, &arc.curve.points);
            assert!(from_samples.max(to_samples) < 1e-3, "arc {a}: {from_samples} {to_samples}");
        }
    }

    #[test]
    fn text_export_has_counts() {
        let m = triangulate(&unit_square(), 0.5).unwrap();
        let s = m.to_text();
        assert!(s.contains(&format!("vertices {}", m.vertices.len())));
        assert!(s.contains(&format!("triangles {}", m.triangles.len())));
        assert_eq!(s.lines().count(), 4 + m.vertices.len() + m.triangles.len());
    }

    #[test]
    fn oversized_h_rejected() {
        assert!(matches!(triangulate(&unit_square(), 2.0), Err(MeshError::SizeTooLarge { .. })));
    }
}
