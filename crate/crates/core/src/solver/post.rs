//! Quantities derived from solved graphs: fluxes, the angle function,
//! divergence lines of a truncated sequence, and the monotonicity gap
//! between two graphs.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use super::{in_shrunk_domain, GraphSolution, SequenceResult, SolverError};
use crate::domain::Topology;
use crate::geom::{dist_point_segment, Point};
use crate::mesh::{barycentric, TriMesh};
use crate::mugeo::{max_abs_mu_curvature, shoot_until, CurveSample, NormalSide};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxReport {
    /// `∫ ⟨X_u, η⟩` along the curve.
    pub value: f64,
    /// μ-length of the curve, by the same midpoint rule.
    pub mu_length: f64,
    pub ratio: f64,
}

fn point_triangle_dist(m: &TriMesh, t: usize, p: Point) -> f64 {
    let b = barycentric(m, t, p);
    if b.iter().all(|&x| x >= 0.0) {
        return 0.0;
    }
    let [a, bb, c] = m.triangles[t].map(|i| m.vertices[i]);
    dist_point_segment(p, a, bb).min(dist_point_segment(p, bb, c)).min(dist_point_segment(p, c, a))
}

/// Triangle containing `p`, or the nearest one within `0.25 h` (boundary
/// curves sampled more finely than the mesh stick out by a sagitta).
fn locate_near(s: &GraphSolution, p: Point) -> Option<usize> {
    let m = s.mesh();
    if let Some((t, _)) = s.locator().locate(m, p) {
        return Some(t);
    }
    let mut best: Option<(usize, f64)> = None;
    let r = 0.25 * m.h;
    for dx in [-r, 0.0, r] {
        for dy in [-r, 0.0, r] {
            if let Some((t, _)) = s.locator().locate(m, p + Point::new(dx, dy)) {
                let q = match s.chart().period {
                    Some(per) => {
                        // compare in the unwrapped copy nearest to the triangle
                        let c = m.centroid(t);
                        Point::new(p.x + ((c.x - p.x) / per).round() * per, p.y)
                    }
                    None => p,
                };
                let dist = point_triangle_dist(m, t, q);
                if best.map_or(true, |(_, d)| dist < d) {
                    best = Some((t, dist));
                }
            }
        }
    }
    best.filter(|&(_, d)| d <= r).map(|(t, _)| t)
}

/// Flux of `X_u = μ² Gu / W` across `curve` towards its normal side:
/// per segment, `∇u` of the triangle containing the midpoint and the chart
/// fields at the midpoint. Since `|X_u| < μλ` pointwise, the value is
/// bounded by the reported μ-length.
pub fn flux(s: &GraphSolution, curve: &CurveSample) -> Result<FluxReport, SolverError> {
    let c = s.chart();
    let mut value = 0.0;
    let mut length = 0.0;
    for w in curve.points.windows(2) {
        let (p, q) = (w[0], w[1]);
        let seg = q - p;
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        let mid = p.lerp(q, 0.5);
        let n = seg.normalized().perp() * curve.normal.sign();
        let t = locate_near(s, mid).ok_or(SolverError::CurveExitsMesh(mid))?;
        let smp = c.sample(mid)?;
        let g = s.grad(t) - Point::new(smp.a, smp.b) * smp.lambda;
        let mu2 = smp.mu * smp.mu;
        let wv = (1.0 + mu2 * g.dot(g) / (smp.lambda * smp.lambda)).sqrt();
        value += (g * (mu2 / wv)).dot(n) * len;
        length += smp.lambda * smp.mu * len;
    }
    Ok(FluxReport { value, mu_length: length, ratio: if length > 0.0 { value / length } else { 0.0 } })
}

/// Closed boundary of the union of the median dual cells of `vertices`
/// (the polygons joining edge midpoints and triangle centroids around each
/// vertex), counterclockwise. Vertices must be interior and their union
/// of cells simply connected.
pub fn dual_cell_loop(m: &TriMesh, vertices: &[usize]) -> Option<Vec<Point>> {
    let inside: std::collections::HashSet<usize> = vertices.iter().copied().collect();
    let key = |p: Point| (p.x.to_bits(), p.y.to_bits());
    let mid = |a: usize, b: usize| {
        let (a, b) = (a.min(b), a.max(b));
        (m.vertices[a] + m.vertices[b]) * 0.5
    };
    let mut next: HashMap<(u64, u64), Point> = HashMap::new();
    for (t, tri) in m.triangles.iter().enumerate() {
        let c = m.centroid(t);
        for k in 0..3 {
            let (i, j, l) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            if !inside.contains(&i) {
                continue;
            }
            if !inside.contains(&j) {
                next.insert(key(mid(i, j)), c);
            }
            if !inside.contains(&l) {
                next.insert(key(c), mid(l, i));
            }
        }
    }
    // centroid keys can repeat when one triangle carries two boundary
    // pieces; chain from a midpoint and consume entries
    let start = *next.iter().map(|(k, _)| k).min()?;
    let mut out = vec![Point::new(f64::from_bits(start.0), f64::from_bits(start.1))];
    let mut cur = start;
    for _ in 0..=next.len() {
        let p = next.remove(&cur)?;
        if key(p) == start {
            out.push(p);
            return next.is_empty().then_some(out);
        }
        out.push(p);
        cur = key(p);
    }
    None
}

#[derive(Debug, Clone, Serialize)]
pub struct AngleSummary {
    pub nu: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn angle_function_field(s: &GraphSolution) -> AngleSummary {
    let min = s.nu.iter().copied().fold(f64::INFINITY, f64::min);
    let max = s.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    AngleSummary { nu: s.nu.clone(), min, max }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationGap {
    /// `⟨Gu/W_u − Gv/W_v, Gu − Gv⟩` per triangle.
    pub lhs: Vec<f64>,
    /// `(W_u + W_v) ‖N_u − N_v‖² / (2μ²)` per triangle.
    pub rhs: Vec<f64>,
}

/// Both sides of the monotonicity identity per triangle, at the centroids.
/// The unit normals are compared through their frame components
/// `N = (−μ Gu, 1) / W`.
pub fn factorization_gap(s1: &GraphSolution, s2: &GraphSolution) -> Result<FactorizationGap, SolverError> {
    let (m1, m2) = (s1.mesh(), s2.mesh());
    if m1.triangles != m2.triangles || m1.vertices != m2.vertices {
        return Err(SolverError::MeshMismatch);
    }
    let mut lhs = Vec::with_capacity(m1.triangles.len());
    let mut rhs = Vec::with_capacity(m1.triangles.len());
    for t in 0..m1.triangles.len() {
        let mu = s1.chart().mu(m1.centroid(t))?;
        let (gu, gv, wu, wv) = (s1.gu[t], s2.gu[t], s1.w[t], s2.w[t]);
        lhs.push((gu * (1.0 / wu) - gv * (1.0 / wv)).dot(gu - gv));
        let dn = gu * (mu / wu) - gv * (mu / wv);
        let dv = 1.0 / wu - 1.0 / wv;
        rhs.push((wu + wv) * (dn.dot(dn) + dv * dv) / (2.0 * mu * mu));
    }
    Ok(FactorizationGap { lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceOptions {
    pub nu_thresh: f64,
    /// Required ratio `ν_prev / ν_last` over the last two levels.
    pub decrease_factor: f64,
    /// Only triangles whose centroid lies in the domain scaled by this
    /// factor are considered.
    pub region_shrink: Option<f64>,
    pub geo_tol: f64,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        DivergenceOptions { nu_thresh: 0.1, decrease_factor: 1.5, region_shrink: None, geo_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LineFit {
    pub points: Vec<Point>,
    pub length: f64,
    pub closed: bool,
    pub max_curvature: f64,
    /// The whole line lies within `3h` of the cluster.
    pub within_cluster: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceCluster {
    #[serde(skip)]
    pub triangles: Vec<usize>,
    pub size: usize,
    pub area: f64,
    pub min_nu: f64,
    pub seed: Point,
    pub fit: Option<LineFit>,
    /// The fitted geodesic qualifies as a divergence line.
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    /// Fewer than two levels: nothing could be assessed.
    pub assessed: bool,
    pub clusters: Vec<DivergenceCluster>,
    pub flagged_area: f64,
    /// Area of the triangles eligible for flagging.
    pub region_area: f64,
    pub level_min_nu: Vec<(f64, f64)>,
}

impl DivergenceReport {
    pub fn lines(&self) -> impl Iterator<Item = &DivergenceCluster> {
        self.clusters.iter().filter(|c| c.accepted)
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Flags triangles where `ν` is small at the last level and has dropped by
/// the decrease factor since the previous one, clusters them by shared
/// edges, and fits a μ-geodesic to each cluster: shot from the `ν`-minimum
/// orthogonally to `Gu`, across the domain (once around the period in
/// periodic strips).
pub fn detect_divergence_lines(r: &SequenceResult, opts: &DivergenceOptions) -> Result<DivergenceReport, SolverError> {
    let level_min_nu: Vec<(f64, f64)> =
        r.levels.iter().map(|l| (l.n, l.solution.nu.iter().copied().fold(f64::INFINITY, f64::min))).collect();
    if r.levels.len() < 2 {
        return Ok(DivergenceReport {
            assessed: false,
            clusters: Vec::new(),
            flagged_area: 0.0,
            region_area: 0.0,
            level_min_nu,
        });
    }
    let last = &r.levels[r.levels.len() - 1].solution;
    let prev = &r.levels[r.levels.len() - 2].solution;
    let m = last.mesh();
    let d = &r.domain;
    let eligible: Vec<bool> = (0..m.triangles.len())
        .map(|t| opts.region_shrink.map_or(true, |f| in_shrunk_domain(d, m.centroid(t), f)))
        .collect();
    let region_area: f64 = (0..m.triangles.len()).filter(|&t| eligible[t]).map(|t| m.area(t)).sum();
    let flagged: Vec<bool> = (0..m.triangles.len())
        .map(|t| eligible[t] && last.nu[t] < opts.nu_thresh && prev.nu[t] >= opts.decrease_factor * last.nu[t])
        .collect();

    // triangle adjacency through edges of identified dofs
    let mut by_edge: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (t, tri) in m.triangles.iter().enumerate() {
        if !flagged[t] {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (m.dof_map[tri[k]], m.dof_map[tri[(k + 1) % 3]]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let mut neighbours: HashMap<usize, Vec<usize>> = HashMap::new();
    for ts in by_edge.values() {
        for &a in ts {
            for &b in ts {
                if a != b {
                    neighbours.entry(a).or_default().push(b);
                }
            }
        }
    }

    let mut seen = vec![false; m.triangles.len()];
    let mut clusters = Vec::new();
    let mut flagged_area = 0.0;
    for start in 0..m.triangles.len() {
        if !flagged[start] || seen[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(t) = queue.pop_front() {
            members.push(t);
            for &nb in neighbours.get(&t).map(Vec::as_slice).unwrap_or(&[]) {
                if !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        members.sort_unstable();
        let area: f64 = members.iter().map(|&t| m.area(t)).sum();
        flagged_area += area;
        clusters.push(fit_cluster(r, last, members, area, opts)?);
    }
    Ok(DivergenceReport { assessed: true, clusters, flagged_area, region_area, level_min_nu })
}

fn fit_cluster(
    r: &SequenceResult,
    s: &GraphSolution,
    members: Vec<usize>,
    area: f64,
    opts: &DivergenceOptions,
) -> Result<DivergenceCluster, SolverError> {
    let m = s.mesh();
    let d = &r.domain;
    let c = s.chart();
    let min_nu = members.iter().map(|&t| s.nu[t]).fold(f64::INFINITY, f64::min);
    let centre = members.iter().fold(Point::default(), |acc, &t| acc + m.centroid(t) * m.area(t)) * (1.0 / area);
    // among the (near-)minimal triangles, the one closest to the cluster centre
    let seed_t = members
        .iter()
        .copied()
        .filter(|&t| s.nu[t] <= min_nu * (1.0 + 1e-9))
        .min_by(|&a, &b| m.centroid(a).dist(centre).total_cmp(&m.centroid(b).dist(centre)))
        .expect("non-empty cluster");
    let seed = m.centroid(seed_t);
    let gu = s.gu[seed_t];
    let mut cluster = DivergenceCluster {
        size: members.len(),
        triangles: members,
        area,
        min_nu,
        seed,
        fit: None,
        accepted: false,
    };
    if gu.norm() == 0.0 {
        return Ok(cluster);
    }
    let theta = gu.perp().angle();
    let boundary_mu: f64 = d.arc_lengths.iter().sum();
    let step = (m.h / 4.0) * c.rho(seed)?;
    let arc_points = match (d.topology, c.period) {
        (Topology::PeriodicAnnulus, Some(per)) => {
            let x0 = seed.x;
            let dir = if theta.cos() >= 0.0 { 1.0 } else { -1.0 };
            let stop = move |p: Point| dir * (p.x - x0) >= per;
            let max_len = 4.0 * boundary_mu.max(per * c.rho(seed)?);
            let g = shoot_until(c, seed, theta, max_len, step, &stop)?;
            g.points
        }
        _ => {
            let stop = |p: Point| !d.contains(p);
            let max_len = 2.0 * boundary_mu;
            let fwd = shoot_until(c, seed, theta, max_len, step, &stop)?;
            let bwd = shoot_until(c, seed, theta + std::f64::consts::PI, max_len, step, &stop)?;
            let mut pts: Vec<Point> = bwd.points.iter().rev().copied().collect();
            pts.extend_from_slice(&fwd.points[1..]);
            pts
        }
    };
    let closed = c.period.is_some_and(|per| {
        let (a, b) = (arc_points[0], *arc_points.last().unwrap());
        ((b.x - a.x).abs() - per).abs() < 1e-6 * per && (b.y - a.y).abs() < 1e-6 * per
    });
    let curve = CurveSample::from_points(arc_points.clone(), NormalSide::Left);
    let (max_curvature, _) = max_abs_mu_curvature(c, &curve)?;
    let verts: Vec<Point> = {
        let mut v: Vec<usize> = cluster.triangles.iter().flat_map(|&t| m.triangles[t]).collect();
        v.sort_unstable();
        v.dedup();
        v.into_iter().map(|i| m.vertices[i]).collect()
    };
    let reach = 3.0 * m.h;
    let wrap = |p: Point, q: Point| match c.period {
        Some(per) => {
            let dx = (p.x - q.x).rem_euclid(per);
            Point::new(dx.min(per - dx), p.y - q.y).norm()
        }
        None => p.dist(q),
    };
    let within_cluster = arc_points.iter().all(|&p| verts.iter().any(|&q| wrap(p, q) <= reach));
    let length = crate::mugeo::mu_length(c, &curve).unwrap_or(f64::NAN);
    cluster.accepted = within_cluster && max_curvature <= opts.geo_tol;
    cluster.fit = Some(LineFit { points: arc_points, length, closed, max_curvature, within_cluster });
    Ok(cluster)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::chart::{Region, SubmersionChart};
    use crate::domain::{build_domain, polygon_loop, ArcLabel, JSDomain};
    use crate::expr::Expr;
    use crate::mesh::triangulate;
    use crate::scene::builtin_scene;
    use crate::solver::{solve_dirichlet, solve_truncated_sequence, Discretization, SequenceOptions, SolverOptions};

    fn unit_square() -> (JSDomain, Arc<Discretization>) {
        let chart = SubmersionChart::flat(Region::Rect { x0: -1.0, x1: 2.0, y0: -1.0, y1: 2.0 }, None).unwrap();
        let corners = [Point::new(0., 0.), Point::new(1., 0.), Point::new(1., 1.), Point::new(0., 1.)];
        let z = || ArcLabel::Finite(Expr::num(0.0));
        let d = build_domain(&chart, vec![polygon_loop(&corners, &[z(), z(), z(), z()], 4)], Point::new(0.5, 0.5), 1e-5)
            .unwrap();
        let mesh = Arc::new(triangulate(&d, 0.1).unwrap());
        let disc = Arc::new(Discretization::new(mesh, &chart).unwrap());
        (d, disc)
    }

    fn solve_with(disc: &Arc<Discretization>, f: impl Fn(Point) -> f64) -> GraphSolution {
        let values: Vec<f64> = disc
            .mesh
            .vertices
            .iter()
            .zip(&disc.mesh.markers)
            .map(|(p, m)| if m.is_boundary() { f(*p) } else { 0.0 })
            .collect();
        solve_dirichlet(disc, &values, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn affine_flux_and_angle() {
        let (_, disc) = unit_square();
        let p = 0.75;
        let s = solve_with(&disc, |q| p * q.x);
        let seg: Vec<Point> = (0..=40).map(|i| Point::new(0.5, i as f64 / 40.0)).collect();
        // the right-hand normal of an upward segment points along +x
        let curve = CurveSample::from_points(seg, NormalSide::Right);
        let r = flux(&s, &curve).unwrap();
        assert!((r.value - p / (1.0 + p * p).sqrt()).abs() < 1e-10, "{}", r.value);
        assert!((r.mu_length - 1.0).abs() < 1e-12);
        let a = angle_function_field(&s);
        let expect = 1.0 / (1.0 + p * p).sqrt();
        assert!((a.min - expect).abs() < 1e-10 && (a.max - expect).abs() < 1e-10);
    }

    #[test]
    fn closed_dual_loop_has_zero_flux() {
        let (_, disc) = unit_square();
        let s = solve_with(&disc, |q| (3.0 * q.x).sin() + 2.0 * q.y * q.y);
        let m = &*disc.mesh;
        let centre = Point::new(0.5, 0.5);
        let set: Vec<usize> = (0..m.vertices.len()).filter(|&i| m.vertices[i].dist(centre) < 0.25).collect();
        let lp = dual_cell_loop(m, &set).expect("simple loop");
        assert_eq!(lp.first(), lp.last());
        let r = flux(&s, &CurveSample::from_points(lp, NormalSide::Right)).unwrap();
        assert!(r.value.abs() <= 1e-3 * r.mu_length, "{r:?}");
        assert!(r.value.abs() <= r.mu_length * (1.0 + 1e-6));
    }

    #[test]
    fn factorization_sides_agree() {
        let (_, disc) = unit_square();
        let u = solve_with(&disc, |q| q.x);
        let v = solve_with(&disc, |_| 0.0);
        let g = factorization_gap(&u, &v).unwrap();
        for (l, r) in g.lhs.iter().zip(&g.rhs) {
            assert!((l - 0.5f64.sqrt()).abs() < 1e-10);
            assert!((l - r).abs() < 1e-10);
        }
        let same = factorization_gap(&u, &u).unwrap();
        assert!(same.lhs.iter().chain(&same.rhs).all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn cylinder_divergence_lines() {
        let d = builtin_scene("flat-cylinder").unwrap().domain.unwrap();
        let r = solve_truncated_sequence(&d, 0.25, &[4.0, 8.0, 16.0], &SequenceOptions::default()).unwrap();
        let rep = detect_divergence_lines(&r, &DivergenceOptions::default()).unwrap();
        assert!(rep.assessed);
        assert!(rep.flagged_area >= 0.9 * rep.region_area, "{} / {}", rep.flagged_area, rep.region_area);
        assert!(rep.lines().count() >= 1);
        for c in rep.lines() {
            let fit = c.fit.as_ref().unwrap();
            assert!(fit.closed && fit.max_curvature <= 1e-5);
            assert!(fit.points.iter().all(|p| (p.y - c.seed.y).abs() < 1e-8));
        }
        let single = solve_truncated_sequence(&d, 0.25, &[4.0], &SequenceOptions::default()).unwrap();
        let rep = detect_divergence_lines(&single, &DivergenceOptions::default()).unwrap();
        assert!(!rep.assessed && rep.is_empty());
    }
}
