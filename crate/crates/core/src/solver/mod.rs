//! Minimal Killing graphs over a triangulated domain.
//!
//! A graph `t = u(x, y)` is minimal iff it is a critical point of its area
//! `E(u) = ∫ W_u λ² dx dy`, with `Gu = (u_x/λ − a, u_y/λ − b)` in the
//! orthonormal frame and `W_u = sqrt(1 + μ²‖Gu‖²)`. Writing
//! `g = ∇u − λ(a, b)`, the integrand `λ sqrt(λ² + μ²‖g‖²)` is strictly
//! convex in `∇u`, with gradient `μ² g / W` and Hessian
//! `(μ²/W)(I − μ² g gᵀ / (λ² W²))`. P1 elements turn this into a smooth
//! convex problem in the nodal heights, solved by damped Newton.

mod post;
pub mod sparse;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::chart::{ChartError, SubmersionChart};
use crate::domain::{ArcLabel, JSDomain, Topology};
use crate::expr::ExprError;
use crate::geom::Point;
use crate::mesh::{triangulate, Locator, Marker, MeshError, TriMesh};
use crate::mugeo::MugeoError;
use sparse::{pcg, Csr};

pub use post::{
    angle_function_field, detect_divergence_lines, dual_cell_loop, factorization_gap, flux, AngleSummary,
    DivergenceCluster, DivergenceOptions, DivergenceReport, FactorizationGap, FluxReport, LineFit,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Mugeo(#[from] MugeoError),
    #[error("boundary data at ({}, {}): {source}", point.x, point.y)]
    Data {
        point: Point,
        #[source]
        source: ExprError,
    },
    #[error("boundary value at vertex {0} is not finite")]
    NonFiniteBoundary(usize),
    #[error("expected {expected} nodal values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("solutions live on different meshes")]
    MeshMismatch,
    #[error("schedule must be positive and strictly increasing")]
    Schedule,
    #[error("curve leaves the mesh at ({}, {})", .0.x, .0.y)]
    CurveExitsMesh(Point),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Euclidean norm of the residual over the free nodes.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub cg_rtol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 200, armijo: 1e-4, cg_rtol: 1e-12, cg_max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    w: f64,
    lambda: f64,
    mu: f64,
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy)]
struct Element {
    dofs: [usize; 3],
    grads: [Point; 3],
    qp: (usize, usize),
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_00, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_44),
    (0.769_234_655_052_841_6, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Collapsed tensor Gauss rule on the reference triangle (exact for
/// polynomials of degree 9): barycentric-free `(ξ, η)` and weights summing
/// to `1/2`.
fn triangle_rule() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(25);
    for &(u, wu) in &GL5 {
        for &(v, wv) in &GL5 {
            out.push((u, v * (1.0 - u), wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Mesh, chart samples at the quadrature points, and the sparsity pattern
/// of the free unknowns. Charts whose fields are all constant use the
/// centroid rule; others a degree-9 rule.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Arc<TriMesh>,
    pub chart: SubmersionChart,
    elements: Vec<Element>,
    qps: Vec<QuadPoint>,
    /// Free-unknown index of every dof.
    free: Vec<Option<usize>>,
    n_free: usize,
    pattern: Csr,
    slots: Vec<[usize; 9]>,
    locator: Locator,
}

impl Discretization {
    pub fn new(mesh: Arc<TriMesh>, chart: &SubmersionChart) -> Result<Self, SolverError> {
        let m = &*mesh;
        let rule: Vec<(f64, f64, f64)> = if chart.is_homogeneous() { vec![(1.0 / 3.0, 1.0 / 3.0, 0.5)] } else { triangle_rule() };
        let mut elements = Vec::with_capacity(m.triangles.len());
        let mut qps = Vec::with_capacity(m.triangles.len() * rule.len());
        for (t, tri) in m.triangles.iter().enumerate() {
            let [p0, p1, p2] = tri.map(|i| m.vertices[i]);
            let area = m.area(t);
            let twice = 2.0 * area;
            // ∇φ_i = rot(opposite edge) / (2 |T|)
            let grads = [(p1, p2), (p2, p0), (p0, p1)].map(|(a, b)| {
                let e = b - a;
                Point::new(-e.y, e.x) * (1.0 / twice)
            });
            let start = qps.len();
            for &(xi, eta, w) in &rule {
                let p = p0 + (p1 - p0) * xi + (p2 - p0) * eta;
                let s = chart.sample(p)?;
                qps.push(QuadPoint { w: w * twice, lambda: s.lambda, mu: s.mu, a: s.a, b: s.b });
            }
            elements.push(Element { dofs: tri.map(|i| m.dof_map[i]), grads, qp: (start, qps.len()) });
        }
        let mut fixed = vec![false; m.n_dofs];
        for (i, mk) in m.markers.iter().enumerate() {
            if mk.is_boundary() {
                fixed[m.dof_map[i]] = true;
            }
        }
        let mut free = vec![None; m.n_dofs];
        let mut n_free = 0;
        for (d, f) in fixed.iter().enumerate() {
            if !f {
                free[d] = Some(n_free);
                n_free += 1;
            }
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for e in &elements {
            for &a in &e.dofs {
                for &b in &e.dofs {
                    if let (Some(i), Some(j)) = (free[a], free[b]) {
                        rows[i].push(j);
                    }
                }
            }
        }
        let pattern = Csr::from_rows(rows);
        let slots = elements
            .iter()
            .map(|e| {
                let mut s = [usize::MAX; 9];
                for k in 0..3 {
                    for l in 0..3 {
                        if let (Some(i), Some(j)) = (free[e.dofs[k]], free[e.dofs[l]]) {
                            s[3 * k + l] = pattern.slot(i, j);
                        }
                    }
                }
                s
            })
            .collect();
        let locator = Locator::new(m, chart.period);
        Ok(Discretization { mesh, chart: chart.clone(), elements, qps, free, n_free, pattern, slots, locator })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    fn grad_u(&self, e: &Element, u: &[f64]) -> Point {
        (0..3).fold(Point::default(), |acc, k| acc + e.grads[k] * u[e.dofs[k]])
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for e in &self.elements {
            let gu = self.grad_u(e, u);
            for q in &self.qps[e.qp.0..e.qp.1] {
                let g = gu - Point::new(q.a, q.b) * q.lambda;
                total += q.w * q.lambda * (q.lambda * q.lambda + q.mu * q.mu * g.dot(g)).sqrt();
            }
        }
        total
    }

    /// Energy, residual over the free unknowns and (optionally) the Hessian.
    fn assemble(&self, u: &[f64], hess: Option<&mut Csr>) -> (f64, Vec<f64>) {
        let mut r = vec![0.0; self.n_free];
        let mut energy = 0.0;
        let mut hess = hess;
        if let Some(h) = hess.as_deref_mut() {
            h.clear();
        }
        for (ei, e) in self.elements.iter().enumerate() {
            let gu = self.grad_u(e, u);
            let mut flux = Point::default();
            let mut hm = [0.0; 3];
            for q in &self.qps[e.qp.0..e.qp.1] {
                let g = gu - Point::new(q.a, q.b) * q.lambda;
                let mu2 = q.mu * q.mu;
                let w = (1.0 + mu2 * g.dot(g) / (q.lambda * q.lambda)).sqrt();
                energy += q.w * q.lambda * q.lambda * w;
                flux = flux + g * (q.w * mu2 / w);
                let c = q.w * mu2 / w;
                let k = mu2 / (q.lambda * q.lambda * w * w);
                hm[0] += c * (1.0 - k * g.x * g.x);
                hm[1] += -c * k * g.x * g.y;
                hm[2] += c * (1.0 - k * g.y * g.y);
            }
            for kk in 0..3 {
                if let Some(i) = self.free[e.dofs[kk]] {
                    r[i] += flux.dot(e.grads[kk]);
                }
            }
            if let Some(h) = hess.as_deref_mut() {
                let slots = &self.slots[ei];
                for kk in 0..3 {
                    let gk = e.grads[kk];
                    let hg = Point::new(hm[0] * gk.x + hm[1] * gk.y, hm[1] * gk.x + hm[2] * gk.y);
                    for ll in 0..3 {
                        let s = slots[3 * kk + ll];
                        if s != usize::MAX {
                            h.vals[s] += hg.dot(e.grads[ll]);
                        }
                    }
                }
            }
        }
        (energy, r)
    }
}

/// Nodal heights with per-triangle derived fields evaluated at centroids.
#[derive(Debug, Clone, Serialize)]
pub struct GraphSolution {
    #[serde(skip)]
    pub disc: Arc<Discretization>,
    /// Height at every mesh vertex.
    pub u: Vec<f64>,
    /// `Gu` in orthonormal-frame components.
    pub gu: Vec<Point>,
    pub w: Vec<f64>,
    /// Angle function `ν = μ / W`.
    pub nu: Vec<f64>,
    pub residual_norm: f64,
    pub energy: f64,
    pub energy_history: Vec<f64>,
    pub iterations: usize,
    pub cg_iterations: usize,
    pub converged: bool,
    /// A linear solve failed and the Hessian was regularized.
    pub regularized: bool,
}

impl GraphSolution {
    pub fn mesh(&self) -> &TriMesh {
        &self.disc.mesh
    }

    pub fn chart(&self) -> &SubmersionChart {
        &self.disc.chart
    }

    /// Linear interpolation of the heights at `p`.
    pub fn eval_at(&self, p: Point) -> Option<f64> {
        let m = self.mesh();
        let (t, b) = self.disc.locator.locate(m, p)?;
        let tri = m.triangles[t];
        Some((0..3).map(|k| b[k] * self.u[tri[k]]).sum())
    }

    /// `∇u` (chart coordinates) on triangle `t`.
    pub fn grad(&self, t: usize) -> Point {
        let m = self.mesh();
        let e = &self.disc.elements[t];
        let tri = m.triangles[t];
        (0..3).fold(Point::default(), |acc, k| acc + e.grads[k] * self.u[tri[k]])
    }

    /// `X_u = μ² Gu / W` (orthonormal components) at the centroid of `t`.
    pub fn x_field(&self, t: usize) -> Result<Point, SolverError> {
        let mu = self.chart().mu(self.mesh().centroid(t))?;
        Ok(self.gu[t] * (mu * mu / self.w[t]))
    }

    pub(crate) fn locator(&self) -> &Locator {
        &self.disc.locator
    }
}

/// Minimizes the discrete area with the boundary heights taken from
/// `values` (one per vertex); interior entries are the initial guess.
pub fn solve_dirichlet(
    disc: &Arc<Discretization>,
    values: &[f64],
    opts: &SolverOptions,
) -> Result<GraphSolution, SolverError> {
    let m = &*disc.mesh;
    if values.len() != m.vertices.len() {
        return Err(SolverError::LengthMismatch { expected: m.vertices.len(), got: values.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidOption("tol must be positive".into()));
    }
    let mut u = vec![0.0; m.n_dofs];
    for (i, &v) in values.iter().enumerate() {
        if m.markers[i].is_boundary() && !v.is_finite() {
            return Err(SolverError::NonFiniteBoundary(i));
        }
        u[m.dof_map[i]] = if v.is_finite() { v } else { 0.0 };
    }
    // boundary entries win over interior guesses sharing a dof
    for (i, &v) in values.iter().enumerate() {
        if m.markers[i].is_boundary() {
            u[m.dof_map[i]] = v;
        }
    }

    let mut hess = disc.pattern.clone();
    let mut history = Vec::new();
    let mut regularized = false;
    let mut converged = false;
    let mut polished = false;
    let mut cg_total = 0;
    let mut iterations = 0;
    let (mut energy, mut r) = disc.assemble(&u, Some(&mut hess));
    history.push(energy);
    let mut rnorm = norm(&r);
    let free_dofs: Vec<usize> = (0..m.n_dofs).filter(|&d| disc.free[d].is_some()).collect();

    while iterations < opts.max_iter {
        if rnorm <= opts.tol {
            converged = true;
            if polished || rnorm == 0.0 {
                break;
            }
            polished = true;
        }
        iterations += 1;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut delta = vec![0.0; disc.n_free];
        let mut out = pcg(&hess, &rhs, &mut delta, opts.cg_rtol, opts.cg_max_iter);
        cg_total += out.iterations;
        if !out.converged && out.residual > 1e-6 * norm(&rhs) {
            regularized = true;
            let diag = hess.diagonal();
            for (i, d) in diag.iter().enumerate() {
                let s = hess.slot(i, i);
                hess.vals[s] = d * (1.0 + 1e-8) + 1e-12;
            }
            out = pcg(&hess, &rhs, &mut delta, opts.cg_rtol.max(1e-10), opts.cg_max_iter);
            cg_total += out.iterations;
        }
        let slope: f64 = r.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let trial = |t: f64| {
            let mut v = u.clone();
            for &d in &free_dofs {
                v[d] += t * delta[disc.free[d].unwrap()];
            }
            v
        };
        // once the predicted decrease is below the energy's round-off,
        // Armijo cannot tell steps apart: require a smaller residual instead
        let energy_resolution = 64.0 * f64::EPSILON * energy.abs().max(f64::MIN_POSITIVE);
        let by_residual = -slope <= energy_resolution;
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1e-10 {
            let v = trial(t);
            let ok = if by_residual {
                norm(&disc.assemble(&v, None).1) < rnorm
            } else {
                disc.energy(&v) <= energy + opts.armijo * t * slope
            };
            if ok {
                accepted = Some(v);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else { break };
        u = next;
        let (e, rr) = disc.assemble(&u, Some(&mut hess));
        energy = e;
        r = rr;
        history.push(energy);
        let new_norm = norm(&r);
        if polished && new_norm <= opts.tol {
            rnorm = new_norm;
            converged = true;
            break;
        }
        rnorm = new_norm;
        converged = rnorm <= opts.tol;
    }
    if !converged && rnorm <= opts.tol {
        converged = true;
    }
    Ok(finish(disc, &u, energy, rnorm, history, iterations, cg_total, converged, regularized)?)
}

/// Solution object for given nodal heights (e.g. reloaded from disk); the
/// residual is assembled but no solve takes place.
pub fn graph_from_heights(disc: &Arc<Discretization>, heights: &[f64]) -> Result<GraphSolution, SolverError> {
    let m = &*disc.mesh;
    if heights.len() != m.vertices.len() {
        return Err(SolverError::LengthMismatch { expected: m.vertices.len(), got: heights.len() });
    }
    let mut u = vec![0.0; m.n_dofs];
    for (i, &v) in heights.iter().enumerate() {
        u[m.dof_map[i]] = v;
    }
    let (energy, r) = disc.assemble(&u, None);
    let rnorm = norm(&r);
    finish(disc, &u, energy, rnorm, vec![energy], 0, 0, false, false)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    disc: &Arc<Discretization>,
    u_dofs: &[f64],
    energy: f64,
    residual_norm: f64,
    energy_history: Vec<f64>,
    iterations: usize,
    cg_iterations: usize,
    converged: bool,
    regularized: bool,
) -> Result<GraphSolution, SolverError> {
    let m = &*disc.mesh;
    let u: Vec<f64> = m.dof_map.iter().map(|&d| u_dofs[d]).collect();
    let mut gu = Vec::with_capacity(m.triangles.len());
    let mut w = Vec::with_capacity(m.triangles.len());
    let mut nu = Vec::with_capacity(m.triangles.len());
    for (t, e) in disc.elements.iter().enumerate() {
        let grad = disc.grad_u(e, u_dofs);
        let s = disc.chart.sample(m.centroid(t))?;
        let g = Point::new(grad.x / s.lambda - s.a, grad.y / s.lambda - s.b);
        let wt = (1.0 + s.mu * s.mu * g.dot(g)).sqrt();
        gu.push(g);
        w.push(wt);
        nu.push(s.mu / wt);
    }
    Ok(GraphSolution {
        disc: disc.clone(),
        u,
        gu,
        w,
        nu,
        residual_norm,
        energy,
        energy_history,
        iterations,
        cg_iterations,
        converged,
        regularized,
    })
}

/// Boundary heights of truncation level `n`: `±n` on infinite arcs and the
/// data clamped to `[−n, n]` on finite arcs. At a corner a finite arc wins
/// over an infinite one, `+n` meeting `−n` gives 0, and two finite arcs
/// are averaged.
pub fn boundary_values(d: &JSDomain, m: &TriMesh, n: f64) -> Result<Vec<f64>, SolverError> {
    // infinite arcs report ±∞ so the corner rule can tell them apart
    let value = |arc: usize, p: Point| -> Result<f64, SolverError> {
        Ok(match &d.arcs[arc].label {
            ArcLabel::PlusInfinity => f64::INFINITY,
            ArcLabel::MinusInfinity => f64::NEG_INFINITY,
            ArcLabel::Finite(f) => f.eval(p.x, p.y).map_err(|source| SolverError::Data { point: p, source })?.clamp(-n, n),
        })
    };
    let truncate = |v: f64| v.clamp(-n, n);
    let mut out = vec![f64::NAN; m.vertices.len()];
    for (i, (&p, mk)) in m.vertices.iter().zip(&m.markers).enumerate() {
        out[i] = match *mk {
            Marker::Interior => f64::NAN,
            Marker::Arc(a) => truncate(value(a, p)?),
            Marker::Corner(k) => {
                let c = &d.corners[k];
                let (a, b) = (value(c.incoming, p)?, value(c.outgoing, p)?);
                match (a.is_finite(), b.is_finite()) {
                    (true, true) => 0.5 * (a + b),
                    (true, false) => a,
                    (false, true) => b,
                    (false, false) if a == b => truncate(a),
                    (false, false) => 0.0,
                }
            }
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceOptions {
    pub solver: SolverOptions,
    /// Interior changes are measured on the domain scaled by this factor
    /// towards its centroid.
    pub shrink: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions { solver: SolverOptions::default(), shrink: 0.8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceLevel {
    pub n: f64,
    pub solution: GraphSolution,
    /// `u_n(p₀)` at the domain's interior point.
    pub offset: f64,
    /// Sup over the shrunken domain of the change of `u_n − u_n(p₀)` from
    /// the previous level.
    pub interior_change: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub domain: JSDomain,
    pub p0: Point,
    pub shrink: f64,
    pub levels: Vec<SequenceLevel>,
}

impl SequenceResult {
    pub fn last(&self) -> &GraphSolution {
        &self.levels.last().expect("non-empty schedule").solution
    }
}

/// Whether `p` lies in `d` scaled by `factor` towards its centroid
/// (periodic strips are scaled vertically only).
pub fn in_shrunk_domain(d: &JSDomain, p: Point, factor: f64) -> bool {
    let c = d.centroid();
    let q = match d.topology {
        Topology::Planar => c + (p - c) * (1.0 / factor),
        Topology::PeriodicAnnulus => Point::new(p.x, c.y + (p.y - c.y) / factor),
    };
    d.contains(q)
}

/// Meshes `d` with size `h` and runs [`solve_sequence`].
pub fn solve_truncated_sequence(
    d: &JSDomain,
    h: f64,
    schedule: &[f64],
    opts: &SequenceOptions,
) -> Result<SequenceResult, SolverError> {
    let mesh = Arc::new(triangulate(d, h)?);
    let disc = Arc::new(Discretization::new(mesh, &d.chart)?);
    solve_sequence(d, &disc, schedule, opts)
}

/// Solves the truncated problems of the schedule in order, each warm-started
/// from the previous level.
pub fn solve_sequence(
    d: &JSDomain,
    disc: &Arc<Discretization>,
    schedule: &[f64],
    opts: &SequenceOptions,
) -> Result<SequenceResult, SolverError> {
    if schedule.is_empty() || schedule[0] <= 0.0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolverError::Schedule);
    }
    let m = &*disc.mesh;
    let inside: Vec<usize> =
        (0..m.vertices.len()).filter(|&i| in_shrunk_domain(d, m.vertices[i], opts.shrink)).collect();
    let mut levels: Vec<SequenceLevel> = Vec::new();
    for &n in schedule {
        let mut values = boundary_values(d, m, n)?;
        if let Some(prev) = levels.last() {
            for (i, v) in values.iter_mut().enumerate() {
                if !m.markers[i].is_boundary() {
                    *v = prev.solution.u[i];
                }
            }
        }
        let solution = solve_dirichlet(disc, &values, &opts.solver)?;
        let offset = solution.eval_at(d.interior_point).ok_or(SolverError::CurveExitsMesh(d.interior_point))?;
        let interior_change = levels.last().map(|prev| {
            inside
                .iter()
                .map(|&i| ((solution.u[i] - offset) - (prev.solution.u[i] - prev.offset)).abs())
                .fold(0.0, f64::max)
        });
        levels.push(SequenceLevel { n, solution, offset, interior_change });
    }
    Ok(SequenceResult { domain: d.clone(), p0: d.interior_point, shrink: opts.shrink, levels })
}
