//! Geometry of the conformal μ-metric `ρ²(dx² + dy²)`, `ρ = λμ`.
//!
//! A vertical cylinder over a base curve is minimal exactly when the curve
//! is a geodesic of this metric, and its mean curvature is `μ/2` times the
//! curve's μ-geodesic curvature.

use serde::Serialize;
use thiserror::Error;

use crate::chart::{ChartError, SubmersionChart};
use crate::geom::{chord_lengths, Point};

#[derive(Debug, Error)]
pub enum MugeoError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("curve leaves the chart region at sample {index} ({}, {})", point.x, point.y)]
    CurveExitsRegion { index: usize, point: Point },
    #[error("geodesic leaves the chart region immediately at ({}, {})", point.x, point.y)]
    ImmediateExit { point: Point },
    #[error("no μ-geodesic found from ({}, {}) to ({}, {}); closest miss {best_miss:e}", p.x, p.y, q.x, q.y)]
    NoConnection { p: Point, q: Point, best_miss: f64 },
    #[error("degenerate tangent at sample {0}")]
    DegenerateTangent(usize),
    #[error("sample {0} is not an interior sample")]
    NotInterior(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Which side of the curve the unit normal points to, relative to the
/// direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalSide {
    Left,
    Right,
}

impl NormalSide {
    pub fn sign(self) -> f64 {
        match self {
            NormalSide::Left => 1.0,
            NormalSide::Right => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            NormalSide::Left => NormalSide::Right,
            NormalSide::Right => NormalSide::Left,
        }
    }
}

/// How consecutive samples are joined when integrating along the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    /// Straight segments.
    Linear,
    /// Cubic Hermite segments through the samples and their exact tangents.
    Hermite,
}

/// A sampled planar curve with unit (Euclidean) tangent directions and a
/// chosen normal side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSample {
    pub points: Vec<Point>,
    pub tangents: Vec<Point>,
    pub normal: NormalSide,
    pub interp: Interp,
}

impl CurveSample {
    /// Polyline curve; tangents estimated by centred differences.
    pub fn from_points(points: Vec<Point>, normal: NormalSide) -> Self {
        let tangents = estimate_tangents(&points);
        CurveSample { points, tangents, normal, interp: Interp::Linear }
    }

    /// Smooth curve with known tangents (renormalised to unit length).
    pub fn with_tangents(points: Vec<Point>, tangents: Vec<Point>, normal: NormalSide) -> Self {
        assert_eq!(points.len(), tangents.len());
        let tangents = tangents.into_iter().map(Point::normalized).collect();
        CurveSample { points, tangents, normal, interp: Interp::Hermite }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        *self.points.last().expect("non-empty curve")
    }

    /// Euclidean unit normal on the chosen side at sample `i`.
    pub fn normal_at(&self, i: usize) -> Point {
        self.tangents[i].perp() * self.normal.sign()
    }

    /// Same geometric curve and normal, traversed backwards.
    pub fn reversed(&self) -> Self {
        CurveSample {
            points: self.points.iter().rev().copied().collect(),
            tangents: self.tangents.iter().rev().map(|t| -*t).collect(),
            normal: self.normal.flipped(),
            interp: self.interp,
        }
    }

    /// Point and velocity at parameter `t ∈ [0, 1]` of segment `i`.
    pub fn segment_eval(&self, i: usize, t: f64) -> (Point, Point) {
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        match self.interp {
            Interp::Linear => (p0.lerp(p1, t), p1 - p0),
            Interp::Hermite => {
                let d = p0.dist(p1);
                let (m0, m1) = (self.tangents[i] * d, self.tangents[i + 1] * d);
                let (t2, t3) = (t * t, t * t * t);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                let pos = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
                let d00 = 6.0 * t2 - 6.0 * t;
                let d10 = 3.0 * t2 - 4.0 * t + 1.0;
                let d01 = -6.0 * t2 + 6.0 * t;
                let d11 = 3.0 * t2 - 2.0 * t;
                let vel = p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11;
                (pos, vel)
            }
        }
    }
}

fn estimate_tangents(points: &[Point]) -> Vec<Point> {
    let n = points.len();
    if n < 2 {
        return vec![Point::new(1.0, 0.0); n];
    }
    let t = chord_lengths(points);
    (0..n)
        .map(|i| {
            let d = if i == 0 {
                points[1] - points[0]
            } else if i == n - 1 {
                points[n - 1] - points[n - 2]
            } else {
                let (w, _, _) = fd_weights(&t, i);
                points[i - 1] * w[0] + points[i] * w[1] + points[i + 1] * w[2]
            };
            d.normalized()
        })
        .collect()
}

/// Three-point non-uniform finite-difference weights at interior sample `i`
/// for the first and second derivative with respect to the parameter `t`.
fn fd_weights(t: &[f64], i: usize) -> ([f64; 3], [f64; 3], f64) {
    let h1 = t[i] - t[i - 1];
    let h2 = t[i + 1] - t[i];
    let first = [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))];
    let s = h1 * h2 * (h1 + h2);
    let second = [2.0 * h2 / s, -2.0 * (h1 + h2) / s, 2.0 * h1 / s];
    (first, second, h1.min(h2))
}

/// Sampled μ-geodesic parametrised by μ-arclength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicArc {
    pub points: Vec<Point>,
    /// Euclidean unit directions of travel.
    pub tangents: Vec<Point>,
    /// Cumulative μ-arclength, starting at 0.
    pub s: Vec<f64>,
    pub length: f64,
    pub closed: bool,
    /// The integration stopped before the requested length.
    pub truncated: bool,
}

impl GeodesicArc {
    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        *self.points.last().expect("non-empty arc")
    }

    pub fn initial_angle(&self) -> f64 {
        self.tangents[0].angle()
    }

    pub fn final_angle(&self) -> f64 {
        self.tangents.last().expect("non-empty arc").angle()
    }

    pub fn to_curve(&self, normal: NormalSide) -> CurveSample {
        CurveSample::with_tangents(self.points.clone(), self.tangents.clone(), normal)
    }

    pub fn reversed(&self) -> Self {
        let n = self.s.len();
        GeodesicArc {
            points: self.points.iter().rev().copied().collect(),
            tangents: self.tangents.iter().rev().map(|t| -*t).collect(),
            s: (0..n).map(|i| self.length - self.s[n - 1 - i]).collect(),
            length: self.length,
            closed: self.closed,
            truncated: self.truncated,
        }
    }
}

// 4-point Gauss-Legendre rule mapped to [0, 1].
const GL4: [(f64, f64); 4] = [
    (0.5 - 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_9),
    (0.5 - 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
    (0.5 + 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
    (0.5 + 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_9),
];

/// `Length_μ` of a curve: the integral of `ρ = λμ` against Euclidean arclength,
/// by 4-point Gauss-Legendre quadrature on every segment.
pub fn mu_length(c: &SubmersionChart, curve: &CurveSample) -> Result<f64, MugeoError> {
    for (index, &point) in curve.points.iter().enumerate() {
        if !c.contains(point) {
            return Err(MugeoError::CurveExitsRegion { index, point });
        }
    }
    let mut total = 0.0;
    for i in 0..curve.len().saturating_sub(1) {
        for &(t, w) in &GL4 {
            let (p, v) = curve.segment_eval(i, t);
            total += w * c.rho(p)? * v.norm();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
struct State {
    p: Point,
    theta: f64,
}

impl State {
    fn axpy(self, h: f64, k: [f64; 3]) -> State {
        State { p: Point::new(self.p.x + h * k[0], self.p.y + h * k[1]), theta: self.theta + h * k[2] }
    }
}

/// Unit-speed geodesic field of `ρ²δ`: `x' = cos θ/ρ`, `y' = sin θ/ρ`,
/// `θ' = (ρ_y cos θ − ρ_x sin θ)/ρ²`.
fn rhs(c: &SubmersionChart, s: State) -> Result<[f64; 3], ChartError> {
    let rho = c.rho(s.p)?;
    let g = c.rho_grad(s.p)?;
    let (sn, cs) = s.theta.sin_cos();
    Ok([cs / rho, sn / rho, (g.y * cs - g.x * sn) / (rho * rho)])
}

fn rk4(c: &SubmersionChart, s: State, h: f64) -> Result<State, ChartError> {
    let k1 = rhs(c, s)?;
    let k2 = rhs(c, s.axpy(h / 2.0, k1))?;
    let k3 = rhs(c, s.axpy(h / 2.0, k2))?;
    let k4 = rhs(c, s.axpy(h, k3))?;
    let k = [
        (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0,
        (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0,
        (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0,
    ];
    Ok(s.axpy(h, k))
}

/// Local error bound per accepted step (step-doubling estimate).
pub const STEP_TOL: f64 = 1e-10;

/// Integrates the geodesic from `p` with initial direction `theta` for
/// μ-length `length`, emitting samples every `step` (rounded so that the
/// samples are evenly spaced in μ-arclength). Sub-steps are adaptive RK4
/// with step doubling. Integration stops early, flagging truncation, when
/// the curve would leave the chart region or when `stop` returns true.
pub fn shoot_until(
    c: &SubmersionChart,
    p: Point,
    theta: f64,
    length: f64,
    step: f64,
    stop: &dyn Fn(Point) -> bool,
) -> Result<GeodesicArc, MugeoError> {
    if !(length > 0.0 && step > 0.0) {
        return Err(MugeoError::InvalidArgument(format!("length {length} and step {step} must be positive")));
    }
    if !c.contains(p) || stop(p) {
        return Err(MugeoError::ImmediateExit { point: p });
    }
    let n_out = ((length / step).ceil() as usize).max(1);
    let ds = length / n_out as f64;
    let min_step = 1e-12 * length.max(1.0);

    let mut state = State { p, theta };
    let mut s_cur = 0.0;
    let mut arc = GeodesicArc {
        points: vec![p],
        tangents: vec![Point::from_angle(theta)],
        s: vec![0.0],
        length: 0.0,
        closed: false,
        truncated: false,
    };
    let mut sub = ds;
    'outer: for k in 0..n_out {
        let s_target = if k + 1 == n_out { length } else { (k + 1) as f64 * ds };
        while s_target - s_cur > 1e-15 * length {
            let h = sub.min(s_target - s_cur);
            let full = rk4(c, state, h);
            let half = rk4(c, state, h / 2.0).and_then(|m| rk4(c, m, h / 2.0));
            let (full, half) = match (full, half) {
                (Ok(f), Ok(hf)) => (f, hf),
                // evaluation failure is treated like leaving the region
                _ => {
                    if h > min_step {
                        sub = h / 2.0;
                        continue;
                    }
                    arc.truncated = true;
                    break 'outer;
                }
            };
            let err = ((half.p.x - full.p.x).abs())
                .max((half.p.y - full.p.y).abs())
                .max((half.theta - full.theta).abs())
                / 15.0;
            if err > STEP_TOL && h > min_step {
                sub = h / 2.0;
                continue;
            }
            if !c.contains(half.p) || stop(half.p) {
                if h > min_step {
                    sub = h / 2.0;
                    continue;
                }
                arc.truncated = true;
                break 'outer;
            }
            state = half;
            s_cur += h;
            if err < STEP_TOL / 32.0 {
                sub = (h * 2.0).min(ds);
            }
        }
        arc.points.push(state.p);
        arc.tangents.push(Point::from_angle(state.theta));
        arc.s.push(s_cur);
    }
    if arc.truncated && s_cur > *arc.s.last().unwrap() {
        arc.points.push(state.p);
        arc.tangents.push(Point::from_angle(state.theta));
        arc.s.push(s_cur);
    }
    if arc.s.len() < 2 {
        return Err(MugeoError::ImmediateExit { point: p });
    }
    arc.length = *arc.s.last().unwrap();
    Ok(arc)
}

/// Geodesic of μ-length `length` from `p` in direction `theta`; stops at the
/// chart boundary.
pub fn mu_geodesic_shoot(
    c: &SubmersionChart,
    p: Point,
    theta: f64,
    length: f64,
    step: f64,
) -> Result<GeodesicArc, MugeoError> {
    shoot_until(c, p, theta, length, step, &|_| false)
}

/// Endpoint and final angle only; `None` if the integration was truncated.
fn endpoint(c: &SubmersionChart, p: Point, theta: f64, length: f64) -> Option<(Point, f64)> {
    let arc = shoot_until(c, p, theta, length, length, &|_| false).ok()?;
    if arc.truncated {
        return None;
    }
    Some((arc.end(), arc.final_angle()))
}

#[derive(Debug, Clone, Copy)]
pub struct ConnectOptions {
    /// Endpoint tolerance.
    pub tol: f64,
    /// Sample spacing of the returned arcs; `0` picks `length / 256`.
    pub step: f64,
    /// Number of evenly spaced initial angles.
    pub fan: usize,
    /// Distinct solutions kept, ordered by μ-length.
    pub max_solutions: usize,
    pub max_iter: usize,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions { tol: 1e-10, step: 0.0, fan: 16, max_solutions: 4, max_iter: 60 }
    }
}

/// Two-point boundary value problem by shooting: returns the shortest
/// μ-geodesic from `p` to `q` found from the initial-angle fan.
pub fn mu_geodesic_connect(
    c: &SubmersionChart,
    p: Point,
    q: Point,
    tol: f64,
) -> Result<GeodesicArc, MugeoError> {
    let opts = ConnectOptions { tol, ..ConnectOptions::default() };
    Ok(mu_geodesic_connect_all(c, p, q, &opts)?.swap_remove(0))
}

/// All distinct converged shots from `p` to `q` (at most
/// `opts.max_solutions`), sorted by μ-length. Shots are distinct when their
/// initial angles differ by more than `1e-3` or their lengths differ.
pub fn mu_geodesic_connect_all(
    c: &SubmersionChart,
    p: Point,
    q: Point,
    opts: &ConnectOptions,
) -> Result<Vec<GeodesicArc>, MugeoError> {
    if p.dist(q) == 0.0 {
        return Err(MugeoError::InvalidArgument("endpoints coincide".into()));
    }
    for &(index, point) in &[(0usize, p), (1, q)] {
        if !c.contains(point) {
            return Err(MugeoError::CurveExitsRegion { index, point });
        }
    }
    let rho_scale = c.rho(p)?.max(c.rho(q)?).max(c.rho(p.lerp(q, 0.5)).unwrap_or(0.0));
    let l_guess = p.dist(q) * rho_scale;
    let mut best_miss = f64::INFINITY;
    let mut found: Vec<(f64, f64)> = Vec::new();

    for k in 0..opts.fan {
        let theta0 = std::f64::consts::TAU * k as f64 / opts.fan as f64;
        // Initial length: closest approach of the ray to q.
        let Ok(ray) = shoot_until(c, p, theta0, 3.0 * l_guess, l_guess / 64.0, &|_| false) else {
            continue;
        };
        let (imin, dmin) = ray
            .points
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x.dist(q)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if imin == 0 {
            continue;
        }
        best_miss = best_miss.min(dmin);
        if let Some((theta, length, miss)) = newton_shoot(c, p, q, theta0, ray.s[imin], opts) {
            best_miss = best_miss.min(miss);
            let theta = theta.rem_euclid(std::f64::consts::TAU);
            let dup = found.iter().any(|&(t, l)| {
                let dt = (t - theta).abs();
                dt.min(std::f64::consts::TAU - dt) < 1e-3 && (l - length).abs() <= 1e-6 * length
            });
            if !dup {
                found.push((theta, length));
            }
        }
    }
    if found.is_empty() {
        return Err(MugeoError::NoConnection { p, q, best_miss });
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    found.truncate(opts.max_solutions);
    let mut arcs = Vec::with_capacity(found.len());
    for (theta, length) in found {
        let step = if opts.step > 0.0 { opts.step } else { length / 256.0 };
        let mut arc = mu_geodesic_shoot(c, p, theta, length, step)?;
        if arc.truncated || arc.end().dist(q) > 10.0 * opts.tol.max(1e-12) {
            continue;
        }
        *arc.points.last_mut().unwrap() = q;
        arcs.push(arc);
    }
    if arcs.is_empty() {
        return Err(MugeoError::NoConnection { p, q, best_miss });
    }
    Ok(arcs)
}

/// Damped Newton iteration on `(θ, L) ↦ endpoint − q`.
fn newton_shoot(
    c: &SubmersionChart,
    p: Point,
    q: Point,
    mut theta: f64,
    mut length: f64,
    opts: &ConnectOptions,
) -> Option<(f64, f64, f64)> {
    let (mut end, mut phi) = endpoint(c, p, theta, length)?;
    let mut miss = end.dist(q);
    for _ in 0..opts.max_iter {
        if miss < opts.tol {
            return Some((theta, length, miss));
        }
        let d_theta = 1e-7;
        let (end_t, _) = endpoint(c, p, theta + d_theta, length)?;
        let col_t = (end_t - end) * (1.0 / d_theta);
        let col_l = Point::from_angle(phi) * (1.0 / c.rho(end).ok()?);
        let det = col_t.cross(col_l);
        if det.abs() < 1e-300 {
            return None;
        }
        let f = end - q;
        // Cramer's rule for [col_t col_l] (dθ, dL) = -f
        let mut dt = -f.cross(col_l) / det;
        let mut dl = -col_t.cross(f) / det;
        let scale = 1f64.min(0.3 / dt.abs().max(1e-300)).min(0.5 * length / dl.abs().max(1e-300));
        dt *= scale;
        dl *= scale;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let (nt, nl) = (theta + t * dt, length + t * dl);
            if nl > 0.0 {
                if let Some((e, ph)) = endpoint(c, p, nt, nl) {
                    let m = e.dist(q);
                    if m < miss {
                        theta = nt;
                        length = nl;
                        end = e;
                        phi = ph;
                        miss = m;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (miss < opts.tol).then_some((theta, length, miss))
}

/// Searches for a closed geodesic through height `y0` of a periodic chart:
/// starting at `(x0, y0)` with angle near `theta_guess` (near `0` or `π`),
/// adjusts the angle until the geodesic returns to `y0` after one period.
/// Returns `None` if the chart is not periodic or no closure is found.
pub fn find_closed_geodesic(
    c: &SubmersionChart,
    start: Point,
    theta_guess: f64,
    step: f64,
) -> Result<Option<GeodesicArc>, MugeoError> {
    let Some(period) = c.period else { return Ok(None) };
    let dir = if theta_guess.cos() >= 0.0 { 1.0 } else { -1.0 };
    let target_x = start.x + dir * period;
    let max_len = 4.0 * period * c.rho(start)?.max(1e-300) + 10.0;
    let stop = move |pt: Point| dir * (pt.x - target_x) >= 0.0;
    // Height mismatch after one period as a function of the initial angle.
    let mismatch = |theta: f64| -> Option<(f64, GeodesicArc)> {
        let arc = shoot_until(c, start, theta, max_len, step, &stop).ok()?;
        if !arc.truncated || (arc.end().x - target_x).abs() > 1e-8 {
            return None;
        }
        Some((arc.end().y - start.y, arc))
    };
    let mut t0 = theta_guess;
    let (mut f0, mut arc) = match mismatch(t0) {
        Some(v) => v,
        None => return Ok(None),
    };
    let mut t1 = t0 + 1e-4;
    for _ in 0..50 {
        if f0.abs() < 1e-10 {
            break;
        }
        let Some((f1, a1)) = mismatch(t1) else { return Ok(None) };
        if (f1 - f0).abs() < 1e-300 {
            break;
        }
        let t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
        t0 = t1;
        f0 = f1;
        arc = a1;
        t1 = t2;
    }
    if f0.abs() > 1e-8 {
        return Ok(None);
    }
    let turn = (arc.final_angle() - arc.initial_angle()).sin().abs();
    if turn > 1e-6 {
        return Ok(None);
    }
    *arc.points.last_mut().unwrap() = Point::new(target_x, start.y);
    arc.closed = true;
    arc.truncated = false;
    Ok(Some(arc))
}

fn derivatives(curve: &CurveSample, i: usize) -> Result<(Point, Point), MugeoError> {
    if i == 0 || i + 1 >= curve.len() {
        return Err(MugeoError::NotInterior(i));
    }
    let t = [
        0.0,
        curve.points[i - 1].dist(curve.points[i]),
        curve.points[i - 1].dist(curve.points[i]) + curve.points[i].dist(curve.points[i + 1]),
    ];
    if t[1] < 1e-300 || t[2] - t[1] < 1e-300 {
        return Err(MugeoError::DegenerateTangent(i));
    }
    let (w1, w2, _) = fd_weights(&t, 1);
    let (a, b, c) = (curve.points[i - 1], curve.points[i], curve.points[i + 1]);
    let d1 = a * w1[0] + b * w1[1] + c * w1[2];
    let d2 = a * w2[0] + b * w2[1] + c * w2[2];
    if d1.norm() < 1e-12 {
        return Err(MugeoError::DegenerateTangent(i));
    }
    Ok((d1, d2))
}

/// Geodesic curvature of `γ` at interior sample `i` for a conformal metric
/// `f²(dx² + dy²)`, with respect to the chosen normal.
fn conformal_curvature(d1: Point, d2: Point, f: f64, grad: Point, side: NormalSide) -> f64 {
    let speed = d1.norm();
    let k = d1.cross(d2) / (f * speed.powi(3)) + (grad.x * d1.y - grad.y * d1.x) / (f * f * speed);
    side.sign() * k
}

/// `κ̃_g`: geodesic curvature in the μ-metric at interior sample `i`, from
/// centred finite differences of the samples.
pub fn mu_geodesic_curvature(c: &SubmersionChart, curve: &CurveSample, i: usize) -> Result<f64, MugeoError> {
    let (d1, d2) = derivatives(curve, i)?;
    let p = curve.points[i];
    Ok(conformal_curvature(d1, d2, c.rho(p)?, c.rho_grad(p)?, curve.normal))
}

/// Mean curvature `H` of the vertical cylinder over the curve at sample `i`,
/// from `2H = κ_g − ⟨η, ∇μ/μ⟩` with `κ_g` the curvature in the base metric.
pub fn cylinder_mean_curvature(c: &SubmersionChart, curve: &CurveSample, i: usize) -> Result<f64, MugeoError> {
    let (d1, d2) = derivatives(curve, i)?;
    let p = curve.points[i];
    let lambda = c.lambda(p)?;
    let mu = c.mu(p)?;
    let kappa = conformal_curvature(d1, d2, lambda, c.lambda_grad(p)?, curve.normal);
    let gm = c.mu_grad(p)?;
    let eta_dot = curve.normal.sign() * (-gm.x * d1.y + gm.y * d1.x) / (mu * lambda * d1.norm());
    Ok(0.5 * (kappa - eta_dot))
}

/// μ-convexity (not strict) with respect to the curve's chosen normal.
pub fn is_mu_convex(c: &SubmersionChart, curve: &CurveSample, tol: f64) -> Result<bool, MugeoError> {
    for i in 1..curve.len().saturating_sub(1) {
        if mu_geodesic_curvature(c, curve, i)? < -tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest `|κ̃_g|` over the interior samples, with its index.
pub fn max_abs_mu_curvature(c: &SubmersionChart, curve: &CurveSample) -> Result<(f64, usize), MugeoError> {
    let mut worst = (0.0, 0);
    for i in 1..curve.len().saturating_sub(1) {
        let k = mu_geodesic_curvature(c, curve, i)?.abs();
        if k > worst.0 {
            worst = (k, i);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Region;
    use crate::expr::parse_expr;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn flat() -> SubmersionChart {
        SubmersionChart::flat(Region::Rect { x0: -5.0, x1: 5.0, y0: -5.0, y1: 5.0 }, None).unwrap()
    }

    fn rotational() -> SubmersionChart {
        let p = |s: &str| parse_expr(s).unwrap();
        SubmersionChart::new(
            Region::Rect { x0: 1e-3, x1: 6.0, y0: -4.0, y1: 4.0 },
            None,
            p("1"),
            p("x"),
            p("0"),
            p("0"),
            p("0"),
        )
        .unwrap()
    }

    fn circle(r: f64, n: usize, side: NormalSide) -> CurveSample {
        let pts = (0..=n).map(|k| Point::from_angle(2.0 * PI * k as f64 / n as f64) * r).collect();
        CurveSample::from_points(pts, side)
    }

    #[test]
    fn flat_unit_segment_length() {
        let c = CurveSample::from_points(vec![Point::new(0., 0.), Point::new(1., 0.)], NormalSide::Left);
        assert!((mu_length(&flat(), &c).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotational_segment_length() {
        let pts = (0..=10).map(|k| Point::new(1.0 + 0.1 * k as f64, 0.0)).collect();
        let c = CurveSample::from_points(pts, NormalSide::Left);
        assert!((mu_length(&rotational(), &c).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn curve_outside_region_is_rejected() {
        let c = CurveSample::from_points(vec![Point::new(0., 0.), Point::new(9., 0.)], NormalSide::Left);
        assert!(matches!(mu_length(&flat(), &c), Err(MugeoError::CurveExitsRegion { index: 1, .. })));
    }

    #[test]
    fn flat_shot_is_straight() {
        let arc = mu_geodesic_shoot(&flat(), Point::new(0., 0.), 0.0, 1.0, 0.1).unwrap();
        assert!(arc.end().dist(Point::new(1.0, 0.0)) < 1e-14);
        assert_eq!(arc.points.len(), 11);
        assert!((arc.length - 1.0).abs() < 1e-15);
        assert!(!arc.truncated);
    }

    #[test]
    fn shot_truncates_at_region_boundary() {
        let arc = mu_geodesic_shoot(&flat(), Point::new(4.0, 0.), 0.0, 3.0, 0.1).unwrap();
        assert!(arc.truncated);
        assert!((arc.end().x - 5.0).abs() < 1e-9);
        assert!(matches!(
            mu_geodesic_shoot(&flat(), Point::new(6.0, 0.), 0.0, 1.0, 0.1),
            Err(MugeoError::ImmediateExit { .. })
        ));
    }

    #[test]
    fn rotational_horizontal_line() {
        let arc = mu_geodesic_shoot(&rotational(), Point::new(1.0, 0.0), 0.0, 2.0, 0.01).unwrap();
        let max_y = arc.points.iter().map(|p| p.y.abs()).fold(0.0, f64::max);
        assert!(max_y < 1e-14);
        // ∫_1^X x dx = 2  =>  X = sqrt(5)
        assert!((arc.end().x - 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rotational_vertical_shot_is_catenary() {
        let arc = mu_geodesic_shoot(&rotational(), Point::new(1.0, 0.0), FRAC_PI_2, 1.0, 0.01).unwrap();
        for p in &arc.points {
            assert!((p.x - p.y.cosh()).abs() < 1e-8, "{p:?}");
        }
    }

    #[test]
    fn flat_connect_diagonal() {
        let arc = mu_geodesic_connect(&flat(), Point::new(0., 0.), Point::new(1., 1.), 1e-10).unwrap();
        assert!((arc.length - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn catenary_connect_matches_root_solve() {
        // oracle: a cosh(0.3/a) = 1 with the larger root near 0.95
        let mut a: f64 = 0.95;
        for _ in 0..50 {
            let f = a * (0.3 / a).cosh() - 1.0;
            let df = (0.3 / a).cosh() - (0.3 / a) * (0.3 / a).sinh();
            a -= f / df;
        }
        assert!((a - 0.95).abs() < 0.01);
        let c = rotational();
        let arc = mu_geodesic_connect(&c, Point::new(1.0, -0.3), Point::new(1.0, 0.3), 1e-10).unwrap();
        for p in &arc.points {
            assert!((p.x - a * (p.y / a).cosh()).abs() < 1e-7, "{p:?}");
        }
        // μ-length of x = a cosh(y/a): ∫ a cosh²(y/a) dy over [-0.3, 0.3]
        let exact = a * (0.3 + a * (0.6 / a).sinh() / 2.0);
        assert!((arc.length - exact).abs() < 1e-8);
    }

    #[test]
    fn catenary_gap_has_no_connection() {
        // min over a of a cosh(1/a) exceeds 1
        let min = (1..2000).map(|k| 0.01 * k as f64).map(|a| a * (1.0 / a).cosh()).fold(f64::INFINITY, f64::min);
        assert!(min > 1.5);
        let r = mu_geodesic_connect(&rotational(), Point::new(1.0, -1.0), Point::new(1.0, 1.0), 1e-10);
        assert!(matches!(r, Err(MugeoError::NoConnection { .. })), "{r:?}");
    }

    #[test]
    fn circle_curvatures() {
        let c = flat();
        let inner = circle(2.0, 400, NormalSide::Left);
        for i in [1, 100, 399] {
            assert!((mu_geodesic_curvature(&c, &inner, i).unwrap() - 0.5).abs() < 1e-4);
            assert!((cylinder_mean_curvature(&c, &inner, i).unwrap() - 0.25).abs() < 1e-4);
        }
        assert!(is_mu_convex(&c, &inner, 1e-9).unwrap());
        assert!(!is_mu_convex(&c, &circle(2.0, 400, NormalSide::Right), 1e-9).unwrap());
        assert!(matches!(mu_geodesic_curvature(&c, &inner, 0), Err(MugeoError::NotInterior(0))));
    }

    #[test]
    fn straight_line_has_zero_curvature() {
        let pts = (0..10).map(|k| Point::new(0.25 * k as f64 - 1.0, 0.5)).collect();
        let line = CurveSample::from_points(pts, NormalSide::Left);
        for i in 1..9 {
            assert_eq!(mu_geodesic_curvature(&flat(), &line, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn rotational_cylinders() {
        let c = rotational();
        let line = CurveSample::from_points(
            (0..5).map(|k| Point::new(0.5 + 0.25 * k as f64, 0.0)).collect(),
            NormalSide::Left,
        );
        assert!(cylinder_mean_curvature(&c, &line, 2).unwrap().abs() < 1e-15);
        // x = 1 travelled upward has left normal (-1, 0), towards the axis
        let vertical = CurveSample::from_points(
            (0..5).map(|k| Point::new(1.0, 0.25 * k as f64)).collect(),
            NormalSide::Left,
        );
        let h = cylinder_mean_curvature(&c, &vertical, 2).unwrap();
        assert!((2.0 * h - 1.0).abs() < 1e-14);
    }

    #[test]
    fn catenary_is_mu_geodesic_and_convex() {
        let c = rotational();
        let arc = mu_geodesic_shoot(&c, Point::new(1.0, 0.0), FRAC_PI_2, 2.0, 1e-3).unwrap();
        for side in [NormalSide::Left, NormalSide::Right] {
            let curve = arc.to_curve(side);
            let (k, _) = max_abs_mu_curvature(&c, &curve).unwrap();
            assert!(k < 1e-6, "{k}");
            assert!(is_mu_convex(&c, &curve, 1e-6).unwrap());
        }
    }

    #[test]
    fn closed_geodesic_on_flat_cylinder() {
        let c = SubmersionChart::flat(Region::Rect { x0: 0.0, x1: 2.0 * PI, y0: -1.0, y1: 1.0 }, Some(2.0 * PI))
            .unwrap();
        let arc = find_closed_geodesic(&c, Point::new(0.0, 0.3), 0.0, 0.05).unwrap().unwrap();
        assert!(arc.closed);
        assert!((arc.length - 2.0 * PI).abs() < 1e-9);
        let flat = flat();
        assert!(find_closed_geodesic(&flat, Point::new(0.0, 0.3), 0.0, 0.05).unwrap().is_none());
    }
}
