//! Run configuration: a TOML file naming a builtin scene or defining a
//! chart and boundary arcs, plus mesh size, schedule and tolerances.
//!
//! ```toml
//! scene = "flat-scherk"          # or a [chart] table and [[boundary.arc]]s
//! h = 0.05                       # default: 0.05 × domain diameter
//! schedule = [1, 2, 4, 8]        # or "1,2,4,8"
//! tol = 1e-9
//! geo_tol = 1e-5
//! nu_thresh = 0.1
//! decrease_factor = 1.5
//! output = "kjs-out"
//!
//! [chart]
//! lambda = "1"                   # expressions in x, y
//! mu = "x"
//! tau = "0"
//! a = "0"
//! b = "0"
//! rect = [0.001, 6, -6, 6]       # x0, x1, y0, y1; or disk = [cx, cy, r]
//! period = 6.283185307179586     # optional, needs a rect of that width
//! interior = [1.5, 0]            # a point inside the domain
//!
//! [[boundary.arc]]
//! loop = 0                       # loops are numbered from 0
//! label = "finite"               # "+inf", "-inf" or "finite"
//! value = "0"                    # boundary data of finite arcs
//! kind = "segment"               # "segment", "polyline" or "geodesic"
//! samples = 32
//! ```
//!
//! Segments take `from`/`to`; a missing end is the adjacent arc's
//! endpoint. Polylines take `points`. Geodesics are shot from `from` with
//! angle `theta` for μ-length `length` (`reverse = true` flips them).
//! Every number may also be written as a constant expression string such
//! as `"2*cosh(0.25)"` or `"pi/2"`.

use std::path::{Path, PathBuf};

use kjs_core::chart::{Region, SubmersionChart};
use kjs_core::domain::{build_domain, segment_curve, ArcLabel, BoundaryArc, DomainError, JSDomain};
use kjs_core::expr::{parse_expr, Expr};
use kjs_core::geom::Point;
use kjs_core::mugeo::{mu_geodesic_shoot, CurveSample, NormalSide};
use kjs_core::scene::builtin_scene;
use serde::Deserialize;
use thiserror::Error;

pub const OUTPUT_ENV: &str = "KJS_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("domain: {0}")]
    Domain(#[from] DomainError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Num {
    Value(f64),
    Expr(String),
}

impl Num {
    fn value(&self, field: &str) -> Result<f64, ConfigError> {
        match self {
            Num::Value(v) => Ok(*v),
            Num::Expr(s) => {
                let e = parse_expr(s).map_err(|e| invalid(field, e.to_string()))?;
                let v = e.constant_value().ok_or_else(|| invalid(field, format!("`{s}` is not constant")))?;
                Ok(v)
            }
        }
    }
}

fn point(p: &[Num; 2], field: &str) -> Result<Point, ConfigError> {
    Ok(Point::new(p[0].value(field)?, p[1].value(field)?))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Schedule {
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scene: Option<String>,
    h: Option<Num>,
    schedule: Option<Schedule>,
    tol: Option<f64>,
    geo_tol: Option<f64>,
    nu_thresh: Option<f64>,
    decrease_factor: Option<f64>,
    output: Option<PathBuf>,
    chart: Option<RawChart>,
    boundary: Option<RawBoundary>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    lambda: Option<String>,
    mu: Option<String>,
    tau: Option<String>,
    a: Option<String>,
    b: Option<String>,
    rect: Option<[Num; 4]>,
    disk: Option<[Num; 3]>,
    period: Option<Num>,
    interior: Option<[Num; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    arc: Vec<RawArc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    #[serde(default, rename = "loop")]
    lp: usize,
    label: String,
    value: Option<String>,
    kind: String,
    from: Option<[Num; 2]>,
    to: Option<[Num; 2]>,
    points: Option<Vec<[Num; 2]>>,
    theta: Option<Num>,
    length: Option<Num>,
    #[serde(default)]
    reverse: bool,
    samples: Option<usize>,
}

/// The chart and (optional) domain a run operates on.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub chart: SubmersionChart,
    pub domain: Option<JSDomain>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub h: f64,
    pub schedule: Vec<f64>,
    pub tol: f64,
    pub geo_tol: f64,
    pub nu_thresh: f64,
    pub decrease_factor: f64,
    pub output: PathBuf,
    /// Set by a command-line flag: the environment override is ignored.
    pub output_explicit: bool,
}

pub const DEFAULT_SCHEDULE: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_GEO_TOL: f64 = 1e-5;
pub const DEFAULT_NU_THRESH: f64 = 0.1;
pub const DEFAULT_DECREASE_FACTOR: f64 = 1.5;
pub const DEFAULT_OUTPUT: &str = "kjs-out";

impl RunConfig {
    /// Configuration for a builtin scene with every default applied.
    pub fn for_scene(name: &str) -> Result<Self, ConfigError> {
        parse_config(&format!("scene = {}", toml::Value::String(name.to_string())))
    }

    /// Output directory, with the environment override applied.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(dir) if !dir.is_empty() && !self.output_explicit => PathBuf::from(dir),
            _ => self.output.clone(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn parse_schedule(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid("schedule", format!("`{}` is not a number", s.trim()))))
        .collect()
}

pub fn validate_schedule(s: &[f64]) -> Result<(), ConfigError> {
    if s.is_empty() {
        return Err(invalid("schedule", "empty"));
    }
    if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("schedule", "levels must be positive"));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("schedule", "levels must be strictly increasing"));
    }
    Ok(())
}

fn positive(v: f64, field: &str) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let geo_tol = positive(raw.geo_tol.unwrap_or(DEFAULT_GEO_TOL), "geo_tol")?;
    let problem = match (&raw.scene, &raw.chart) {
        (Some(_), Some(_)) => return Err(invalid("scene", "give either `scene` or a [chart] table, not both")),
        (None, None) => return Err(invalid("scene", "missing: name a builtin scene or define [chart]")),
        (Some(name), None) => {
            if raw.boundary.is_some() {
                return Err(invalid("boundary", "boundary arcs need a custom [chart]"));
            }
            let s = builtin_scene(name).map_err(|e| invalid("scene", e.to_string()))?;
            Problem { name: s.name.to_string(), chart: s.chart, domain: s.domain }
        }
        (None, Some(c)) => custom_problem(c, raw.boundary.as_ref(), geo_tol)?,
    };
    let h = match &raw.h {
        Some(h) => positive(h.value("h")?, "h")?,
        None => 0.05 * problem.domain.as_ref().map_or_else(|| region_diameter(&problem.chart.region), |d| d.diameter()),
    };
    let schedule = match raw.schedule {
        Some(Schedule::List(v)) => v,
        Some(Schedule::Text(t)) => parse_schedule(&t)?,
        None => DEFAULT_SCHEDULE.to_vec(),
    };
    validate_schedule(&schedule)?;
    let decrease_factor = positive(raw.decrease_factor.unwrap_or(DEFAULT_DECREASE_FACTOR), "decrease_factor")?;
    if decrease_factor <= 1.0 {
        return Err(invalid("decrease_factor", "must exceed 1"));
    }
    Ok(RunConfig {
        problem,
        h,
        schedule,
        tol: positive(raw.tol.unwrap_or(DEFAULT_TOL), "tol")?,
        geo_tol,
        nu_thresh: positive(raw.nu_thresh.unwrap_or(DEFAULT_NU_THRESH), "nu_thresh")?,
        decrease_factor,
        output: raw.output.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        output_explicit: false,
    })
}

pub fn region_diameter(r: &Region) -> f64 {
    match *r {
        Region::Rect { x0, x1, y0, y1 } => (x1 - x0).hypot(y1 - y0),
        Region::Disk { r, .. } => 2.0 * r,
    }
}

fn field(src: &Option<String>, default: &str, name: &str) -> Result<Expr, ConfigError> {
    parse_expr(src.as_deref().unwrap_or(default)).map_err(|e| invalid(format!("chart.{name}"), e.to_string()))
}

fn custom_problem(c: &RawChart, boundary: Option<&RawBoundary>, geo_tol: f64) -> Result<Problem, ConfigError> {
    let region = match (&c.rect, &c.disk) {
        (Some(r), None) => Region::Rect {
            x0: r[0].value("chart.rect")?,
            x1: r[1].value("chart.rect")?,
            y0: r[2].value("chart.rect")?,
            y1: r[3].value("chart.rect")?,
        },
        (None, Some(d)) => {
            Region::Disk { cx: d[0].value("chart.disk")?, cy: d[1].value("chart.disk")?, r: d[2].value("chart.disk")? }
        }
        _ => return Err(invalid("chart", "give exactly one of `rect` and `disk`")),
    };
    let period = c.period.as_ref().map(|p| p.value("chart.period")).transpose()?;
    let chart = SubmersionChart::new(
        region,
        period,
        field(&c.lambda, "1", "lambda")?,
        field(&c.mu, "1", "mu")?,
        field(&c.tau, "0", "tau")?,
        field(&c.a, "0", "a")?,
        field(&c.b, "0", "b")?,
    )
    .map_err(|e| invalid("chart", e.to_string()))?;
    let domain = match boundary {
        None => None,
        Some(b) => {
            let interior = c.interior.as_ref().ok_or_else(|| invalid("chart.interior", "required with boundary arcs"))?;
            let interior = point(interior, "chart.interior")?;
            Some(build_domain(&chart, arcs_to_loops(&chart, &b.arc)?, interior, geo_tol)?)
        }
    };
    Ok(Problem { name: "custom".into(), chart, domain })
}

fn arcs_to_loops(chart: &SubmersionChart, arcs: &[RawArc]) -> Result<Vec<Vec<BoundaryArc>>, ConfigError> {
    let n_loops = arcs.iter().map(|a| a.lp + 1).max().unwrap_or(0);
    let mut loops = Vec::with_capacity(n_loops);
    for lp in 0..n_loops {
        let ids: Vec<usize> = (0..arcs.len()).filter(|&i| arcs[i].lp == lp).collect();
        if ids.is_empty() {
            return Err(invalid("boundary.arc.loop", format!("loop {lp} has no arcs")));
        }
        // explicit geometry first, then segments borrow their neighbours' ends
        let mut curves: Vec<Option<CurveSample>> = Vec::with_capacity(ids.len());
        for &i in &ids {
            curves.push(explicit_curve(chart, &arcs[i], i)?);
        }
        for k in 0..ids.len() {
            if curves[k].is_some() {
                continue;
            }
            let a = &arcs[ids[k]];
            let f = format!("boundary.arc[{}]", ids[k]);
            let prev = &curves[(k + ids.len() - 1) % ids.len()];
            let next = &curves[(k + 1) % ids.len()];
            let from = match &a.from {
                Some(p) => point(p, &f)?,
                None => prev.as_ref().map(|c| c.last()).ok_or_else(|| invalid(&f, "missing `from`"))?,
            };
            let to = match &a.to {
                Some(p) => point(p, &f)?,
                None => next.as_ref().map(|c| c.first()).ok_or_else(|| invalid(&f, "missing `to`"))?,
            };
            curves[k] = Some(segment_curve(from, to, a.samples.unwrap_or(32)));
        }
        let mut out = Vec::with_capacity(ids.len());
        for (k, &i) in ids.iter().enumerate() {
            out.push(BoundaryArc::new(curves[k].take().expect("resolved"), label(&arcs[i], i)?));
        }
        loops.push(out);
    }
    Ok(loops)
}

fn label(a: &RawArc, i: usize) -> Result<ArcLabel, ConfigError> {
    let f = format!("boundary.arc[{i}].label");
    match a.label.as_str() {
        "+inf" => Ok(ArcLabel::PlusInfinity),
        "-inf" => Ok(ArcLabel::MinusInfinity),
        "finite" => {
            let v = a.value.as_deref().ok_or_else(|| invalid(format!("boundary.arc[{i}].value"), "required"))?;
            Ok(ArcLabel::Finite(parse_expr(v).map_err(|e| invalid(format!("boundary.arc[{i}].value"), e.to_string()))?))
        }
        other => Err(invalid(f, format!("unknown label `{other}`"))),
    }
}

fn explicit_curve(chart: &SubmersionChart, a: &RawArc, i: usize) -> Result<Option<CurveSample>, ConfigError> {
    let f = format!("boundary.arc[{i}]");
    match a.kind.as_str() {
        "segment" => match (&a.from, &a.to) {
            (Some(p), Some(q)) => Ok(Some(segment_curve(point(p, &f)?, point(q, &f)?, a.samples.unwrap_or(32)))),
            _ => Ok(None),
        },
        "polyline" => {
            let pts = a.points.as_ref().ok_or_else(|| invalid(format!("{f}.points"), "required"))?;
            let pts = pts.iter().map(|p| point(p, &f)).collect::<Result<Vec<_>, _>>()?;
            if pts.len() < 2 {
                return Err(invalid(format!("{f}.points"), "need at least two points"));
            }
            Ok(Some(CurveSample::from_points(pts, NormalSide::Left)))
        }
        "geodesic" => {
            let from = point(a.from.as_ref().ok_or_else(|| invalid(format!("{f}.from"), "required"))?, &f)?;
            let theta = a.theta.as_ref().ok_or_else(|| invalid(format!("{f}.theta"), "required"))?.value(&f)?;
            let length = a.length.as_ref().ok_or_else(|| invalid(format!("{f}.length"), "required"))?.value(&f)?;
            let samples = a.samples.unwrap_or(128).max(2);
            let arc = mu_geodesic_shoot(chart, from, theta, length, length / samples as f64)
                .map_err(|e| invalid(&f, e.to_string()))?;
            if arc.truncated {
                return Err(invalid(&f, "geodesic leaves the chart region"));
            }
            let arc = if a.reverse { arc.reversed() } else { arc };
            Ok(Some(arc.to_curve(NormalSide::Left)))
        }
        other => Err(invalid(format!("{f}.kind"), format!("unknown kind `{other}`"))),
    }
}
