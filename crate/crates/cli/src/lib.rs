//! Subcommands of the `kjs` binary. Each returns its stdout text or an
//! error carrying the exit status: 1 when the problem is rejected (invalid
//! domain, no solution exists), 2 when the numerics fail to decide.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kjs_core::domain::{check_js_conditions, ArcLabel, JSDomain, JSReport, DEFAULT_MAX_POLYGONS};
use kjs_core::geom::Point;
use kjs_core::mesh::{triangulate, TriMesh};
use kjs_core::mugeo::{mu_geodesic_shoot, CurveSample, NormalSide};
use kjs_core::scene::SCENES;
use kjs_core::solver::{
    angle_function_field, detect_divergence_lines, flux, graph_from_heights, solve_sequence, DivergenceOptions,
    DivergenceReport, Discretization, FluxReport, GraphSolution, SequenceOptions, SolverOptions,
};
use serde::Serialize;
use thiserror::Error;

use config::RunConfig;
use output::{read_csv_columns, to_json, write_csv, write_json};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Rejected(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Rejected(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}

fn rejected(module: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Rejected(format!("{module}: {e}"))
}

fn failed(module: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("{module}: {e}"))
}

fn io_failed(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failed(format!("io: {}: {e}", path.display()))
}

pub fn scene_list() -> String {
    to_json(&SCENES)
}

fn domain_of(cfg: &RunConfig) -> Result<&JSDomain, CliError> {
    cfg.problem
        .domain
        .as_ref()
        .ok_or_else(|| rejected("domain", format!("scene `{}` defines no boundary", cfg.problem.name)))
}

/// The solvability report as JSON. Deciding "unsolvable" is a success;
/// an overflowing polygon enumeration is a failure to decide.
pub fn check(cfg: &RunConfig, max_polygons: usize) -> Result<String, CliError> {
    let report = js_report(cfg, max_polygons)?;
    if report.inconclusive {
        return Err(failed("domain", format!("more than {max_polygons} inscribed polygons; no decision")));
    }
    Ok(to_json(&report))
}

fn js_report(cfg: &RunConfig, max_polygons: usize) -> Result<JSReport, CliError> {
    check_js_conditions(domain_of(cfg)?, max_polygons).map_err(|e| failed("domain", e))
}

/// Samples of a μ-geodesic as CSV columns `x,y,s`.
pub fn geodesic(cfg: &RunConfig, from: Point, theta: f64, length: f64, step: f64) -> Result<String, CliError> {
    let arc = mu_geodesic_shoot(&cfg.problem.chart, from, theta, length, step).map_err(|e| rejected("mugeo", e))?;
    let mut out = String::from("x,y,s\n");
    for (p, s) in arc.points.iter().zip(&arc.s) {
        out.push_str(&format!("{},{},{}\n", output::fmt17(p.x), output::fmt17(p.y), output::fmt17(*s)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SolveFlags {
    /// Solve even when the solvability check says no.
    pub force: bool,
    /// Restrict divergence flagging to the domain scaled by this factor.
    pub region_shrink: Option<f64>,
}

#[derive(Serialize)]
struct MeshSummary {
    h: f64,
    vertices: usize,
    triangles: usize,
    max_edge: f64,
    min_angle_deg: f64,
}

#[derive(Serialize)]
struct LevelSummary {
    n: f64,
    energy: f64,
    residual_norm: f64,
    iterations: usize,
    cg_iterations: usize,
    converged: bool,
    regularized: bool,
    offset: f64,
    interior_change: Option<f64>,
    min_nu: f64,
    max_nu: f64,
    csv: String,
}

#[derive(Serialize)]
struct ArcFlux {
    arc: usize,
    label: String,
    /// Flux towards the outer normal.
    flux: FluxReport,
    within_bound: bool,
}

#[derive(Serialize)]
struct SolveReport {
    scene: String,
    admissible: bool,
    solvable: bool,
    schedule: Vec<f64>,
    tol: f64,
    nu_thresh: f64,
    decrease_factor: f64,
    mesh: MeshSummary,
    levels: Vec<LevelSummary>,
    boundary_flux: Vec<ArcFlux>,
    divergence: DivergenceReport,
}

fn label_text(l: &ArcLabel) -> String {
    serde_json::to_value(l).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn level_csv_name(n: f64) -> String {
    format!("level_{n}.csv")
}

/// Heights with the per-triangle angle function and area element averaged
/// onto the vertices, area-weighted.
fn write_level_csv(path: &Path, s: &GraphSolution) -> std::io::Result<()> {
    let m = s.mesh();
    let mut acc = vec![(0.0, 0.0, 0.0); m.vertices.len()];
    for (t, tri) in m.triangles.iter().enumerate() {
        let a = m.area(t);
        for &i in tri {
            acc[i].0 += a * s.nu[t];
            acc[i].1 += a * s.w[t];
            acc[i].2 += a;
        }
    }
    let rows = m.vertices.iter().zip(&s.u).zip(&acc).map(|((p, u), (nu, w, a))| vec![p.x, p.y, *u, nu / a, w / a]);
    write_csv(path, &["x", "y", "u", "nu", "W"], rows)
}

/// Runs the truncated sequence and writes `mesh.txt`, one CSV per level
/// and `report.json` into the output directory; returns the directory.
pub fn solve(cfg: &RunConfig, flags: SolveFlags) -> Result<PathBuf, CliError> {
    let d = domain_of(cfg)?;
    let js = js_report(cfg, DEFAULT_MAX_POLYGONS)?;
    if !flags.force && !(js.admissible && js.solvable) {
        return Err(rejected("domain", "the problem has no solution (rerun with --force to solve anyway)"));
    }
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| io_failed(&dir, e))?;
    let mesh = Arc::new(triangulate(d, cfg.h).map_err(|e| failed("mesh", e))?);
    let mesh_path = dir.join("mesh.txt");
    std::fs::write(&mesh_path, mesh.to_text()).map_err(|e| io_failed(&mesh_path, e))?;
    let disc = Arc::new(Discretization::new(mesh.clone(), &cfg.problem.chart).map_err(|e| failed("solver", e))?);
    let opts = SequenceOptions { solver: SolverOptions { tol: cfg.tol, ..SolverOptions::default() }, ..Default::default() };
    let seq = solve_sequence(d, &disc, &cfg.schedule, &opts).map_err(|e| failed("solver", e))?;

    let mut levels = Vec::new();
    for l in &seq.levels {
        let name = level_csv_name(l.n);
        let path = dir.join(&name);
        write_level_csv(&path, &l.solution).map_err(|e| io_failed(&path, e))?;
        let a = angle_function_field(&l.solution);
        levels.push(LevelSummary {
            n: l.n,
            energy: l.solution.energy,
            residual_norm: l.solution.residual_norm,
            iterations: l.solution.iterations,
            cg_iterations: l.solution.cg_iterations,
            converged: l.solution.converged,
            regularized: l.solution.regularized,
            offset: l.offset,
            interior_change: l.interior_change,
            min_nu: a.min,
            max_nu: a.max,
            csv: name,
        });
    }
    let last = seq.last();
    let mut boundary_flux = Vec::new();
    for (k, arc) in d.arcs.iter().enumerate() {
        let mut curve = arc.curve.clone();
        curve.normal = match curve.normal {
            NormalSide::Left => NormalSide::Right,
            NormalSide::Right => NormalSide::Left,
        };
        let f = flux(last, &curve).map_err(|e| failed("solver", e))?;
        boundary_flux.push(ArcFlux {
            arc: k,
            label: label_text(&arc.label),
            within_bound: f.value.abs() <= f.mu_length * (1.0 + 1e-6),
            flux: f,
        });
    }
    let dopts = DivergenceOptions {
        nu_thresh: cfg.nu_thresh,
        decrease_factor: cfg.decrease_factor,
        region_shrink: flags.region_shrink,
        geo_tol: cfg.geo_tol,
    };
    let divergence = detect_divergence_lines(&seq, &dopts).map_err(|e| failed("solver", e))?;
    let min_angle = (0..mesh.triangles.len()).map(|t| mesh.min_angle(t)).fold(f64::INFINITY, f64::min);
    let report = SolveReport {
        scene: cfg.problem.name.clone(),
        admissible: js.admissible,
        solvable: js.solvable,
        schedule: cfg.schedule.clone(),
        tol: cfg.tol,
        nu_thresh: cfg.nu_thresh,
        decrease_factor: cfg.decrease_factor,
        mesh: MeshSummary {
            h: cfg.h,
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            max_edge: mesh.max_edge(),
            min_angle_deg: min_angle.to_degrees(),
        },
        levels,
        boundary_flux,
        divergence,
    };
    let report_path = dir.join("report.json");
    write_json(&report_path, &report).map_err(|e| io_failed(&report_path, e))?;
    if let Some(l) = seq.levels.iter().find(|l| !l.solution.converged) {
        return Err(failed("solver", format!("level n = {} did not converge (outputs written)", l.n)));
    }
    Ok(dir)
}

/// Rebuilds the solution stored in a level CSV: the mesh is regenerated
/// from the configuration and must match the stored vertices.
pub fn load_solution(cfg: &RunConfig, csv: &Path) -> Result<GraphSolution, CliError> {
    let d = domain_of(cfg)?;
    let mesh: TriMesh = triangulate(d, cfg.h).map_err(|e| failed("mesh", e))?;
    let cols = read_csv_columns(csv, &["x", "y", "u"]).map_err(|e| failed("io", e))?;
    if cols[0].len() != mesh.vertices.len() {
        return Err(failed(
            "mesh",
            format!("{} rows but the configured mesh has {} vertices", cols[0].len(), mesh.vertices.len()),
        ));
    }
    for (i, p) in mesh.vertices.iter().enumerate() {
        let q = Point::new(cols[0][i], cols[1][i]);
        if p.dist(q) > 1e-9 * (1.0 + p.norm()) {
            return Err(failed("mesh", format!("row {} does not match mesh vertex {i}", i + 2)));
        }
    }
    let disc = Arc::new(Discretization::new(Arc::new(mesh), &cfg.problem.chart).map_err(|e| failed("solver", e))?);
    graph_from_heights(&disc, &cols[2]).map_err(|e| failed("solver", e))
}

pub fn flux_command(cfg: &RunConfig, solution: &Path, curve: &Path, normal: NormalSide) -> Result<String, CliError> {
    let s = load_solution(cfg, solution)?;
    let cols = read_csv_columns(curve, &["x", "y"]).map_err(|e| failed("io", e))?;
    let pts: Vec<Point> = cols[0].iter().zip(&cols[1]).map(|(x, y)| Point::new(*x, *y)).collect();
    if pts.len() < 2 {
        return Err(rejected("mugeo", "a curve needs at least two points"));
    }
    let r = flux(&s, &CurveSample::from_points(pts, normal)).map_err(|e| rejected("solver", e))?;
    Ok(to_json(&r))
}

#[derive(Serialize)]
struct ExportMeta<'a> {
    source: String,
    scene: &'a str,
    vertices: usize,
    faces: usize,
    /// Positions are `(x, y, u)` in chart coordinates; the embedding is
    /// not isometric to the graph in the total space.
    embedding: &'static str,
}

/// Writes the graph as OBJ with positions `(x, y, u)` and a JSON sidecar.
pub fn export(cfg: &RunConfig, solution: &Path, obj: &Path) -> Result<(), CliError> {
    let s = load_solution(cfg, solution)?;
    let m = s.mesh();
    let mut text = String::from("# kjs graph surface: v x y u (chart coordinates)\n");
    for (p, u) in m.vertices.iter().zip(&s.u) {
        text.push_str(&format!("v {} {} {}\n", output::fmt17(p.x), output::fmt17(p.y), output::fmt17(*u)));
    }
    for t in &m.triangles {
        text.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    std::fs::write(obj, text).map_err(|e| io_failed(obj, e))?;
    let meta = ExportMeta {
        source: solution.display().to_string(),
        scene: &cfg.problem.name,
        vertices: m.vertices.len(),
        faces: m.triangles.len(),
        embedding: "chart-coordinate",
    };
    let side = obj.with_extension("json");
    write_json(&side, &meta).map_err(|e| io_failed(&side, e))
}
