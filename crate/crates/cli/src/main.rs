use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kjs_cli::config::{self, load_config, RunConfig};
use kjs_cli::{CliError, SolveFlags};
use kjs_core::domain::DEFAULT_MAX_POLYGONS;
use kjs_core::geom::Point;
use kjs_core::mugeo::NormalSide;

/// Jenkins–Serrin problems for minimal Killing graphs.
#[derive(Parser)]
#[command(name = "kjs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Builtin scene name (see `scene-list`).
    #[arg(long)]
    scene: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Overrides {
    /// Mesh size.
    #[arg(long)]
    h: Option<f64>,
    /// Truncation levels, comma separated and increasing.
    #[arg(long)]
    schedule: Option<String>,
    /// Newton residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Angle-function threshold of divergence detection.
    #[arg(long)]
    nu_thresh: Option<f64>,
    /// Required decrease of the angle function over the last two levels.
    #[arg(long)]
    decrease_factor: Option<f64>,
    /// Output directory (overrides the config and the environment).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Left,
    Right,
}

#[derive(Subcommand)]
enum Command {
    /// Print the builtin scenes.
    SceneList,
    /// Decide solvability and print the report as JSON.
    Check {
        #[command(flatten)]
        source: Source,
        /// Bound on enumerated inscribed polygons.
        #[arg(long, default_value_t = DEFAULT_MAX_POLYGONS)]
        max_polygons: usize,
    },
    /// Shoot a μ-geodesic and print its samples as CSV (x,y,s).
    Geodesic {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        from: Point,
        /// Initial direction, radians from the x axis.
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        /// μ-length.
        #[arg(long)]
        length: f64,
        /// Output spacing in μ-arclength.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Solve the truncated sequence; writes level CSVs, mesh and report.
    Solve {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Solve even if the problem has no solution.
        #[arg(long)]
        force: bool,
        /// Only flag divergence inside the domain scaled by this factor.
        #[arg(long)]
        region_shrink: Option<f64>,
    },
    /// Flux of a stored solution across a polyline CSV (columns x,y).
    Flux {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        /// Side of the curve the normal points to.
        #[arg(long, value_enum, default_value_t = Side::Left)]
        normal: Side,
    },
    /// Write a stored solution as an OBJ surface with a JSON sidecar.
    Export {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        obj: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad x in `{s}`"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad y in `{s}`"))?;
    Ok(Point::new(x, y))
}

fn load(source: &Source) -> Result<RunConfig, CliError> {
    let cfg = match (&source.scene, &source.config) {
        (Some(name), _) => RunConfig::for_scene(name),
        (None, Some(path)) => load_config(path),
        (None, None) => unreachable!("clap enforces a source"),
    };
    cfg.map_err(|e| CliError::Rejected(format!("config: {e}")))
}

fn apply(cfg: &mut RunConfig, o: &Overrides) -> Result<(), CliError> {
    let bad = |e: config::ConfigError| CliError::Rejected(format!("config: {e}"));
    let positive = |v: f64, name: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::Rejected(format!("config: invalid `{name}`: must be positive, got {v}")))
        }
    };
    if let Some(h) = o.h {
        cfg.h = positive(h, "h")?;
    }
    if let Some(s) = &o.schedule {
        let s = config::parse_schedule(s).map_err(bad)?;
        config::validate_schedule(&s).map_err(bad)?;
        cfg.schedule = s;
    }
    if let Some(t) = o.tol {
        cfg.tol = positive(t, "tol")?;
    }
    if let Some(t) = o.nu_thresh {
        cfg.nu_thresh = positive(t, "nu_thresh")?;
    }
    if let Some(f) = o.decrease_factor {
        if !(f > 1.0) {
            return Err(CliError::Rejected(format!("config: invalid `decrease_factor`: must exceed 1, got {f}")));
        }
        cfg.decrease_factor = f;
    }
    if let Some(dir) = &o.output {
        cfg.output = dir.clone();
        cfg.output_explicit = true;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SceneList => print!("{}", kjs_cli::scene_list()),
        Command::Check { source, max_polygons } => print!("{}", kjs_cli::check(&load(&source)?, max_polygons)?),
        Command::Geodesic { source, from, theta, length, step } => {
            print!("{}", kjs_cli::geodesic(&load(&source)?, from, theta, length, step)?)
        }
        Command::Solve { source, overrides, force, region_shrink } => {
            let mut cfg = load(&source)?;
            apply(&mut cfg, &overrides)?;
            let dir = kjs_cli::solve(&cfg, SolveFlags { force, region_shrink })?;
            println!("{}", dir.display());
        }
        Command::Flux { source, overrides, solution, curve, normal } => {
            let mut cfg = load(&source)?;
            apply(&mut cfg, &overrides)?;
            let side = match normal {
                Side::Left => NormalSide::Left,
                Side::Right => NormalSide::Right,
            };
            print!("{}", kjs_cli::flux_command(&cfg, &solution, &curve, side)?);
        }
        Command::Export { source, overrides, solution, obj } => {
            let mut cfg = load(&source)?;
            apply(&mut cfg, &overrides)?;
            kjs_cli::export(&cfg, &solution, &obj)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kjs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
