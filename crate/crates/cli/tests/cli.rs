use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kjs(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kjs"));
    c.args(args).env_remove("KJS_OUTPUT_DIR");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().expect("run kjs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn scene_list_names_every_scene() {
    let o = kjs(&["scene-list"], &[]);
    assert!(o.status.success());
    let v = json(&o);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["flat-scherk", "rotational-r3", "nil3", "h2xr", "s2xr-cap", "flat-cylinder"]);
}

#[test]
fn check_decisions_and_exit_codes() {
    let o = kjs(&["check", "--scene", "flat-scherk"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["solvable"], true);
    assert_eq!(v["polygons"].as_array().unwrap().len(), 5);

    // deciding "no" is still a successful decision
    let o = kjs(&["check", "--scene", "flat-cylinder"], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["solvable"], false);

    let o = kjs(&["check", "--scene", "h2xr"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = kjs(&["check", "--scene", "klein"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config:"));
}

#[test]
fn check_reports_inadmissible_corner() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("adjacent.toml");
    std::fs::write(
        &cfg,
        r#"
[chart]
rect = [-1, 2, -1, 2]
interior = [0.5, 0.5]
[[boundary.arc]]
label = "+inf"
kind = "segment"
from = [0, 0]
to = [1, 0]
[[boundary.arc]]
label = "+inf"
kind = "segment"
to = [1, 1]
[[boundary.arc]]
label = "finite"
value = "0"
kind = "segment"
to = [0, 1]
[[boundary.arc]]
label = "finite"
value = "0"
kind = "segment"
"#,
    )
    .unwrap();
    let o = kjs(&["check", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["admissible"], false);
    assert_eq!(v["solvable"], false);
    assert!(v["admissibility_witness"].is_object());
}

#[test]
fn geodesic_csv() {
    let o = kjs(&["geodesic", "--scene", "flat-scherk", "--from", "0,0", "--theta", "0", "--length", "1", "--step", "0.25"], &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,s");
    assert_eq!(lines.len(), 6);
    let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-12 && last[1].abs() < 1e-12 && (last[2] - 1.0).abs() < 1e-12);
}

#[test]
fn solve_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = kjs(
            &["solve", "--scene", "flat-scherk", "--h", "0.4", "--schedule", "1,2", "--output", out.to_str().unwrap()],
            &[],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["mesh.txt", "level_1.csv", "level_2.csv", "report.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let ra = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("report.json")).unwrap());
    let v: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(v["levels"].as_array().unwrap().len(), 2);
    assert!(v["levels"][1]["converged"].as_bool().unwrap());
    for f in v["boundary_flux"].as_array().unwrap() {
        assert_eq!(f["within_bound"], true);
    }
    let csv = std::fs::read_to_string(a.join("level_2.csv")).unwrap();
    assert!(csv.starts_with("x,y,u,nu,W\n"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let o = kjs(&["solve", "--scene", "flat-scherk", "--h", "0.5", "--schedule", "1"], &[("KJS_OUTPUT_DIR", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").exists());
}

#[test]
fn unsolvable_problem_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cyl");
    let args = ["solve", "--scene", "flat-cylinder", "--h", "0.5", "--schedule", "1,2", "--output", out.to_str().unwrap()];
    assert_eq!(kjs(&args, &[]).status.code(), Some(1));
    let mut forced = args.to_vec();
    forced.push("--force");
    let o = kjs(&forced, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flux_and_export_from_stored_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let common = ["--scene", "flat-scherk", "--h", "0.4"];
    let mut args = vec!["solve", "--schedule", "1,2", "--output", out.to_str().unwrap()];
    args.extend(common);
    assert!(kjs(&args, &[]).status.success());

    // a closed square loop around the centre, counterclockwise
    let curve = dir.path().join("loop.csv");
    std::fs::write(&curve, "x,y\n-0.5,-0.5\n0.5,-0.5\n0.5,0.5\n-0.5,0.5\n-0.5,-0.5\n").unwrap();
    let sol = out.join("level_2.csv");
    let mut args = vec!["flux", "--solution", sol.to_str().unwrap(), "--curve", curve.to_str().unwrap(), "--normal", "right"];
    args.extend(common);
    let o = kjs(&args, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let (value, len) = (v["value"].as_f64().unwrap(), v["mu_length"].as_f64().unwrap());
    assert!((len - 4.0).abs() < 1e-12);
    assert!(value.abs() <= len * (1.0 + 1e-6));

    let obj = dir.path().join("surface.obj");
    let mut args = vec!["export", "--solution", sol.to_str().unwrap(), "--obj", obj.to_str().unwrap()];
    args.extend(common);
    let o = kjs(&args, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&obj).unwrap();
    let rows = std::fs::read_to_string(&sol).unwrap().lines().count() - 1;
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), rows);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(obj.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["embedding"], "chart-coordinate");

    // a solution stored for another mesh is refused
    let mut args = vec!["flux", "--solution", sol.to_str().unwrap(), "--curve", curve.to_str().unwrap(), "--h", "0.3"];
    args.extend(&common[..2]);
    assert_eq!(kjs(&args, &[]).status.code(), Some(2));
}
