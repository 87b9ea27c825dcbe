use kjs_cli::config::{parse_config, ConfigError, DEFAULT_SCHEDULE};
use kjs_core::domain::check_admissibility;
use kjs_core::scene::builtin_scene;

#[test]
fn scene_only_gets_defaults() {
    let cfg = parse_config("scene = \"flat-scherk\"").unwrap();
    let d = cfg.problem.domain.as_ref().unwrap();
    assert_eq!(cfg.schedule, DEFAULT_SCHEDULE);
    assert!((cfg.h - 0.05 * d.diameter()).abs() < 1e-15);
    assert_eq!((cfg.tol, cfg.geo_tol, cfg.nu_thresh), (1e-9, 1e-5, 0.1));
}

#[test]
fn decreasing_schedule_is_rejected() {
    for text in ["scene = \"flat-scherk\"\nschedule = \"4,2\"", "scene = \"flat-scherk\"\nschedule = [4, 2]"] {
        match parse_config(text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "schedule"),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn errors_name_the_problem() {
    let e = parse_config("scene = \"flat-scherk\"\nh = [").unwrap_err();
    assert!(matches!(e, ConfigError::Parse(ref m) if m.contains("line 2")), "{e}");
    let e = parse_config("scene = \"klein\"").unwrap_err();
    assert!(e.to_string().contains("klein"));
    let e = parse_config("scene = \"flat-scherk\"\ntol = -1").unwrap_err();
    assert!(matches!(e, ConfigError::Invalid { ref field, .. } if field == "tol"));
    let e = parse_config("scene = \"flat-scherk\"\nmesh_size = 1").unwrap_err();
    assert!(e.to_string().contains("mesh_size"));
}

#[test]
fn adjacent_plus_infinity_square() {
    let text = r#"
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
        label = "-inf"
        kind = "segment"
        to = [0, 1]
        [[boundary.arc]]
        label = "-inf"
        kind = "segment"
    "#;
    let cfg = parse_config(text).unwrap();
    let d = cfg.problem.domain.unwrap();
    assert_eq!(d.arcs.len(), 4);
    let r = check_admissibility(&d);
    assert!(!r.admissible);
    let w = r.witness.unwrap();
    assert!((w.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
}

fn catenary_start(a: f64, half: f64) -> (f64, f64, f64, f64) {
    let t = -half;
    let theta = 1.0f64.atan2((t / a).sinh());
    let length = a * (half + a * (2.0 * half / a).sinh() / 2.0);
    (a * (t / a).cosh(), t, theta, length)
}

#[test]
fn custom_rotational_quadrilateral_matches_builtin() {
    let (xi, yi, ti, li) = catenary_start(1.0, 0.5);
    let (xo, yo, to, lo) = catenary_start(2.0, 0.5);
    let text = format!(
        r#"
        h = 0.1
        [chart]
        mu = "x"
        rect = ["1e-3", 6, -6, 6]
        interior = [1.5, 0]
        [[boundary.arc]]
        label = "finite"
        value = "0"
        kind = "segment"
        [[boundary.arc]]
        label = "-inf"
        kind = "geodesic"
        from = [{xo:e}, {yo:e}]
        theta = {to:e}
        length = {lo:e}
        [[boundary.arc]]
        label = "finite"
        value = "0"
        kind = "segment"
        [[boundary.arc]]
        label = "+inf"
        kind = "geodesic"
        from = [{xi:e}, {yi:e}]
        theta = {ti:e}
        length = {li:e}
        reverse = true
        "#
    );
    let cfg = parse_config(&text).unwrap();
    let d = cfg.problem.domain.unwrap();
    let reference = builtin_scene("rotational-r3").unwrap().domain.unwrap();
    assert_eq!(d.arcs.len(), reference.arcs.len());
    for (a, b) in d.arc_lengths.iter().zip(&reference.arc_lengths) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    assert!(check_admissibility(&d).admissible);
    assert_eq!(cfg.h, 0.1);
}

#[test]
fn concave_finite_arc_is_rejected() {
    let text = r#"
        [chart]
        rect = [-1, 2, -1, 2]
        interior = [0.5, 0.2]
        [[boundary.arc]]
        label = "finite"
        value = "0"
        kind = "segment"
        from = [0, 0]
        to = [1, 0]
        [[boundary.arc]]
        label = "finite"
        value = "0"
        kind = "polyline"
        points = [[1, 0], [1, 1], [0.5, 0.6], [0, 1]]
        [[boundary.arc]]
        label = "finite"
        value = "0"
        kind = "segment"
        to = [0, 0]
    "#;
    assert!(matches!(parse_config(text), Err(ConfigError::Domain(_))));
}
