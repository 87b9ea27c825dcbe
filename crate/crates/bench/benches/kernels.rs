use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use kjs_core::domain::check_js_conditions;
use kjs_core::geom::Point;
use kjs_core::mesh::triangulate;
use kjs_core::mugeo::mu_geodesic_shoot;
use kjs_core::scene::builtin_scene;
use kjs_core::solver::{boundary_values, solve_dirichlet, Discretization, SolverOptions};

fn kernels(c: &mut Criterion) {
    let scherk = builtin_scene("flat-scherk").unwrap();
    let domain = scherk.domain.as_ref().unwrap();
    let rot = builtin_scene("rotational-r3").unwrap();

    c.bench_function("triangulate scherk h=0.1", |b| b.iter(|| triangulate(domain, black_box(0.1)).unwrap()));

    c.bench_function("js check scherk", |b| b.iter(|| check_js_conditions(domain, 10_000).unwrap()));

    c.bench_function("geodesic shoot rotational", |b| {
        b.iter(|| mu_geodesic_shoot(&rot.chart, Point::new(1.5, 0.0), black_box(1.2), 2.0, 0.01).unwrap())
    });

    let mesh = Arc::new(triangulate(domain, 0.1).unwrap());
    let disc = Arc::new(Discretization::new(mesh.clone(), &scherk.chart).unwrap());
    let values = boundary_values(domain, &mesh, 4.0).unwrap();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("scherk level 4 h=0.1", |b| {
        b.iter(|| solve_dirichlet(&disc, &values, &SolverOptions::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
