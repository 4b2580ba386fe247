use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fixangle_core::carleman::{ibp_identity_check, ZInput};
use fixangle_core::grid::quad;
use fixangle_core::wavesolver::{Edge, Scheme, Stepper};
use fixangle_core::{
    Bump, CarlemanWeight, GaussRule, GridConfig, GridRule, Potential, Region, SpaceTimeGrid,
    TestFunction,
};

fn grid() -> SpaceTimeGrid {
    SpaceTimeGrid::build(&GridConfig::default().with_h(1.0 / 64.0)).unwrap()
}

fn leapfrog_step(c: &mut Criterion) {
    let g = grid();
    let v = Potential::new(2, vec![Bump::new([0.0; 3], 0.8, 1.0)]).unwrap();
    let len = g.spatial_len();
    let cur: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
    let prev: Vec<f64> = (0..len).map(|i| (i as f64 * 0.31).cos()).collect();
    let force = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    let mut next = vec![0.0; len];
    for (name, scheme) in [
        ("step_second_h64", Scheme::Second),
        ("step_fourth_h64", Scheme::Fourth),
    ] {
        let st = Stepper::new(&g, v.sample(&g), 0.0, Edge::Mur)
            .unwrap()
            .with_scheme(scheme);
        c.bench_function(name, |b| {
            b.iter(|| {
                st.step(
                    black_box(&prev),
                    black_box(&cur),
                    &force,
                    &force,
                    &mut scratch,
                    &mut next,
                )
            })
        });
    }
}

fn quadrature(c: &mut Criterion) {
    let g = SpaceTimeGrid::build(&GridConfig::default()).unwrap();
    let grid_rule = GridRule::new(&g);
    let gauss = GaussRule::standard(2, 6.5).unwrap();
    let f = |p: &fixangle_core::grid::QPoint| (p.x[0] * p.x[1] + p.t).cos();
    c.bench_function("grid_rule_q_h32", |b| {
        b.iter(|| quad(&grid_rule, Region::Q, f))
    });
    c.bench_function("gauss_rule_q", |b| b.iter(|| quad(&gauss, Region::Q, f)));
}

fn identity_check(c: &mut Criterion) {
    let rule = GaussRule::new(2, 6.5, 32, 128, 4, 8).unwrap();
    let wt = CarlemanWeight::new(1.1, 0.1, 1.0, 6.5).unwrap();
    let f = &TestFunction::suite(2, 1, 11, 1.6)[0];
    c.bench_function("ibp_identity_gauss_32", |b| {
        b.iter(|| ibp_identity_check(f, &wt, &rule, ZInput::Direct).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = leapfrog_step, quadrature, identity_check
}
criterion_main!(benches);
