use fixangle_core::carleman::{conjugation_residual, eval_weight, h_s_decay};
use fixangle_core::freqbridge::{far_field, plane_directions, time_to_frequency, Window};
use fixangle_core::grid::{Axis, LogScaled};
use fixangle_core::wavesolver::boundary_trace_from_fn;
use fixangle_core::{
    Bump, CarlemanWeight, GridConfig, Potential, SolverConfig, SpaceTimeField, SpaceTimeGrid,
    TestFunction,
};
use proptest::prelude::*;

fn coarse() -> SpaceTimeGrid {
    SpaceTimeGrid::build(&GridConfig {
        t0: -2.5,
        ..GridConfig::default().with_h(1.0 / 16.0)
    })
    .unwrap()
}

fn inside_bump() -> impl Strategy<Value = Bump> {
    (
        0.0..std::f64::consts::TAU,
        0.0..0.5f64,
        0.1..0.45f64,
        -1.0..1.0f64,
    )
        .prop_map(|(a, r0, r, c)| {
            let r0 = r0.min(0.95 - r);
            Bump::new([r0 * a.cos(), r0 * a.sin(), 0.0], r, c)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn valid_grids_respect_cfl(h in 0.03..0.2f64, f in 0.1..0.7f64, n in 2usize..4) {
        let cfg = GridConfig { n, h, dt_factor: f, half_width: 3.25, ..GridConfig::default() };
        match SpaceTimeGrid::build(&cfg) {
            Ok(g) => prop_assert!(g.dt <= g.h / (n as f64).sqrt() + 1e-15),
            Err(_) => prop_assert!(f > 1.0 / (n as f64).sqrt() - 1e-12),
        }
    }

    #[test]
    fn second_difference_of_quadratic_is_exact(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, axis in 0usize..3) {
        let g = coarse();
        let f = SpaceTimeField::from_fn(&g, |x, t| {
            let s = if axis == 2 { t } else { x[axis] };
            a * s * s + b * s + c
        });
        let ax = match axis { 0 => Axis::Space(0), 1 => Axis::Space(1), _ => Axis::Time };
        let d2 = f.diff(ax).unwrap().diff(ax).unwrap();
        // interior node well away from the box and time edges
        let mid = g.flat_index([g.nx / 2, g.nx / 2, 0]);
        let k = g.nt / 2;
        prop_assert!((d2.get(mid, k) - 2.0 * a).abs() < 1e-8 * (1.0 + a.abs()));
    }

    #[test]
    fn bumps_vanish_outside_the_ball(b in inside_bump(), r in 1.0..3.0f64, th in 0.0..std::f64::consts::TAU) {
        let v = Potential::new(2, vec![b]).unwrap();
        prop_assert_eq!(v.eval(&[r * th.cos(), r * th.sin(), 0.0]), 0.0);
    }

    #[test]
    fn sup_bound_dominates_samples(b in inside_bump()) {
        let v = Potential::new(2, vec![b]).unwrap();
        let g = coarse();
        let m = v.sample(&g).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(m <= v.sup_bound * (1.0 + 1e-9));
        prop_assert!((v.sup_bound - b.amplitude.abs() * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn support_must_stay_inside(r0 in 0.0..0.9f64, r in 0.1..0.9f64) {
        let ok = Potential::new(2, vec![Bump::new([r0, 0.0, 0.0], r, 1.0)]).is_ok();
        prop_assert_eq!(ok, r0 + r < 1.0);
    }

    #[test]
    fn halfline_integral_differentiates_to_v(b in inside_bump(), x0 in -0.6..0.6f64, xn in -0.9..0.9f64) {
        let v = Potential::new(2, vec![b]).unwrap();
        let d = 1e-4;
        let fd = (v.halfline_integral(&[x0, xn + d, 0.0]).unwrap() - v.halfline_integral(&[x0, xn - d, 0.0]).unwrap()) / (2.0 * d);
        prop_assert!((fd - v.eval(&[x0, xn, 0.0])).abs() < 1e-5 * (1.0 + v.sup_bound), "{} vs {}", fd, v.eval(&[x0, xn, 0.0]));
    }

    #[test]
    fn weight_hessian_constants(a in 1.01..3.0f64, lambda in 0.01..0.5f64, x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, t in -1.0..6.5f64, n in 2usize..4) {
        let wt = CarlemanWeight::new(a, lambda, 1.0, 6.5).unwrap();
        let w = eval_weight(&wt, n, &[x, y, z], t);
        let tt = 3;
        prop_assert_eq!(w.d2psi[tt][tt], -2.0);
        for i in 0..n {
            let expect = if i == n - 1 { 8.0 } else { 10.0 };
            prop_assert!((w.d2psi[i][i] - expect).abs() < 1e-12);
            for j in 0..n {
                if i != j {
                    prop_assert!(w.d2psi[i][j].abs() < 1e-12);
                }
            }
        }
        prop_assert!((w.d2psi[n - 1][tt] - 2.0).abs() < 1e-12);
        prop_assert!((w.phi - (lambda * w.psi).exp()).abs() <= 1e-12 * w.phi);
    }

    #[test]
    fn conjugation_identity_holds_pointwise(seed in 0u64..1000, s in 0.1..4.0f64, lambda in 0.02..0.2f64, x in -0.7..0.7f64, xn in -0.7..0.7f64, dt in 0.0..5.0f64) {
        let wt = CarlemanWeight::new(1.1, lambda, s, 6.5).unwrap();
        let f = &TestFunction::suite(2, 1, seed, 1.6)[0];
        let p = [x, xn, 0.0];
        let t = xn + dt;
        let w = eval_weight(&wt, 2, &p, t);
        let (r, scale) = conjugation_residual(&f.jet(&p, t), &w, s, 2).unwrap();
        prop_assert!(r <= 1e-10 * scale.max(1e-300), "{} vs {}", r, scale);
    }

    #[test]
    fn log_scaled_ratio_ignores_offsets(a in -1e3..1e3f64, b in 1e-3..1e3f64, off in -500.0..500.0f64) {
        let x = LogScaled { mantissa: a, log_scale: off };
        let y = LogScaled { mantissa: b, log_scale: off };
        prop_assert!((x.ratio(&y) - a / b).abs() <= 1e-12 * (a / b).abs().max(1e-300));
        let sum = LogScaled::from_value(a).add(LogScaled::from_value(b));
        prop_assert!((sum.value() - (a + b)).abs() <= 1e-12 * (a.abs() + b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn h_is_decreasing_in_s(s1 in 0.2..6.0f64, ds in 0.2..6.0f64) {
        let wt = CarlemanWeight::default();
        let r = h_s_decay(&wt, &[s1, s1 + ds], 16).unwrap();
        prop_assert!(r.values[1] < r.values[0]);
    }

    #[test]
    fn seeded_suites_are_reproducible(seed in 0u64..10_000) {
        let a = TestFunction::suite(2, 3, seed, 1.6);
        let b = TestFunction::suite(2, 3, seed, 1.6);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn far_field_is_linear_in_the_trace(alpha in -2.0..2.0f64, beta in -2.0..2.0f64) {
        let g = coarse();
        let cfg = SolverConfig::default();
        let f1 = |x: &[f64; 3], t: f64| (-(t - 1.0 - 0.5 * x[0]).powi(2) * 3.0).exp() * (1.0 + x[1]);
        let f2 = |x: &[f64; 3], t: f64| (-(t - 2.0).powi(2) * 2.0).exp() * x[0] * x[1];
        let t1 = boundary_trace_from_fn(&g, &cfg, f1);
        let t2 = boundary_trace_from_fn(&g, &cfg, f2);
        let mix = boundary_trace_from_fn(&g, &cfg, |x, t| alpha * f1(x, t) + beta * f2(x, t));
        let win = Window::default();
        let ks = [1.0, 2.5];
        let dirs = plane_directions(2, &[0.0, 1.3, 3.0, 4.4]);
        let ft1 = time_to_frequency(&t1, &ks, &win).unwrap();
        let ft2 = time_to_frequency(&t2, &ks, &win).unwrap();
        let ftm = time_to_frequency(&mix, &ks, &win).unwrap();
        for k in ks {
            let a = far_field(&ft1, k, &dirs).unwrap();
            let b = far_field(&ft2, k, &dirs).unwrap();
            let m = far_field(&ftm, k, &dirs).unwrap();
            for i in 0..dirs.len() {
                let lin = a[i] * alpha + b[i] * beta;
                prop_assert!((m[i] - lin).norm() <= 1e-10 * (1.0 + a[i].norm() + b[i].norm()));
            }
        }
    }

    #[test]
    fn scaled_trace_scales_its_norm(c in -3.0..3.0f64) {
        let g = coarse();
        let tr = boundary_trace_from_fn(&g, &SolverConfig::default(), |x, t| (t - x[1]).sin() * x[0]);
        let s = tr.scaled(c);
        let e = |t: &fixangle_core::BoundaryTrace| t.sigma_integral(0.0, |p| p.energy());
        prop_assert!((e(&s) - c * c * e(&tr)).abs() <= 1e-12 * (1.0 + e(&tr)));
    }
}
