use fixangle_core::experiments::{run_trace_recovery, run_uniqueness_sanity};
use fixangle_core::freqbridge::{
    far_field, far_field_constant, plane_directions, time_to_frequency, Window,
};
use fixangle_core::grid::{quad, Axis};
use fixangle_core::wavesolver::{pulse, solve_scattered};
use fixangle_core::{
    Bump, GaussRule, GridConfig, GridRule, Potential, Region, SolverConfig, SpaceTimeGrid,
};
use num_complex::Complex64;

fn grid(h: f64, f: impl FnOnce(GridConfig) -> GridConfig) -> SpaceTimeGrid {
    SpaceTimeGrid::build(&f(GridConfig::default().with_h(h))).unwrap()
}

#[test]
fn gamma_mask_matches_exhaustive_scan() {
    let g = grid(1.0 / 16.0, |c| GridConfig {
        n: 3,
        half_width: 1.75,
        t_end: 2.0,
        ..c
    });
    let mut count = 0;
    for i in 0..g.spatial_len() {
        let x = g.coord(i);
        if x.iter().map(|v| v * v).sum::<f64>() >= 1.0 {
            continue;
        }
        for k in 0..g.nt {
            if (g.time(k) - x[2]).abs() <= 0.5 * g.dt + 1e-12 {
                count += 1;
            }
        }
    }
    assert_eq!(g.gamma_nodes().len(), count);
}

/// `int_Q div F = int_Sigma F.nu + int_Top F_t + int_Gamma (F_n - F_t) / sqrt 2`
/// for `F = (f x, g)` with smooth `f`, `g`.
fn divergence_residual<R: fixangle_core::QuadRule + ?Sized>(rule: &R) -> f64 {
    let f = |x: &[f64; 3], t: f64| (0.3 * t).cos() * (1.0 + 0.2 * x[0]);
    let g = |x: &[f64; 3], t: f64| (0.5 * x[1] + 0.1 * t).sin();
    // div (f x) = 2 f + x . grad f,  d_t g
    let div = |x: &[f64; 3], t: f64| {
        2.0 * f(x, t) + 0.2 * x[0] * (0.3 * t).cos() + 0.1 * (0.5 * x[1] + 0.1 * t).cos()
    };
    let vol = quad(rule, Region::Q, |p| div(&p.x, p.t)).unwrap();
    let sigma = quad(rule, Region::Sigma, |p| {
        f(&p.x, p.t) * (p.x[0] * p.normal[0] + p.x[1] * p.normal[1])
    })
    .unwrap();
    let top = quad(rule, Region::Top, |p| g(&p.x, p.t)).unwrap();
    let gamma = quad(rule, Region::Gamma, |p| {
        (f(&p.x, p.t) * p.x[1] - g(&p.x, p.t)) / 2f64.sqrt()
    })
    .unwrap();
    (vol - sigma - top - gamma).abs() / vol.abs()
}

#[test]
fn discrete_divergence_theorem_improves_under_refinement() {
    let coarse = divergence_residual(&GridRule::new(&grid(1.0 / 16.0, |c| c)));
    let fine = divergence_residual(&GridRule::new(&grid(1.0 / 32.0, |c| c)));
    let gauss = divergence_residual(&GaussRule::standard(2, 6.5).unwrap());
    assert!(fine < coarse, "{coarse} -> {fine}");
    assert!(coarse < 0.05, "{coarse}");
    assert!(gauss < 1e-8, "{gauss}");
}

/// First-order far field from `u_inf = -gamma_2 int exp(-ik (xh - e_n).y) V(y) dy`.
fn born(v: &Potential, g: &SpaceTimeGrid, k: f64, xh: &[f64; 3]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for node in g.ball_nodes() {
        let y = g.coord(node.index);
        let phase = -k * ((xh[0]) * y[0] + (xh[1] - 1.0) * y[1]);
        acc += Complex64::from_polar(node.weight * v.eval(&y), phase);
    }
    -far_field_constant(2, k) * acc
}

#[test]
fn weak_potential_far_field_matches_born() {
    let g = grid(1.0 / 32.0, |c| c);
    let v = Potential::new(2, vec![Bump::new([0.1, 0.0, 0.0], 0.6, 0.2)]).unwrap();
    let wf = solve_scattered(&v, &g, &SolverConfig::default()).unwrap();
    let ks = [1.0, 2.0, 4.0];
    let ft = time_to_frequency(&wf.trace, &ks, &Window::default()).unwrap();
    let thetas: Vec<f64> = (0..12)
        .map(|i| i as f64 * std::f64::consts::PI / 6.0)
        .collect();
    let dirs = plane_directions(2, &thetas);
    for k in ks {
        let ff = far_field(&ft, k, &dirs).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for (d, z) in dirs.iter().zip(&ff) {
            let b = born(&v, &g, k, d);
            num += (z - b).norm_sqr();
            den += b.norm_sqr();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.15, "k = {k}: relative distance to Born {rel}");
    }
}

#[test]
fn recovery_scales_with_the_potential() {
    let g = grid(1.0 / 32.0, |c| c);
    let zero = Potential::zero(2);
    let solver = SolverConfig::default();
    let rec = |lambda: f64| {
        let v = Potential::new(2, vec![Bump::new([0.0; 3], 0.8, 0.5 * lambda)]).unwrap();
        run_trace_recovery(&v, &zero, &g, &solver).unwrap()
    };
    let base = rec(1.0);
    for lambda in [0.5, 2.0] {
        let r = rec(lambda);
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in r.nodes.iter().zip(&base.nodes) {
            num += a.weight * (a.dv_rec / lambda - b.dv_rec).powi(2);
            den += b.weight * b.dv_rec.powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "lambda = {lambda}: {rel}");
    }
}

#[test]
fn difference_field_satisfies_its_equation() {
    let g = grid(1.0 / 32.0, |c| GridConfig {
        half_width: 1.75,
        t_end: 3.0,
        ..c
    });
    let solver = SolverConfig {
        keep_field: true,
        ..SolverConfig::default()
    };
    let v1 = Potential::new(2, vec![Bump::new([0.1, 0.1, 0.0], 0.5, 0.8)]).unwrap();
    let v2 = Potential::new(2, vec![Bump::new([-0.2, 0.0, 0.0], 0.4, -0.6)]).unwrap();
    let a = solve_scattered(&v1, &g, &solver).unwrap();
    let b = solve_scattered(&v2, &g, &solver).unwrap();
    let (ua, ub) = (a.field.unwrap(), b.field.unwrap());
    let w = ua.sub(&ub);
    let wtt = w.diff(Axis::Time).unwrap().diff(Axis::Time).unwrap();
    let wxx = w
        .diff(Axis::Space(0))
        .unwrap()
        .diff(Axis::Space(0))
        .unwrap();
    let wyy = w
        .diff(Axis::Space(1))
        .unwrap()
        .diff(Axis::Space(1))
        .unwrap();
    let (mut res, mut scale) = (0.0, 0.0);
    for node in g.ball_nodes() {
        let x = g.coord(node.index);
        let (p, q) = (v1.eval(&x), v2.eval(&x));
        for k in 2..g.nt - 2 {
            let t = g.time(k);
            let src = -(p - q) * pulse(t - x[1], a.eps);
            let lhs = wtt.get(node.index, k) - wxx.get(node.index, k) - wyy.get(node.index, k)
                + p * w.get(node.index, k)
                + (p - q) * ub.get(node.index, k);
            res += node.weight * (lhs - src).powi(2);
            scale += node.weight * src.powi(2);
        }
    }
    let rel = (res / scale).sqrt();
    // the check uses wide centred differences, the scheme compact ones
    assert!(rel < 0.1, "{rel}");
}

#[test]
fn uniqueness_sanity_on_a_bump() {
    let g = grid(1.0 / 32.0, |c| GridConfig { t0: -2.5, ..c });
    let v = Potential::new(2, vec![Bump::new([0.0; 3], 0.8, 1.0)]).unwrap();
    let r = run_uniqueness_sanity(&v, &g, &SolverConfig::default()).unwrap();
    assert_eq!(r.determinism_diff, 0.0);
    assert!(
        (r.eps_rel_diff - r.eps_predicted).abs() < 0.25 * r.eps_predicted,
        "{r:?}"
    );
}
