//! End-to-end acceptance run. Each criterion prints one `PASS` or `FAIL` line;
//! the test fails if any criterion does.

use std::time::Instant;

use fixangle_core::carleman::{
    carleman_sweep, conjugation_residual, energy_sweep, eval_weight, geometry_check, h_s_decay,
    ibp_identity_check, SidesOptions, ZInput,
};
use fixangle_core::experiments::{
    characteristic_data_check, ensemble_pairs, run_stability, run_trace_recovery, StabilitySpec,
};
use fixangle_core::freqbridge::{far_field, plane_directions, time_to_frequency, Window};
use fixangle_core::potential::EnsembleSpec;
use fixangle_core::wavesolver::{boundary_trace_from_fn, mms_study, solve_scattered, Scheme};
use fixangle_core::{
    Bump, CarlemanWeight, GaussRule, GridConfig, GridRule, Potential, SolverConfig, SpaceTimeGrid,
    TestFunction,
};
use num_complex::Complex64;

const SUITE_SEED: u64 = 11;
const CUTOFF: f64 = 1.6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(h: f64, t_end: f64) -> SpaceTimeGrid {
    SpaceTimeGrid::build(&GridConfig {
        t_end,
        ..GridConfig::default().with_h(h)
    })
    .unwrap()
}

fn bump() -> Potential {
    Potential::new(2, vec![Bump::new([0.0; 3], 0.8, 1.0)]).unwrap()
}

fn conjugation() -> Outcome {
    let suite = TestFunction::suite(2, 10, SUITE_SEED, CUTOFF);
    let mut worst = 0.0f64;
    for s in [0.5, 1.0, 2.0] {
        let wt = CarlemanWeight::new(1.1, 0.1, s, 6.5).unwrap();
        for f in &suite {
            for i in 0..7 {
                for j in 0..7 {
                    let x = [-0.9 + 0.3 * i as f64, -0.9 + 0.3 * j as f64, 0.0];
                    if x[0] * x[0] + x[1] * x[1] > 1.0 {
                        continue;
                    }
                    for t in [x[1], x[1] + 0.7, 3.1, 6.5] {
                        let w = eval_weight(&wt, 2, &x, t);
                        let (r, scale) = conjugation_residual(&f.jet(&x, t), &w, s, 2).unwrap();
                        worst = worst.max(r / scale.max(1e-300));
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max relative residual {worst:.2e} (limit 1e-9)"),
    )
}

fn identity() -> Outcome {
    let suite = TestFunction::suite(2, 10, SUITE_SEED, CUTOFF);
    let wt = CarlemanWeight::new(1.1, 0.1, 1.0, 6.5).unwrap();
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let mut worst = Vec::new();
    let mut printed = Vec::new();
    for h in hs {
        let g = grid(h, 6.5);
        let rule = GridRule::new(&g);
        let rs: Vec<_> = suite
            .iter()
            .map(|f| ibp_identity_check(f, &wt, &rule, ZInput::Direct).unwrap())
            .collect();
        worst.push(rs.iter().map(|r| r.residual_corrected).fold(0.0, f64::max));
        printed.push(rs.iter().map(|r| r.residual_printed).fold(0.0, f64::max));
    }
    let factors: Vec<f64> = worst.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = worst[0] <= 0.05 && factors.iter().all(|f| *f >= 1.7);
    outcome(
        pass,
        format!(
            "max residual {:.2e} / {:.2e} / {:.2e} at h = 1/32, 1/64, 1/128, reduction factors {:.2}, {:.2}; \
             boundary term as printed gives {:.2e}",
            worst[0], worst[1], worst[2], factors[0], factors[1], printed[0]
        ),
    )
}

fn carleman() -> Outcome {
    let suite = TestFunction::suite(2, 20, SUITE_SEED, CUTOFF);
    let wt = CarlemanWeight::new(1.1, 0.1, 0.5, 6.5).unwrap();
    let rule = GaussRule::standard(2, 6.5).unwrap();
    let s = [0.5, 1.0, 2.0, 4.0];
    let r = carleman_sweep(&suite, &wt, &s, &rule, &SidesOptions::new()).unwrap();
    let all = r.per_s_max.iter().all(Option::is_some);
    let spread = r.spread.unwrap_or(f64::INFINITY);
    let maxima: Vec<String> = r
        .per_s_max
        .iter()
        .map(|m| m.map_or("none".into(), |m| format!("{m:.3e}")))
        .collect();
    outcome(
        all && spread <= 2.0,
        format!(
            "per-s max ratio [{}], spread {spread:.2} (limit 2)",
            maxima.join(", ")
        ),
    )
}

fn geometry() -> Outcome {
    let g = geometry_check(6.5, 1.1).unwrap();
    let scan: Vec<f64> = (1..=2000).map(|i| 1.0 + 0.005 * i as f64).collect();
    let failing = scan
        .iter()
        .filter(|a| geometry_check(6.0, **a).map(|c| !c.ok).unwrap_or(true))
        .count();
    outcome(
        g.ok && g.alpha > 0.0 && failing == scan.len(),
        format!("T = 6.5, a = 1.1: ok = {}, alpha = {:.4}; T = 6 rejected for {failing}/{} values of a in (1, 11]", g.ok, g.alpha, scan.len()),
    )
}

fn data_law() -> Outcome {
    let g = grid(1.0 / 64.0, 6.5);
    let v = bump();
    let wf = solve_scattered(&v, &g, &SolverConfig::default()).unwrap();
    let r = characteristic_data_check(&wf, &v, 8.0).unwrap();
    outcome(
        r.max_rel <= 0.05,
        format!(
            "u(x, x_n + 8 eps) vs datum: max rel {:.3} (limit 0.05), L2 rel {:.3} over {} nodes; fitted front value: max rel {:.3}, L2 rel {:.3}",
            r.max_rel, r.l2_rel, r.count, r.front_max_rel, r.front_l2_rel
        ),
    )
}

fn recovery() -> Outcome {
    let g = grid(1.0 / 64.0, 6.5);
    let zero = Potential::zero(2);
    let fourth = SolverConfig {
        scheme: Scheme::Fourth,
        ..SolverConfig::default()
    };
    let r = run_trace_recovery(&bump(), &zero, &g, &fourth).unwrap();
    let second = run_trace_recovery(&bump(), &zero, &g, &SolverConfig::default()).unwrap();
    let e = r.rel_l2.unwrap_or(f64::INFINITY);
    outcome(
        e <= 0.05,
        format!(
            "relative L2 error {e:.4} (limit 0.05) with the fourth-order scheme; second-order scheme gives {:.4}",
            second.rel_l2.unwrap_or(f64::NAN)
        ),
    )
}

fn stability() -> Outcome {
    let pairs = ensemble_pairs(&EnsembleSpec::default(), 2, 10).unwrap();
    let spec = StabilitySpec::default();
    let mut c = Vec::new();
    let mut finite = true;
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let rep = run_stability(&pairs, &grid(h, 6.5), &SolverConfig::default(), &spec).unwrap();
        finite &= rep
            .records
            .iter()
            .all(|r| r.skipped.is_some() || r.ratio.is_some_and(f64::is_finite));
        c.push(rep.c_emp.unwrap_or(f64::NAN));
    }
    let change = (c[1] - c[0]).abs() / c[0];
    outcome(
        finite && change <= 0.25,
        format!("C_emp {:.3} at h = 1/32, {:.3} at h = 1/64, change {:.1}% (limit 25%), all ratios finite: {finite}", c[0], c[1], 100.0 * change),
    )
}

fn solver_order() -> Outcome {
    let base = GridConfig {
        half_width: 1.75,
        t_end: 2.0,
        ..GridConfig::default()
    };
    let v = Potential::new(2, vec![Bump::new([0.2, 0.0, 0.0], 0.5, 0.7)]).unwrap();
    let r = mms_study(
        &base,
        &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
        &v,
    )
    .unwrap();
    let wf = solve_scattered(
        &Potential::zero(2),
        &grid(1.0 / 32.0, 6.5),
        &SolverConfig::default(),
    )
    .unwrap();
    let orders: Vec<String> = r.orders.iter().map(|o| format!("{o:.2}")).collect();
    outcome(
        r.min_order >= 1.8 && wf.max_abs <= 1e-12,
        format!(
            "MMS orders [{}] (min {:.2}, limit 1.8); V = 0 gives max |u_s| = {:.1e}",
            orders.join(", "),
            r.min_order,
            wf.max_abs
        ),
    )
}

fn decay() -> Outcome {
    let r = h_s_decay(&CarlemanWeight::default(), &[0.5, 1.0, 2.0, 4.0, 8.0], 64).unwrap();
    let ratio = r.values[4] / r.values[0];
    outcome(
        r.strictly_decreasing && ratio <= 0.1,
        format!(
            "strictly decreasing: {}; h(8) / h(0.5) = {ratio:.3} (limit 0.1)",
            r.strictly_decreasing
        ),
    )
}

fn energy() -> Outcome {
    let suite = TestFunction::suite(2, 20, SUITE_SEED, CUTOFF);
    let wt = CarlemanWeight::default();
    let mut maxima = Vec::new();
    let mut finite = true;
    for (r, a, p, o) in [(32, 128, 4, 8), (64, 256, 4, 16)] {
        let rule = GaussRule::new(2, 6.5, r, a, p, o).unwrap();
        let e = energy_sweep(&suite, &wt, &rule, 6.5).unwrap();
        finite &= e
            .slice
            .iter()
            .chain(&e.characteristic)
            .all(|x| x.lhs.is_zero() || x.ratio.is_some_and(f64::is_finite));
        maxima.push((
            e.max_slice.unwrap_or(f64::NAN),
            e.max_characteristic.unwrap_or(f64::NAN),
        ));
    }
    let ds = (maxima[1].0 - maxima[0].0).abs() / maxima[1].0;
    let dc = (maxima[1].1 - maxima[0].1).abs() / maxima[1].1;
    outcome(
        finite && ds <= 0.1 && dc <= 0.1,
        format!(
            "slice max {:.4} -> {:.4}, characteristic max {:.4} -> {:.4} under refinement (changes {ds:.1e}, {dc:.1e}, limit 10%), all finite: {finite}",
            maxima[0].0, maxima[1].0, maxima[0].1, maxima[1].1
        ),
    )
}

fn bridge() -> Outcome {
    const FLOOR: f64 = 1e-12;
    let g = SpaceTimeGrid::build(&GridConfig {
        t0: -2.5,
        ..GridConfig::default()
    })
    .unwrap();
    let cfg = SolverConfig::default();
    let ks = [1.0, 2.0, 4.0];
    let dirs = plane_directions(
        2,
        &(0..16)
            .map(|i| i as f64 * std::f64::consts::PI / 8.0)
            .collect::<Vec<_>>(),
    );
    let win = Window::default();
    let max_ff = |wf: &fixangle_core::WaveField| -> Vec<Vec<Complex64>> {
        let ft = time_to_frequency(&wf.trace, &ks, &win).unwrap();
        ks.iter()
            .map(|k| far_field(&ft, *k, &dirs).unwrap())
            .collect()
    };
    let zero = max_ff(&solve_scattered(&Potential::zero(2), &g, &cfg).unwrap());
    let zero_max = zero.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let v = Potential::new(
        2,
        vec![
            Bump::new([0.1, -0.2, 0.0], 0.5, 0.8),
            Bump::new([-0.3, 0.3, 0.0], 0.3, -0.5),
        ],
    )
    .unwrap();
    let a = max_ff(&solve_scattered(&v, &g, &cfg).unwrap());
    let b = max_ff(&solve_scattered(&v.clone(), &g, &cfg).unwrap());
    let diff = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let scale = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);

    let tr = boundary_trace_from_fn(&g, &cfg, |_, t| (-(t - 2.0) * (t - 2.0)).exp());
    let ft = time_to_frequency(
        &tr,
        &[0.5, 1.0, 3.0, 7.0],
        &Window {
            deconvolve: false,
            ..Window::default()
        },
    )
    .unwrap();
    let mut ft_err = 0.0f64;
    for (i, k) in ft.ks.iter().enumerate() {
        let exact =
            Complex64::from_polar(std::f64::consts::PI.sqrt() * (-k * k / 4.0).exp(), 2.0 * k);
        for z in &ft.values[i] {
            ft_err = ft_err.max((z - exact).norm());
        }
    }
    outcome(
        zero_max <= FLOOR && diff <= FLOOR && ft_err <= 1e-6,
        format!(
            "V = 0 far field {zero_max:.1e}, equal-potential difference {diff:.1e} (floor {FLOOR:.0e}, far-field scale {scale:.2e}); Gaussian transform error {ft_err:.1e} (limit 1e-6)"
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("conjugation identity", conjugation),
        ("integration-by-parts identity", identity),
        ("weighted inequality sweep", carleman),
        ("geometry gate", geometry),
        ("characteristic data law", data_law),
        ("trace recovery", recovery),
        ("stability ensemble", stability),
        ("solver order", solver_order),
        ("h(s) decay", decay),
        ("energy estimates", energy),
        ("frequency bridge", bridge),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {tag} {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
