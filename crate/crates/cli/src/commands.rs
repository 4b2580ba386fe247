use fixangle_core::carleman::{
    carleman_sweep, energy_sweep, h_s_decay, ibp_identity_check, EnergyEntry, SidesOptions, ZInput,
};
use fixangle_core::experiments::{
    characteristic_data_check, ensemble_pairs, run_stability, run_trace_recovery, StabilitySpec,
};
use fixangle_core::freqbridge::{far_field, plane_directions, time_to_frequency};
use fixangle_core::grid::LogScaled;
use fixangle_core::wavesolver::{calibrate_sponge, h1_sigma_norm, solve_scattered};
use fixangle_core::{Error, GridRule, QuadRule, SolverConfig, TestFunction};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Command, ExperimentConfig, Quadrature};
use crate::output::{num, opt, svg_chart, Output};
use crate::CliError;

/// Solver failures are runtime errors except the ones that are verdicts.
fn core_err(e: Error) -> CliError {
    match e {
        Error::SpongeReflection { .. } | Error::ZeroRhs { .. } | Error::NonMonotone { .. } => {
            CliError::Check(e.to_string())
        }
        _ => CliError::Runtime(e.to_string()),
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    cfg.validate(cmd)?;
    let out = Output::new(cfg, cmd.name())?;
    match cmd {
        Command::GenPotential => gen_potential(cfg, &out),
        Command::Solve => solve(cfg, &out),
        Command::Stability => stability(cfg, &out),
        Command::CarlemanVerify => carleman_verify(cfg, &out),
        Command::IbpCheck => ibp_check(cfg, &out),
        Command::EnergyCheck => energy_check(cfg, &out),
        Command::RecoverTrace => recover_trace(cfg, &out),
        Command::HsDecay => hs_decay(cfg, &out),
        Command::Farfield => farfield(cfg, &out),
        Command::Report => report(&out),
    }
}

fn coords(n: usize, x: &[f64; 3]) -> Vec<String> {
    x[..n].iter().map(|v| num(*v)).collect()
}

fn coord_names(n: usize) -> Vec<String> {
    (0..n).map(|a| format!("x{a}")).collect()
}

fn with_coords<'a>(n: usize, tail: &[&'a str]) -> Vec<String> {
    let mut c = coord_names(n);
    c.extend(tail.iter().map(|s| s.to_string()));
    c
}

fn csv_cols(cols: &[String]) -> Vec<&str> {
    cols.iter().map(String::as_str).collect()
}

fn gen_potential(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let grid = cfg.build_grid()?;
    let v = cfg.potential()?;
    let ensemble = cfg.ensemble.generate(cfg.grid.n).map_err(core_err)?;
    let n = grid.n;
    let mut rows = Vec::new();
    for node in grid.ball_nodes() {
        let x = grid.coord(node.index);
        let datum = v.characteristic_datum(&x).map_err(core_err)?;
        let mut r = coords(n, &x);
        r.extend([num(v.eval(&x)), num(datum), num(node.weight)]);
        rows.push(r);
    }
    let cols = with_coords(n, &["v", "datum", "weight"]);
    out.csv("potential.csv", &csv_cols(&cols), rows)?;
    out.json(
        "potentials.json",
        &json!({
            "potential": v,
            "l2_norm": v.l2_norm_b(&grid),
            "ensemble": ensemble,
        }),
    )?;
    Ok(vec![format!(
        "potential {} and {} ensemble members written",
        v.id,
        ensemble.len()
    )])
}

fn solve(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let grid = cfg.build_grid()?;
    let v = cfg.potential()?;
    let mut lines = Vec::new();
    let calibration = if cfg.solve.calibrate {
        let c = calibrate_sponge(&v, &cfg.grid, &cfg.solver).map_err(core_err)?;
        lines.push(format!(
            "edge reflection {:.3e} (threshold {:.3e})",
            c.reflection, c.threshold
        ));
        Some(c)
    } else {
        None
    };
    let solver = SolverConfig {
        keep_field: false,
        ..cfg.solver.clone()
    };
    let wf = solve_scattered(&v, &grid, &solver).map_err(core_err)?;
    let tr = &wf.trace;
    let n = grid.n;
    let every = cfg.solve.sigma_every;
    let mut rows = Vec::new();
    for (l, level) in tr.sigma.iter().enumerate().step_by(every) {
        let t = tr.sigma_t0 + l as f64 * tr.dt;
        for (j, s) in level.iter().enumerate() {
            let p = &tr.sigma_points[j];
            let dn: f64 = (0..n).map(|a| s.grad[a] * p[a]).sum();
            let mut r = vec![num(t), j.to_string()];
            r.extend(coords(n, p));
            r.extend([num(s.u), num(s.ut), num(dn)]);
            rows.push(r);
        }
    }
    let mut cols = vec!["t".to_string(), "point".to_string()];
    cols.extend(with_coords(n, &["u", "u_t", "d_nu_u"]));
    out.csv("sigma.csv", &csv_cols(&cols), rows)?;

    let mut rows = Vec::new();
    for (i, node) in tr.gamma_nodes.iter().enumerate() {
        let mut r = coords(n, &node.x);
        r.push(num(node.weight));
        r.push(num(v.characteristic_datum(&node.x).map_err(core_err)?));
        let f = tr.front[i];
        r.push(opt(f.map(|f| f.value)));
        r.push(opt(f.map(|f| f.char_deriv)));
        for g in &tr.gamma {
            r.push(opt(g.samples[i].map(|s| s.u)));
        }
        rows.push(r);
    }
    let mut cols = with_coords(n, &["weight", "datum", "front_value", "char_deriv"]);
    cols.extend(tr.gamma.iter().map(|g| format!("u_offset_{}", g.offset)));
    out.csv("gamma.csv", &csv_cols(&cols), rows)?;

    let laws: Vec<_> = tr
        .gamma
        .iter()
        .map(|g| characteristic_data_check(&wf, &v, g.offset))
        .collect::<Result<_, _>>()
        .map_err(core_err)?;
    let h1 = h1_sigma_norm(tr);
    out.json(
        "solve.json",
        &json!({
            "potential": v.id,
            "eps": wf.eps,
            "max_abs": wf.max_abs,
            "h1_sigma": h1,
            "data_law": laws,
            "calibration": calibration,
        }),
    )?;
    lines.push(format!(
        "eps {:.4e}, max |u_s| {:.4e}, H1(Sigma) {:.4e}",
        wf.eps, wf.max_abs, h1
    ));
    for l in &laws {
        lines.push(format!(
            "offset {} eps: max rel {:.3e}; front fit max rel {:.3e}",
            l.offset, l.max_rel, l.front_max_rel
        ));
    }
    Ok(lines)
}

fn stability(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let s = &cfg.stability;
    let spec = StabilitySpec {
        exclude_fraction: s.exclude_fraction,
        floor: s.floor,
    };
    let pairs = ensemble_pairs(&cfg.ensemble, cfg.grid.n, s.pairs).map_err(core_err)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut lines = Vec::new();
    let mut failure = None;
    for &t in &s.t_values {
        let grid = cfg.grid_with_t(t)?;
        let rep = run_stability(&pairs, &grid, &cfg.solver, &spec).map_err(core_err)?;
        for r in &rep.records {
            rows.push(vec![
                num(t),
                r.v1.clone(),
                r.v2.clone(),
                num(r.dv_l2),
                num(r.w_h1),
                opt(r.ratio),
                r.skipped.clone().unwrap_or_default(),
            ]);
            if r.skipped.is_none() && !r.ratio.is_some_and(f64::is_finite) {
                failure = Some(format!(
                    "T = {t}: pair {} / {} has no finite ratio",
                    r.v1, r.v2
                ));
            }
        }
        match rep.c_emp {
            Some(c) => lines.push(format!(
                "T = {t}: C_emp {c:.4e}, spread {:.3}",
                rep.spread.unwrap_or(f64::NAN)
            )),
            None => failure = Some(format!("T = {t}: every pair was skipped")),
        }
        reports.push(rep);
    }
    out.csv(
        "stability.csv",
        &["t_end", "v1", "v2", "dv_l2", "w_h1", "ratio", "skipped"],
        rows,
    )?;
    out.json("stability.json", &reports)?;
    match failure {
        Some(f) => Err(CliError::Check(f)),
        None => Ok(lines),
    }
}

fn ln_cols(x: &LogScaled) -> [String; 2] {
    [num(x.ln_abs()), num(x.value())]
}

fn carleman_verify(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let c = &cfg.carleman;
    let suite = TestFunction::suite(cfg.grid.n, c.suite_size, c.suite_seed, c.cutoff);
    let wt = cfg.weight()?;
    let opts = SidesOptions::new();
    let rep = match c.quadrature {
        Quadrature::Gauss => carleman_sweep(&suite, &wt, &c.s_values, &cfg.gauss_rule()?, &opts),
        Quadrature::Grid => {
            let grid = cfg.build_grid()?;
            carleman_sweep(&suite, &wt, &c.s_values, &GridRule::new(&grid), &opts)
        }
    }
    .map_err(core_err)?;
    let rows = rep.entries.iter().map(|e| {
        let mut r = vec![e.function.to_string(), e.label.clone(), num(e.s)];
        for x in [&e.lhs, &e.rhs_volume, &e.rhs_sigma, &e.rhs_top, &e.rhs()] {
            r.extend(ln_cols(x));
        }
        r.extend([opt(e.ratio), e.under_resolved.to_string()]);
        r
    });
    out.csv(
        "carleman.csv",
        &[
            "function",
            "label",
            "s",
            "ln_lhs",
            "lhs",
            "ln_rhs_volume",
            "rhs_volume",
            "ln_rhs_sigma",
            "rhs_sigma",
            "ln_rhs_top",
            "rhs_top",
            "ln_rhs",
            "rhs",
            "ratio",
            "under_resolved",
        ],
        rows,
    )?;
    out.json("carleman.json", &rep)?;
    let series: Vec<(f64, f64)> = rep
        .s_values
        .iter()
        .zip(&rep.per_s_max)
        .filter_map(|(s, m)| m.map(|m| (*s, m)))
        .collect();
    out.text(
        "carleman.svg",
        &svg_chart("max LHS/RHS per s", "s", &[("max ratio", series)], true),
    )?;
    let mut lines: Vec<String> = rep
        .s_values
        .iter()
        .zip(&rep.per_s_max)
        .map(|(s, m)| {
            format!(
                "s = {s}: max ratio {}",
                m.map_or("none".into(), |m| format!("{m:.4e}"))
            )
        })
        .collect();
    lines.push(format!(
        "under-resolved entries {}, skipped {}",
        rep.under_resolved, rep.skipped
    ));
    if rep.per_s_max.iter().any(Option::is_none) {
        return Err(CliError::Check("some s has no usable ratio".into()));
    }
    match rep.spread {
        Some(sp) if sp <= c.spread_limit => {
            lines.push(format!("spread {sp:.3} within {}", c.spread_limit));
            Ok(lines)
        }
        sp => {
            for l in &lines {
                eprintln!("{l}");
            }
            Err(CliError::Check(format!(
                "spread {sp:?} exceeds {}",
                c.spread_limit
            )))
        }
    }
}

fn identity_rows<R: QuadRule + ?Sized>(
    cfg: &ExperimentConfig,
    rule: &R,
) -> Result<Vec<(String, fixangle_core::carleman::IdentityResidual)>, CliError> {
    let c = &cfg.carleman;
    let wt = cfg.weight()?.with_s(c.identity_s).map_err(core_err)?;
    let suite = TestFunction::suite(cfg.grid.n, c.identity_suite, c.suite_seed, c.cutoff);
    suite
        .par_iter()
        .map(|f| ibp_identity_check(f, &wt, rule, ZInput::Direct).map(|r| (f.label.clone(), r)))
        .collect::<Result<_, _>>()
        .map_err(core_err)
}

fn ibp_check(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let c = &cfg.carleman;
    let res = match c.quadrature {
        Quadrature::Gauss => identity_rows(cfg, &cfg.gauss_rule()?)?,
        Quadrature::Grid => {
            let grid = cfg.build_grid()?;
            identity_rows(cfg, &GridRule::new(&grid))?
        }
    };
    let rows = res.iter().map(|(label, r)| {
        vec![
            label.clone(),
            num(r.lhs),
            num(r.j1),
            num(r.j2),
            num(r.j3),
            num(r.b0),
            num(r.d0_printed),
            num(r.d0_corrected),
            num(r.residual_printed),
            num(r.residual_corrected),
            r.under_resolved.to_string(),
        ]
    });
    out.csv(
        "ibp.csv",
        &[
            "label",
            "lhs",
            "j1",
            "j2",
            "j3",
            "b0",
            "d0_printed",
            "d0_corrected",
            "residual_printed",
            "residual_corrected",
            "under_resolved",
        ],
        rows,
    )?;
    let worst = res
        .iter()
        .map(|(_, r)| r.residual_corrected)
        .fold(0.0, f64::max);
    let worst_printed = res
        .iter()
        .map(|(_, r)| r.residual_printed)
        .fold(0.0, f64::max);
    out.json(
        "ibp.json",
        &json!({
            "max_residual_corrected": worst,
            "max_residual_printed": worst_printed,
            "entries": res.iter().map(|(_, r)| r).collect::<Vec<_>>(),
        }),
    )?;
    let line = format!(
        "max relative residual {worst:.3e} (boundary term as printed: {worst_printed:.3e})"
    );
    if worst <= c.identity_tolerance {
        Ok(vec![line])
    } else {
        Err(CliError::Check(format!(
            "{line} above {}",
            c.identity_tolerance
        )))
    }
}

fn energy_rows(kind: &str, entries: &[EnergyEntry]) -> Vec<Vec<String>> {
    entries
        .iter()
        .map(|e| {
            let mut r = vec![kind.to_string(), e.label.clone()];
            r.extend(ln_cols(&e.lhs));
            r.extend(ln_cols(&e.rhs));
            r.push(opt(e.ratio));
            r
        })
        .collect()
}

fn energy_check(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let c = &cfg.carleman;
    let suite = TestFunction::suite(cfg.grid.n, c.suite_size, c.suite_seed, c.cutoff);
    let wt = cfg.weight()?;
    let sweep = match c.quadrature {
        Quadrature::Gauss => energy_sweep(&suite, &wt, &cfg.gauss_rule()?, c.tau),
        Quadrature::Grid => {
            let grid = cfg.build_grid()?;
            energy_sweep(&suite, &wt, &GridRule::new(&grid), c.tau)
        }
    }
    .map_err(core_err)?;
    let mut rows = energy_rows("slice", &sweep.slice);
    rows.extend(energy_rows("characteristic", &sweep.characteristic));
    out.csv(
        "energy.csv",
        &["kind", "label", "ln_lhs", "lhs", "ln_rhs", "rhs", "ratio"],
        rows,
    )?;
    out.json("energy.json", &sweep)?;
    let bad = sweep
        .slice
        .iter()
        .chain(&sweep.characteristic)
        .find(|e| !e.lhs.is_zero() && !e.ratio.is_some_and(f64::is_finite));
    let line = format!(
        "max slice ratio {}, max characteristic ratio {}",
        opt(sweep.max_slice),
        opt(sweep.max_characteristic)
    );
    match bad {
        Some(e) => Err(CliError::Check(format!(
            "{line}; {} has no finite ratio",
            e.label
        ))),
        None => Ok(vec![line]),
    }
}

fn recover_trace(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let grid = cfg.build_grid()?;
    let v1 = cfg.potential()?;
    let v2 = cfg.compare_potential()?;
    let rec = run_trace_recovery(&v1, &v2, &grid, &cfg.solver).map_err(core_err)?;
    let n = grid.n;
    let rows = rec.nodes.iter().map(|r| {
        let mut row = coords(n, &r.x);
        row.extend([num(r.weight), num(r.dv_true), num(r.dv_rec), opt(r.dv_alt)]);
        row
    });
    let cols = with_coords(n, &["weight", "dv_true", "dv_rec", "dv_alt"]);
    out.csv("recovery.csv", &csv_cols(&cols), rows)?;
    out.json(
        "recovery.json",
        &json!({
            "v1": v1.id,
            "v2": v2.id,
            "dv_l2": rec.dv_l2,
            "abs_l2": rec.abs_l2,
            "rel_l2": rec.rel_l2,
            "alt_rel_l2": rec.alt_rel_l2,
            "alt_vs_rec": rec.alt_vs_rec,
        }),
    )?;
    let tol = cfg.recovery.tolerance;
    match rec.rel_l2 {
        Some(e) if e <= tol => Ok(vec![format!("relative L2 error {e:.4e} (tolerance {tol})")]),
        Some(e) => Err(CliError::Check(format!(
            "relative L2 error {e:.4e} above {tol}"
        ))),
        None => Ok(vec![format!(
            "potentials agree; absolute L2 error {:.4e}",
            rec.abs_l2
        )]),
    }
}

fn hs_decay(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let d = &cfg.hs_decay;
    let wt = cfg.weight()?;
    let rep = h_s_decay(&wt, &d.s_values, d.resolution).map_err(core_err)?;
    let rows = rep
        .s_values
        .iter()
        .zip(&rep.values)
        .zip(&rep.argmax)
        .map(|((s, v), (rho, xn))| vec![num(*s), num(*v), num(*rho), num(*xn)]);
    out.csv("hs_decay.csv", &["s", "h", "argmax_rho", "argmax_xn"], rows)?;
    out.json("hs_decay.json", &rep)?;
    let series = rep
        .s_values
        .iter()
        .copied()
        .zip(rep.values.iter().copied())
        .collect();
    out.text(
        "hs_decay.svg",
        &svg_chart("h(s)", "s", &[("h", series)], true),
    )?;
    let first = rep.values.first().copied().unwrap_or(f64::NAN);
    let last = rep.values.last().copied().unwrap_or(f64::NAN);
    let line = format!(
        "h({}) / h({}) = {:.4}",
        d.s_values[d.s_values.len() - 1],
        d.s_values[0],
        last / first
    );
    if rep.strictly_decreasing {
        Ok(vec![line])
    } else {
        Err(CliError::Check(format!(
            "{line}; not decreasing at index {:?}",
            rep.first_violation
        )))
    }
}

fn farfield(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let grid = cfg.build_grid()?;
    let v1 = cfg.potential()?;
    let v2 = cfg.compare_potential()?;
    let f = &cfg.farfield;
    let solver = SolverConfig {
        keep_field: false,
        ..cfg.solver.clone()
    };
    let fields: Vec<_> = [&v1, &v2]
        .par_iter()
        .map(|v| solve_scattered(v, &grid, &solver))
        .collect::<Result<_, _>>()
        .map_err(core_err)?;
    let dirs = plane_directions(grid.n, &f.thetas);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut lines = Vec::new();
    let fts: Vec<_> = fields
        .iter()
        .map(|w| time_to_frequency(&w.trace, &f.ks, &f.window))
        .collect::<Result<_, _>>()
        .map_err(core_err)?;
    for &k in &f.ks {
        let a = far_field(&fts[0], k, &dirs).map_err(core_err)?;
        let b = far_field(&fts[1], k, &dirs).map_err(core_err)?;
        let mut max_a: f64 = 0.0;
        let mut max_d: f64 = 0.0;
        for (i, th) in f.thetas.iter().enumerate() {
            let d = a[i] - b[i];
            max_a = max_a.max(a[i].norm());
            max_d = max_d.max(d.norm());
            rows.push(vec![
                num(k),
                num(*th),
                num(a[i].re),
                num(a[i].im),
                num(b[i].re),
                num(b[i].im),
                num(d.re),
                num(d.im),
            ]);
        }
        lines.push(format!(
            "k = {k}: max |u_inf| {max_a:.4e}, max |difference| {max_d:.4e}"
        ));
        summary.push(json!({ "k": k, "max_abs": max_a, "max_diff": max_d }));
    }
    out.csv(
        "farfield.csv",
        &[
            "k", "theta", "re_v1", "im_v1", "re_v2", "im_v2", "re_diff", "im_diff",
        ],
        rows,
    )?;
    out.json(
        "farfield.json",
        &json!({ "v1": v1.id, "v2": v2.id, "per_k": summary }),
    )?;
    Ok(lines)
}

/// Collects the JSON summaries already present under the output root.
fn report(out: &Output) -> Result<Vec<String>, CliError> {
    let root = out.root();
    let mut names: Vec<String> = std::fs::read_dir(root)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut md = String::from("# fixangle report\n\n");
    let mut found = 0;
    for name in names.iter().filter(|n| n.ends_with(".json")) {
        let text = std::fs::read_to_string(root.join(name))
            .map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
            continue;
        };
        found += 1;
        md.push_str(&format!("## {}\n\n", name.trim_end_matches(".json")));
        if let Some(meta) = value.get("meta").and_then(|m| m.as_array()) {
            for m in meta {
                md.push_str(&format!("- {}\n", m.as_str().unwrap_or_default()));
            }
            md.push('\n');
        }
        for (key, v) in value
            .get("result")
            .and_then(|r| r.as_object())
            .into_iter()
            .flatten()
        {
            if v.is_number() || v.is_string() || v.is_boolean() {
                md.push_str(&format!("- `{key}`: {v}\n"));
            }
        }
        let svg = name.replace(".json", ".svg");
        if names.contains(&svg) {
            md.push_str(&format!("\n![{svg}]({svg})\n"));
        }
        md.push('\n');
    }
    out.text("report.md", &md)?;
    Ok(vec![format!("report.md lists {found} result files")])
}
