//! End-to-end studies on solved fields: the stability ratio over potential
//! ensembles, recovery of `V_1 - V_2` on the characteristic surface, the
//! characteristic-data law and determinism checks.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::potential::{EnsembleSpec, Potential};
use crate::wavesolver::{
    h1_sigma_norm, solve_scattered, BoundaryTrace, SolverConfig, TraceSample, WaveField,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    /// Pairs with `||V_1 - V_2||` below this fraction of the largest
    /// `||V_i||` in the ensemble are skipped.
    pub exclude_fraction: f64,
    /// Absolute floor for `||w||_{H^1(Sigma)}`.
    pub floor: f64,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            exclude_fraction: 1e-3,
            floor: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub v1: String,
    pub v2: String,
    pub dv_l2: f64,
    pub w_h1: f64,
    pub ratio: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub records: Vec<PairRecord>,
    /// Largest recorded ratio.
    pub c_emp: Option<f64>,
    pub min_ratio: Option<f64>,
    /// `max / min` over recorded ratios.
    pub spread: Option<f64>,
    pub h: f64,
    pub eps: f64,
    pub t_end: f64,
}

/// Consecutive potentials of a seeded ensemble paired up.
pub fn ensemble_pairs(
    spec: &EnsembleSpec,
    n: usize,
    pairs: usize,
) -> Result<Vec<(Potential, Potential)>> {
    let all = EnsembleSpec {
        count: 2 * pairs,
        ..spec.clone()
    }
    .generate(n)?;
    Ok(all
        .chunks(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect())
}

/// Solves every distinct potential once, in parallel. Returns the fields
/// and, per input, the index of its field.
fn solve_all(
    pots: &[&Potential],
    grid: &SpaceTimeGrid,
    solver: &SolverConfig,
) -> Result<(Vec<WaveField>, Vec<usize>)> {
    let mut distinct: Vec<&Potential> = Vec::new();
    let mut which = Vec::with_capacity(pots.len());
    for p in pots {
        let slot = match distinct
            .iter()
            .position(|q| q.n == p.n && q.bumps == p.bumps)
        {
            Some(i) => i,
            None => {
                distinct.push(p);
                distinct.len() - 1
            }
        };
        which.push(slot);
    }
    let quiet = SolverConfig {
        keep_field: false,
        ..solver.clone()
    };
    let solved = distinct
        .par_iter()
        .map(|p| solve_scattered(p, grid, &quiet))
        .collect::<Result<_>>()?;
    Ok((solved, which))
}

pub fn run_stability(
    pairs: &[(Potential, Potential)],
    grid: &SpaceTimeGrid,
    solver: &SolverConfig,
    spec: &StabilitySpec,
) -> Result<StabilityReport> {
    if grid.t_end <= 6.0 {
        return Err(Error::Invalid(format!(
            "stability needs T > 6, got {}",
            grid.t_end
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Invalid("no pairs".into()));
    }
    let flat: Vec<&Potential> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
    let (fields, which) = solve_all(&flat, grid, solver)?;
    let scale = flat.iter().map(|p| p.l2_norm_b(grid)).fold(0.0, f64::max);
    let mut records = Vec::with_capacity(pairs.len());
    for (i, (a, b)) in pairs.iter().enumerate() {
        let dv_l2 = a.difference(b)?.l2_norm_b(grid);
        let w = fields[which[2 * i]]
            .trace
            .difference(&fields[which[2 * i + 1]].trace)?;
        let w_h1 = h1_sigma_norm(&w);
        let skipped = if dv_l2 <= spec.exclude_fraction * scale {
            Some(format!(
                "potential difference {dv_l2:.3e} below {} of ensemble scale {scale:.3e}",
                spec.exclude_fraction
            ))
        } else if w_h1 <= spec.floor {
            Some(format!("trace difference {w_h1:.3e} at the solver floor"))
        } else {
            None
        };
        let ratio = skipped.is_none().then(|| dv_l2 / w_h1);
        records.push(PairRecord {
            v1: a.id.clone(),
            v2: b.id.clone(),
            dv_l2,
            w_h1,
            ratio,
            skipped,
        });
    }
    let ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio).collect();
    let c_emp = ratios.iter().cloned().reduce(f64::max);
    let min_ratio = ratios.iter().cloned().reduce(f64::min);
    Ok(StabilityReport {
        spread: c_emp.zip(min_ratio).map(|(a, b)| a / b),
        records,
        c_emp,
        min_ratio,
        h: grid.h,
        eps: solver.eps(grid),
        t_end: grid.t_end,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredNode {
    pub x: [f64; 3],
    pub weight: f64,
    pub dv_true: f64,
    /// `-2 (d_n + d_t) w` at `t = x_n`.
    pub dv_rec: f64,
    /// `-2 d/dx_n` of the recovered jump `w(x, x_n+)`.
    pub dv_alt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecovery {
    pub nodes: Vec<RecoveredNode>,
    pub dv_l2: f64,
    pub abs_l2: f64,
    /// `None` when `V_1 = V_2`.
    pub rel_l2: Option<f64>,
    pub alt_rel_l2: Option<f64>,
    /// `||dv_alt - dv_rec|| / ||dv_rec||` over nodes where both exist.
    pub alt_vs_rec: Option<f64>,
}

fn recover_from(
    trace: &BoundaryTrace,
    v1: &Potential,
    v2: &Potential,
    grid: &SpaceTimeGrid,
) -> Result<TraceRecovery> {
    let dv = v1.difference(v2)?;
    let stride = grid.stride(grid.n - 1);
    let slot: HashMap<usize, usize> = trace
        .gamma_nodes
        .iter()
        .enumerate()
        .map(|(j, nd)| (nd.index, j))
        .collect();
    let value = |idx: usize| {
        slot.get(&idx)
            .and_then(|&j| trace.front[j])
            .map(|f| f.value)
    };
    let mut nodes = Vec::new();
    for (nd, fit) in trace.gamma_nodes.iter().zip(&trace.front) {
        if nd.weight <= 0.0 {
            continue;
        }
        let fit = fit.ok_or_else(|| Error::Solver(format!("no front fit at {:?}", nd.x)))?;
        let dv_alt = match (
            value(nd.index + stride),
            nd.index.checked_sub(stride).and_then(value),
        ) {
            (Some(up), Some(down)) => Some(-(up - down) / grid.h),
            _ => None,
        };
        nodes.push(RecoveredNode {
            x: nd.x,
            weight: nd.weight,
            dv_true: dv.eval(&nd.x),
            dv_rec: -2.0 * fit.char_deriv,
            dv_alt,
        });
    }
    let sum = |f: &dyn Fn(&RecoveredNode) -> Option<f64>| {
        nodes
            .iter()
            .filter_map(|nd| f(nd).map(|v| nd.weight * v * v))
            .sum::<f64>()
            .sqrt()
    };
    let dv_l2 = sum(&|nd| Some(nd.dv_true));
    let abs_l2 = sum(&|nd| Some(nd.dv_rec - nd.dv_true));
    let alt_abs = sum(&|nd| nd.dv_alt.map(|a| a - nd.dv_true));
    let alt_diff = sum(&|nd| nd.dv_alt.map(|a| a - nd.dv_rec));
    let rec_norm = sum(&|nd| nd.dv_alt.map(|_| nd.dv_rec));
    let nonzero = dv_l2 > 0.0;
    Ok(TraceRecovery {
        rel_l2: nonzero.then(|| abs_l2 / dv_l2),
        alt_rel_l2: nonzero.then(|| alt_abs / dv_l2),
        alt_vs_rec: (rec_norm > 0.0).then(|| alt_diff / rec_norm),
        nodes,
        dv_l2,
        abs_l2,
    })
}

/// Recovers `V_1 - V_2` on the ball from the difference field at `t = x_n`.
pub fn run_trace_recovery(
    v1: &Potential,
    v2: &Potential,
    grid: &SpaceTimeGrid,
    solver: &SolverConfig,
) -> Result<TraceRecovery> {
    let (fields, which) = solve_all(&[v1, v2], grid, solver)?;
    let w = fields[which[0]].trace.difference(&fields[which[1]].trace)?;
    recover_from(&w, v1, v2, grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataLawReport {
    pub offset: f64,
    /// Nodes in the ball where `|datum|` exceeds 10% of its max.
    pub count: usize,
    pub max_rel: f64,
    pub l2_rel: f64,
    /// Same comparison for the fitted jump `u(x, x_n+)`.
    pub front_max_rel: f64,
    pub front_l2_rel: f64,
    /// Relative change of the trace from offset 4 to 8.
    pub settling_change: Option<f64>,
}

/// Compares `u_s(x, x_n + offset eps)` with `-1/2 int V` on ball nodes.
pub fn characteristic_data_check(
    field: &WaveField,
    v: &Potential,
    offset: f64,
) -> Result<DataLawReport> {
    let tr = &field.trace;
    let g = tr.offset(offset)?;
    let data: Vec<f64> = tr
        .gamma_nodes
        .iter()
        .map(|nd| v.characteristic_datum(&nd.x))
        .collect::<Result<_>>()?;
    let dmax = tr
        .gamma_nodes
        .iter()
        .zip(&data)
        .filter(|(nd, _)| nd.weight > 0.0)
        .map(|(_, d)| d.abs())
        .fold(0.0, f64::max);
    if dmax == 0.0 {
        return Err(Error::Invalid("datum vanishes on the ball".into()));
    }
    let (mut count, mut max_rel, mut num, mut den, mut fmax, mut fnum) =
        (0, 0.0f64, 0.0, 0.0, 0.0f64, 0.0);
    for ((nd, d), (s, f)) in tr
        .gamma_nodes
        .iter()
        .zip(&data)
        .zip(g.samples.iter().zip(&tr.front))
    {
        if nd.weight <= 0.0 || d.abs() <= 0.1 * dmax {
            continue;
        }
        let (Some(s), Some(f)) = (s, f) else { continue };
        count += 1;
        max_rel = max_rel.max((s.u - d).abs() / d.abs());
        fmax = fmax.max((f.value - d).abs() / d.abs());
        num += nd.weight * (s.u - d).powi(2);
        fnum += nd.weight * (f.value - d).powi(2);
        den += nd.weight * d * d;
    }
    if count == 0 {
        return Err(Error::Invalid(
            "no recorded nodes above the datum cut".into(),
        ));
    }
    let settling_change = match (tr.offset(4.0), tr.offset(8.0)) {
        (Ok(a), Ok(b)) => {
            let (mut n, mut d) = (0.0, 0.0);
            for ((nd, x), y) in tr.gamma_nodes.iter().zip(&a.samples).zip(&b.samples) {
                if let (Some(x), Some(y)) = (x, y) {
                    n += nd.weight * (x.u - y.u).powi(2);
                    d += nd.weight * y.u * y.u;
                }
            }
            (d > 0.0).then(|| (n / d).sqrt())
        }
        _ => None,
    };
    Ok(DataLawReport {
        offset,
        count,
        max_rel,
        l2_rel: (num / den).sqrt(),
        front_max_rel: fmax,
        front_l2_rel: (fnum / den).sqrt(),
        settling_change,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Largest pointwise `Sigma` difference between two identical solves.
    pub determinism_diff: f64,
    /// Relative `L^2(Sigma)` change of `u_s` when `eps` doubles.
    pub eps_rel_diff: f64,
    /// `(eps_2^2 - eps_1^2) / 2 * ||u_tt||_{L^2(Sigma)}` relative to `||u_s||`,
    /// the leading term of that change.
    pub eps_predicted: f64,
}

fn sigma_max_diff(a: &BoundaryTrace, b: &BoundaryTrace) -> Result<f64> {
    let d = a.difference(b)?;
    Ok(d.sigma
        .iter()
        .flatten()
        .map(|s| {
            s.u.abs()
                .max(s.ut.abs())
                .max(s.grad.iter().fold(0.0f64, |m, g| m.max(g.abs())))
        })
        .fold(0.0, f64::max))
}

/// `u_tt` on `Sigma` from central differences of the recorded `u_t`.
fn sigma_utt(tr: &BoundaryTrace) -> BoundaryTrace {
    let mut out = tr.clone();
    let l = tr.sigma.len();
    for k in 0..l {
        for j in 0..tr.sigma_points.len() {
            let (a, b, w) = match (k.checked_sub(1), k + 1 < l) {
                (Some(p), true) => (p, k + 1, 2.0),
                (None, true) => (k, k + 1, 1.0),
                (Some(p), false) => (p, k, 1.0),
                (None, false) => (k, k, 1.0),
            };
            let u = (tr.sigma[b][j].ut - tr.sigma[a][j].ut) / (w * tr.dt);
            out.sigma[k][j] = TraceSample {
                u,
                ..TraceSample::default()
            };
        }
    }
    out
}

/// Two identical solves agree exactly, and the `eps` dependence of the
/// `Sigma` data follows its second-order law.
pub fn run_uniqueness_sanity(
    v: &Potential,
    grid: &SpaceTimeGrid,
    solver: &SolverConfig,
) -> Result<UniquenessReport> {
    let quiet = SolverConfig {
        keep_field: false,
        ..solver.clone()
    };
    let a = solve_scattered(v, grid, &quiet)?;
    let b = solve_scattered(v, grid, &quiet)?;
    let determinism_diff = sigma_max_diff(&a.trace, &b.trace)?;
    let wide = solve_scattered(
        v,
        grid,
        &SolverConfig {
            eps_factor: 2.0 * quiet.eps_factor,
            ..quiet.clone()
        },
    )?;
    // compare where both smeared fronts have settled; offsets count in each trace's own eps
    let diff = wide.trace.difference(&a.trace)?;
    let l2 = |t: &BoundaryTrace| {
        t.sigma_integral(quiet.settle * wide.eps / t.eps, |s| s.u * s.u)
            .sqrt()
    };
    let base = l2(&a.trace);
    let (eps_rel_diff, eps_predicted) = if base > 0.0 {
        let scale = 0.5 * (wide.eps.powi(2) - a.eps.powi(2));
        (l2(&diff) / base, scale * l2(&sigma_utt(&a.trace)) / base)
    } else {
        (0.0, 0.0)
    };
    Ok(UniquenessReport {
        determinism_diff,
        eps_rel_diff,
        eps_predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::potential::Bump;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::build(&GridConfig {
            t0: -2.5,
            ..GridConfig::default().with_h(1.0 / 16.0)
        })
        .unwrap()
    }

    fn bump() -> Potential {
        Potential::new(2, vec![Bump::new([0.1, -0.1, 0.0], 0.5, 0.8)]).unwrap()
    }

    #[test]
    fn equal_pair_is_skipped_and_zero_pair_too() {
        let g = grid();
        let v = bump();
        let pairs = vec![(v.clone(), v.clone()), (v.clone(), Potential::zero(2))];
        let r = run_stability(
            &pairs,
            &g,
            &SolverConfig::default(),
            &StabilitySpec::default(),
        )
        .unwrap();
        assert!(r.records[0].ratio.is_none() && r.records[0].skipped.is_some());
        assert_eq!(r.records[0].w_h1, 0.0);
        let ratio = r.records[1].ratio.unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        assert_eq!(r.c_emp, Some(ratio));
        assert_eq!(r.spread, Some(1.0));
    }

    #[test]
    fn short_horizon_rejected() {
        let g = SpaceTimeGrid::build(&GridConfig {
            t0: -2.5,
            t_end: 5.0,
            ..GridConfig::default().with_h(1.0 / 16.0)
        })
        .unwrap();
        let v = bump();
        assert!(run_stability(
            &[(v.clone(), v)],
            &g,
            &SolverConfig::default(),
            &StabilitySpec::default()
        )
        .is_err());
    }

    #[test]
    fn identical_potentials_recover_zero() {
        let g = grid();
        let v = bump();
        let r = run_trace_recovery(&v, &v, &g, &SolverConfig::default()).unwrap();
        assert_eq!(r.rel_l2, None);
        assert_eq!(r.abs_l2, 0.0);
        assert!(r.nodes.iter().all(|n| n.dv_rec == 0.0));
    }

    #[test]
    fn solves_are_deterministic() {
        // the doubled pulse needs an earlier start
        let g = SpaceTimeGrid::build(&GridConfig {
            t0: -3.5,
            ..GridConfig::default().with_h(1.0 / 16.0)
        })
        .unwrap();
        let r = run_uniqueness_sanity(&bump(), &g, &SolverConfig::default()).unwrap();
        assert_eq!(r.determinism_diff, 0.0);
        let z = run_uniqueness_sanity(&Potential::zero(2), &g, &SolverConfig::default()).unwrap();
        assert_eq!((z.determinism_diff, z.eps_rel_diff), (0.0, 0.0));
    }

    #[test]
    fn data_check_needs_a_datum() {
        let g = grid();
        let w = solve_scattered(&Potential::zero(2), &g, &SolverConfig::default()).unwrap();
        assert!(characteristic_data_check(&w, &Potential::zero(2), 8.0).is_err());
        let v = bump();
        let w = solve_scattered(&v, &g, &SolverConfig::default()).unwrap();
        let r = characteristic_data_check(&w, &v, 8.0).unwrap();
        assert!(r.count > 0 && r.max_rel.is_finite() && r.settling_change.is_some());
        assert!(matches!(
            characteristic_data_check(&w, &v, 5.0),
            Err(Error::OffsetNotRecorded(_))
        ));
    }
}
