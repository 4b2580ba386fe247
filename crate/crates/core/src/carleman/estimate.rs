//! Both sides of the weighted estimate
//! `s int_Q e^{2s phi}(|grad v|^2 + v_t^2 + s^2 v^2)
//!   <= C (int_Q e^{2s phi}|Pv|^2 + s int_Sigma e^{2s phi}(..) + s int_{t=T} e^{2s phi}(..))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::apply_p;
use super::testfn::TestFunction;
use super::weight::{eval_weight, CarlemanWeight};
use crate::error::{Error, Result};
use crate::grid::{quad_log_many, LogScaled, QuadRule, Region};
use crate::potential::Potential;

#[derive(Clone, Debug, Default)]
pub struct SidesOptions {
    /// Replace `Pv` by `Pv + Vv`.
    pub potential: Option<Potential>,
    /// Largest tolerated growth of `e^{2s phi}` across one node spacing.
    pub max_cell_factor: f64,
}

impl SidesOptions {
    pub fn new() -> Self {
        Self {
            potential: None,
            max_cell_factor: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidesEntry {
    pub function: usize,
    pub label: String,
    pub s: f64,
    pub lhs: LogScaled,
    pub rhs_volume: LogScaled,
    pub rhs_sigma: LogScaled,
    pub rhs_top: LogScaled,
    /// Weighted `int_Q e^{2s phi} v^2`, for the potential variant bound.
    pub weighted_l2: LogScaled,
    pub ratio: Option<f64>,
    pub under_resolved: bool,
    /// Largest `|grad_{x,t} 2 s phi| * spacing` over the nodes of `Q`.
    pub cell_log_growth: f64,
}

impl SidesEntry {
    pub fn rhs(&self) -> LogScaled {
        self.rhs_volume.add(self.rhs_sigma).add(self.rhs_top)
    }
}

fn energy_density(j: &super::jet::Jet2, s: f64, n: usize) -> f64 {
    j.grad_sq(n) + j.dt() * j.dt() + s * s * j.v * j.v
}

pub fn carleman_sides<R: QuadRule + ?Sized>(
    v: &TestFunction,
    wt: &CarlemanWeight,
    rule: &R,
    opts: &SidesOptions,
) -> Result<SidesEntry> {
    let n = rule.dim();
    if v.n != n {
        return Err(Error::Invalid(format!(
            "test function dimension {} does not match rule dimension {n}",
            v.n
        )));
    }
    let s = wt.s;
    let h = rule.spacing();
    let mut growth: f64 = 0.0;
    let [lhs, vol, l2] = quad_log_many(rule, Region::Q, |p| {
        let w = eval_weight(wt, n, &p.x, p.t);
        let gphi: f64 = (0..n).map(|i| w.dphi[i] * w.dphi[i]).sum::<f64>() + w.phi_t().powi(2);
        growth = growth.max(2.0 * s * gphi.sqrt() * h);
        let j = v.jet(&p.x, p.t);
        let mut pv = apply_p(&j, n);
        if let Some(pot) = &opts.potential {
            pv += pot.eval(&p.x) * j.v;
        }
        (
            2.0 * s * w.phi,
            [s * energy_density(&j, s, n), pv * pv, j.v * j.v],
        )
    })?;
    let [sigma] = quad_log_many(rule, Region::Sigma, |p| {
        let j = v.jet(&p.x, p.t);
        (
            2.0 * s * wt.phi(n, &p.x, p.t),
            [s * energy_density(&j, s, n)],
        )
    })?;
    let [top] = quad_log_many(rule, Region::Top, |p| {
        let j = v.jet(&p.x, p.t);
        (
            2.0 * s * wt.phi(n, &p.x, p.t),
            [s * energy_density(&j, s, n)],
        )
    })?;
    let mut entry = SidesEntry {
        function: 0,
        label: v.label.clone(),
        s,
        lhs,
        rhs_volume: vol,
        rhs_sigma: sigma,
        rhs_top: top,
        weighted_l2: l2,
        ratio: None,
        under_resolved: growth > opts.max_cell_factor.ln(),
        cell_log_growth: growth,
    };
    let rhs = entry.rhs();
    if rhs.is_zero() {
        if !lhs.is_zero() {
            return Err(Error::ZeroRhs { lhs: lhs.value() });
        }
    } else {
        entry.ratio = Some(lhs.ratio(&rhs));
    }
    Ok(entry)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub entries: Vec<SidesEntry>,
    pub s_values: Vec<f64>,
    /// Largest ratio over the suite at each `s`; `None` when every entry was skipped.
    pub per_s_max: Vec<Option<f64>>,
    /// Largest ratio over everything: the empirical constant.
    pub c_emp: Option<f64>,
    /// `max / min` of the per-`s` maxima.
    pub spread: Option<f64>,
    pub skipped: usize,
    pub under_resolved: usize,
}

impl EstimateReport {
    /// Uniform-constant property: the per-`s` maxima vary by at most `factor`.
    pub fn uniform_within(&self, factor: f64) -> bool {
        matches!(self.spread, Some(sp) if sp <= factor)
    }
}

pub fn carleman_sweep<R: QuadRule + ?Sized>(
    suite: &[TestFunction],
    template: &CarlemanWeight,
    s_values: &[f64],
    rule: &R,
    opts: &SidesOptions,
) -> Result<EstimateReport> {
    if s_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("s values must be strictly ascending".into()));
    }
    for &s in s_values {
        let top = 2.0 * s * template.phi_max();
        if !(top < 1e12) {
            return Err(Error::Overflow(top));
        }
    }
    let jobs: Vec<(usize, f64)> = s_values
        .iter()
        .flat_map(|&s| (0..suite.len()).map(move |i| (i, s)))
        .collect();
    let results: Vec<Result<SidesEntry>> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let wt = template.with_s(s)?;
            let mut e = carleman_sides(&suite[i], &wt, rule, opts)?;
            e.function = i;
            Ok(e)
        })
        .collect();
    let entries: Vec<SidesEntry> = results.into_iter().collect::<Result<_>>()?;
    let per_s_max: Vec<Option<f64>> = s_values
        .iter()
        .map(|&s| {
            entries
                .iter()
                .filter(|e| e.s == s)
                .filter_map(|e| e.ratio)
                .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
        })
        .collect();
    let present: Vec<f64> = per_s_max.iter().flatten().cloned().collect();
    let c_emp = present
        .iter()
        .cloned()
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let spread = if present.is_empty() {
        None
    } else {
        let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = present.iter().cloned().fold(0.0, f64::max);
        Some(hi / lo)
    };
    Ok(EstimateReport {
        skipped: entries.iter().filter(|e| e.ratio.is_none()).count(),
        under_resolved: entries.iter().filter(|e| e.under_resolved).count(),
        entries,
        s_values: s_values.to_vec(),
        per_s_max,
        c_emp,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GaussRule;

    fn rule() -> GaussRule {
        GaussRule::new(2, 6.5, 24, 64, 2, 12).unwrap()
    }

    #[test]
    fn zero_function_is_skipped() {
        let r = rule();
        let rep = carleman_sweep(
            &[TestFunction::zero(2)],
            &CarlemanWeight::default(),
            &[0.5, 1.0],
            &r,
            &SidesOptions::new(),
        )
        .unwrap();
        assert_eq!(rep.skipped, 2);
        assert_eq!(rep.c_emp, None);
        assert!(rep.per_s_max.iter().all(|m| m.is_none()));
    }

    #[test]
    fn interior_bump_has_only_volume_term() {
        let r = rule();
        let v = TestFunction::interior_bump(2, [0.0, 0.0, 0.0], 3.0, 0.5);
        let e = carleman_sides(&v, &CarlemanWeight::default(), &r, &SidesOptions::new()).unwrap();
        assert!(e.rhs_sigma.value().abs() == 0.0 && e.rhs_top.value().abs() == 0.0);
        assert!(e.rhs_volume.value() > 0.0);
        assert!(e.ratio.unwrap().is_finite());
    }

    #[test]
    fn ascending_s_required() {
        let r = rule();
        let err = carleman_sweep(
            &[TestFunction::constant(2, 1.0)],
            &CarlemanWeight::default(),
            &[1.0, 0.5],
            &r,
            &SidesOptions::new(),
        );
        assert!(err.is_err());
    }
}
