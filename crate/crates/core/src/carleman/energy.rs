//! Energy estimates near `t = T` and near the characteristic `t = x_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::testfn::TestFunction;
use super::weight::CarlemanWeight;
use crate::error::{Error, Result};
use crate::grid::{quad_log_many, quad_many, LogScaled, QuadRule, Region};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEntry {
    pub label: String,
    pub lhs: LogScaled,
    pub rhs: LogScaled,
    /// `None` for a vanishing pair.
    pub ratio: Option<f64>,
}

fn finish(label: &str, lhs: LogScaled, rhs: LogScaled) -> Result<EnergyEntry> {
    let ratio = if rhs.is_zero() {
        if !lhs.is_zero() {
            return Err(Error::ZeroRhs { lhs: lhs.value() });
        }
        None
    } else {
        Some(lhs.ratio(&rhs))
    };
    Ok(EnergyEntry {
        label: label.to_string(),
        lhs,
        rhs,
        ratio,
    })
}

fn check_dim<R: QuadRule + ?Sized>(v: &TestFunction, rule: &R) -> Result<usize> {
    if v.n != rule.dim() {
        return Err(Error::Invalid(format!(
            "test function dimension {} does not match rule dimension {}",
            v.n,
            rule.dim()
        )));
    }
    Ok(v.n)
}

/// Slice energy `int_B (|grad v|^2 + v_t^2 + v^2)(x, tau)` against the same
/// energy on `Gamma` plus `int_Q |Pv|^2` plus the energy on `Sigma`.
pub fn energy_check_t<R: QuadRule + ?Sized>(
    v: &TestFunction,
    rule: &R,
    tau: f64,
) -> Result<EnergyEntry> {
    let n = check_dim(v, rule)?;
    if !(tau >= 1.0 && tau <= rule.t_end()) {
        return Err(Error::Invalid(format!(
            "slice time {tau} must lie in [1, T]"
        )));
    }
    let e = |p: &crate::grid::QPoint| {
        let j = v.jet(&p.x, p.t);
        [j.grad_sq(n) + j.dt() * j.dt() + j.v * j.v]
    };
    let [lhs] = quad_many(rule, Region::Slice(tau), e)?;
    let [gamma] = quad_many(rule, Region::Gamma, e)?;
    let [sigma] = quad_many(rule, Region::Sigma, e)?;
    let [vol] = quad_many(rule, Region::Q, |p| {
        let w = v.jet(&p.x, p.t).wave(n);
        [w * w]
    })?;
    finish(
        &v.label,
        LogScaled::from_value(lhs),
        LogScaled::from_value(gamma + sigma + vol),
    )
}

/// Weighted `Gamma` energy against `s int_Q e^{2s phi}(|grad v|^2 + v_t^2 + s^2 v^2)`,
/// `int_Q e^{2s phi}|Pv|^2`, `s int_Sigma e^{2s phi}(|grad v|^2 + s^2 v^2)` and
/// `int_Sigma e^{2s phi}|d_nu v|^2`.
pub fn energy_check_char<R: QuadRule + ?Sized>(
    v: &TestFunction,
    wt: &CarlemanWeight,
    rule: &R,
) -> Result<EnergyEntry> {
    let n = check_dim(v, rule)?;
    let s = wt.s;
    let [lhs] = quad_log_many(rule, Region::Gamma, |p| {
        let j = v.jet(&p.x, p.t);
        (
            2.0 * s * wt.phi(n, &p.x, p.t),
            [j.grad_sq(n) + j.dt() * j.dt() + s * s * j.v * j.v],
        )
    })?;
    let [vol, pv] = quad_log_many(rule, Region::Q, |p| {
        let j = v.jet(&p.x, p.t);
        let w = j.wave(n);
        (
            2.0 * s * wt.phi(n, &p.x, p.t),
            [
                s * (j.grad_sq(n) + j.dt() * j.dt() + s * s * j.v * j.v),
                w * w,
            ],
        )
    })?;
    let [side, normal] = quad_log_many(rule, Region::Sigma, |p| {
        let j = v.jet(&p.x, p.t);
        let dn: f64 = (0..n).map(|i| j.d[i] * p.normal[i]).sum();
        (
            2.0 * s * wt.phi(n, &p.x, p.t),
            [s * (j.grad_sq(n) + s * s * j.v * j.v), dn * dn],
        )
    })?;
    finish(&v.label, lhs, vol.add(pv).add(side).add(normal))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySweep {
    pub slice: Vec<EnergyEntry>,
    pub characteristic: Vec<EnergyEntry>,
    pub max_slice: Option<f64>,
    pub max_characteristic: Option<f64>,
}

fn max_ratio(e: &[EnergyEntry]) -> Option<f64> {
    e.iter()
        .filter_map(|e| e.ratio)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
}

/// Both checks over a suite; the slice check runs at `tau`.
pub fn energy_sweep<R: QuadRule + ?Sized>(
    suite: &[TestFunction],
    wt: &CarlemanWeight,
    rule: &R,
    tau: f64,
) -> Result<EnergySweep> {
    let slice: Vec<EnergyEntry> = suite
        .par_iter()
        .map(|v| energy_check_t(v, rule, tau))
        .collect::<Result<_>>()?;
    let characteristic: Vec<EnergyEntry> = suite
        .par_iter()
        .map(|v| energy_check_char(v, wt, rule))
        .collect::<Result<_>>()?;
    Ok(EnergySweep {
        max_slice: max_ratio(&slice),
        max_characteristic: max_ratio(&characteristic),
        slice,
        characteristic,
    })
}
