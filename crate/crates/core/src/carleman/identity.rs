//! The integration-by-parts identity
//! `(P_s^+ z, P_s^- z) = J_1 + J_2 + J_3 + B_0 + D_0`
//! checked term by term by quadrature.
//!
//! `B_0` collects the lateral terms and `D_0` the nineteen terms on the top
//! slice and on `Gamma`. Three entries of the `D_0` list as usually printed
//! disagree with the divergence computation: the first `Gamma` term lacks a
//! `1/sqrt 2`, the first top term carries a spurious `1/sqrt 2`, and the
//! term written `grad z . e |phi|^2` is `|grad z|^2 grad phi . e` with the
//! opposite sign. Both variants are evaluated.

use serde::{Deserialize, Serialize};

use super::jet::Jet2;
use super::operators::{apply_ps_minus, apply_ps_plus, conjugate_jet};
use super::testfn::TestFunction;
use super::weight::{eval_weight, CarlemanWeight, WeightEval};
use crate::error::{Error, Result};
use crate::grid::{quad_many, QPoint, QuadRule, Region, TIME};

const FLOOR: f64 = 1e-300;

/// How the analytic function enters the check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZInput {
    /// The function is `z` itself.
    Direct,
    /// The function is `v` and `z = exp(s phi) v`.
    Conjugated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub b0: f64,
    pub d0_printed: f64,
    pub d0_corrected: f64,
    pub d0_terms_printed: Vec<f64>,
    pub d0_terms_corrected: Vec<f64>,
    pub rhs_printed: f64,
    pub rhs_corrected: f64,
    pub residual_printed: f64,
    pub residual_corrected: f64,
    pub under_resolved: bool,
}

fn z_jet(f: &TestFunction, input: ZInput, w: &WeightEval, s: f64, p: &QPoint) -> Result<Jet2> {
    let j = f.jet(&p.x, p.t);
    match input {
        ZInput::Direct => Ok(j),
        ZInput::Conjugated => conjugate_jet(&j, w, s),
    }
}

/// Volume integrands: `(P+ z)(P- z)`, `J_1`, `J_2`, `J_3` densities.
fn volume_terms(z: &Jet2, w: &WeightEval, s: f64, n: usize) -> [f64; 4] {
    let plus = apply_ps_plus(z, w, s, n);
    let minus = apply_ps_minus(z, w, s, n);
    // G grad z with G = diag(-1, .., -1, +1)
    let mut gz = [0.0; 4];
    let mut gp = [0.0; 4];
    for i in 0..n {
        gz[i] = -z.d[i];
        gp[i] = -w.dphi[i];
    }
    gz[TIME] = z.dt();
    gp[TIME] = w.phi_t();
    let form = |a: &[f64; 4], b: &[f64; 4]| {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += w.d2phi[i][j] * a[i] * b[j];
            }
        }
        acc
    };
    [
        plus * minus,
        2.0 * s * form(&gz, &gz),
        2.0 * s.powi(3) * z.v * z.v * form(&gp, &gp),
        -0.5 * s * z.v * z.v * w.box2_phi,
    ]
}

/// Lateral integrand of `B_0`.
fn b0_density(z: &Jet2, w: &WeightEval, s: f64, n: usize, nu: &[f64; 3]) -> f64 {
    let dot = |v: &[f64; 4]| (0..n).map(|i| v[i] * nu[i]).sum::<f64>();
    let dnz = dot(&z.d);
    let dnphi = dot(&w.dphi);
    let dna = dot(&w.grad_box_phi);
    let gzz = z.grad_sq(n);
    let gzphi = z.grad_dot(&w.dphi, n);
    let zt = z.dt();
    s * (dnphi * gzz - 2.0 * gzphi * dnz + 2.0 * w.phi_t() * zt * dnz - zt * zt * dnphi)
        + s * (z.v * dnz * w.box_phi + s * s * dnphi * z.v * z.v * w.c - 0.5 * z.v * z.v * dna)
}

/// Top-slice terms of `D_0` (measure `dx`): printed, corrected.
fn d0_top(z: &Jet2, w: &WeightEval, s: f64, n: usize) -> ([f64; 6], [f64; 6]) {
    let zt = z.dt();
    let pt = w.phi_t();
    let gzphi = z.grad_dot(&w.dphi, n);
    let z2 = z.v * z.v;
    let common = [
        2.0 * s * zt * gzphi,
        -s * zt * w.box_phi * z.v,
        0.5 * s * z2 * w.grad_box_phi[TIME],
        -s * z.grad_sq(n) * pt,
        -s.powi(3) * w.c * pt * z2,
    ];
    let printed = [
        -s / std::f64::consts::SQRT_2 * zt * zt * pt,
        common[0],
        common[1],
        common[2],
        common[3],
        common[4],
    ];
    let corrected = [
        -s * zt * zt * pt,
        common[0],
        common[1],
        common[2],
        common[3],
        common[4],
    ];
    (printed, corrected)
}

/// `Gamma` terms of `D_0` per unit surface measure `dS`: printed, corrected.
fn d0_gamma(z: &Jet2, w: &WeightEval, s: f64, n: usize) -> ([f64; 13], [f64; 13]) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let k = n - 1;
    let zt = z.dt();
    let pt = w.phi_t();
    let zn = z.d[k];
    let phin = w.dphi[k];
    let gzphi = z.grad_dot(&w.dphi, n);
    let gzz = z.grad_sq(n);
    let z2 = z.v * z.v;
    let a = w.box_phi;
    let base = [
        s * zt * zt * pt,
        -2.0 * s * r * zt * gzphi,
        -s * r * zt * zt * phin,
        s * r * zt * a * z.v,
        -0.5 * s * r * z2 * w.grad_box_phi[TIME],
        2.0 * s * r * zn * zt * pt,
        s * r * gzz * pt,
        -2.0 * s * r * zn * gzphi,
        // printed: grad z . e |phi|^2
        -s * r * zn * w.phi * w.phi,
        s * r * zn * a * z.v,
        -0.5 * s * r * z2 * w.grad_box_phi[k],
        s.powi(3) * r * w.c * pt * z2,
        s.powi(3) * r * w.c * phin * z2,
    ];
    let mut corrected = base;
    corrected[0] = s * r * zt * zt * pt;
    corrected[8] = s * r * gzz * phin;
    (base, corrected)
}

pub fn ibp_identity_check<R: QuadRule + ?Sized>(
    f: &TestFunction,
    wt: &CarlemanWeight,
    rule: &R,
    input: ZInput,
) -> Result<IdentityResidual> {
    let n = rule.dim();
    if f.n != n {
        return Err(Error::Invalid(
            "test function and rule dimensions differ".into(),
        ));
    }
    let s = wt.s;
    let h = rule.spacing();
    let mut err = None;
    let mut growth: f64 = 0.0;
    let vol = quad_many(rule, Region::Q, |p| {
        let w = eval_weight(wt, n, &p.x, p.t);
        let gphi = ((0..n).map(|i| w.dphi[i].powi(2)).sum::<f64>() + w.phi_t().powi(2)).sqrt();
        growth = growth.max(2.0 * s * gphi * h);
        match z_jet(f, input, &w, s, p) {
            Ok(z) => volume_terms(&z, &w, s, n),
            Err(e) => {
                err = Some(e);
                [0.0; 4]
            }
        }
    })?;
    let [b0] = quad_many(rule, Region::Sigma, |p| {
        let w = eval_weight(wt, n, &p.x, p.t);
        match z_jet(f, input, &w, s, p) {
            Ok(z) => [b0_density(&z, &w, s, n, &p.normal)],
            Err(e) => {
                err = Some(e);
                [0.0]
            }
        }
    })?;
    let top = quad_many(rule, Region::Top, |p| {
        let w = eval_weight(wt, n, &p.x, p.t);
        match z_jet(f, input, &w, s, p) {
            Ok(z) => {
                let (a, b) = d0_top(&z, &w, s, n);
                let mut out = [0.0; 12];
                out[..6].copy_from_slice(&a);
                out[6..].copy_from_slice(&b);
                out
            }
            Err(e) => {
                err = Some(e);
                [0.0; 12]
            }
        }
    })?;
    let gam = quad_many(rule, Region::Gamma, |p| {
        let w = eval_weight(wt, n, &p.x, p.t);
        match z_jet(f, input, &w, s, p) {
            Ok(z) => {
                let (a, b) = d0_gamma(&z, &w, s, n);
                let mut out = [0.0; 26];
                out[..13].copy_from_slice(&a);
                out[13..].copy_from_slice(&b);
                out
            }
            Err(e) => {
                err = Some(e);
                [0.0; 26]
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let d0_terms_printed: Vec<f64> = top[..6].iter().chain(&gam[..13]).cloned().collect();
    let d0_terms_corrected: Vec<f64> = top[6..].iter().chain(&gam[13..]).cloned().collect();
    let d0_printed: f64 = d0_terms_printed.iter().sum();
    let d0_corrected: f64 = d0_terms_corrected.iter().sum();
    let [lhs, j1, j2, j3] = vol;
    let rhs_printed = j1 + j2 + j3 + b0 + d0_printed;
    let rhs_corrected = j1 + j2 + j3 + b0 + d0_corrected;
    let rel = |r: f64| (lhs - r).abs() / (lhs.abs() + r.abs() + FLOOR);
    Ok(IdentityResidual {
        lhs,
        j1,
        j2,
        j3,
        b0,
        d0_printed,
        d0_corrected,
        d0_terms_printed,
        d0_terms_corrected,
        rhs_printed,
        rhs_corrected,
        residual_printed: if lhs == 0.0 && rhs_printed == 0.0 {
            0.0
        } else {
            rel(rhs_printed)
        },
        residual_corrected: if lhs == 0.0 && rhs_corrected == 0.0 {
            0.0
        } else {
            rel(rhs_corrected)
        },
        under_resolved: growth > 4f64.ln(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JTerms {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// `2 lambda int (s lambda phi)^3 b^2 z^2`.
    pub j2_lower_bound: f64,
    /// Expansion `2 int (s lambda phi)^3 (psi'' psi'^2 + Hess psi(grad psi, grad psi)) z^2 + lower bound`,
    /// which drops the mixed `psi' <grad psi, grad psi'>` contribution.
    pub j2_expanded_printed: f64,
    /// The same expansion with the mixed term restored; equals `j2`.
    pub j2_expanded_corrected: f64,
    /// `int s lambda phi |z|^2` and `int (s lambda phi)^2 |z|^2`.
    pub sigma1_l2: f64,
    pub sigma2_l2: f64,
    /// `C = sup_Q |box^2 phi| / (2 lambda^2 phi)`.
    pub j3_constant: f64,
    /// `|J_3| <= C lambda int s lambda phi |z|^2`, which holds by the choice of `C`.
    pub j3_bound_direct_holds: bool,
    /// `|J_3| <= C lambda^2 int s lambda phi |z|^2`.
    pub j3_bound_first_holds: bool,
    /// `|J_3| <= C lambda int (s lambda phi)^2 |z|^2`.
    pub j3_bound_second_holds: bool,
    pub b_min: f64,
    pub b_max: f64,
    pub b_mean: f64,
    pub eta: f64,
    /// Volume fraction of `{|b| <= eta |grad psi|^2}` in `Q`.
    pub q_eta_fraction: f64,
    /// Smallest `beta` with `J_1 >= 4 int s lambda phi |grad z|^2 - 4 beta int s lambda phi z_t^2`.
    pub beta_fit: f64,
}

pub fn j_terms<R: QuadRule + ?Sized>(
    f: &TestFunction,
    wt: &CarlemanWeight,
    rule: &R,
    input: ZInput,
    eta: f64,
) -> Result<JTerms> {
    let n = rule.dim();
    let s = wt.s;
    let l = wt.lambda;
    let mut err = None;
    let mut b_min = f64::INFINITY;
    let mut b_max = f64::NEG_INFINITY;
    let mut c_sup: f64 = 0.0;
    let acc = quad_many(rule, Region::Q, |p| {
        let w = eval_weight(wt, n, &p.x, p.t);
        let z = match z_jet(f, input, &w, s, p) {
            Ok(z) => z,
            Err(e) => {
                err = Some(e);
                return [0.0; 13];
            }
        };
        let [_, j1, j2, j3] = volume_terms(&z, &w, s, n);
        let sig = s * l * w.phi;
        let z2 = z.v * z.v;
        let pt = w.dpsi[TIME];
        let gpsi2 = w.grad_psi_sq(n);
        let mut hess_form = 0.0;
        for i in 0..n {
            for j in 0..n {
                hess_form += w.d2psi[i][j] * w.dpsi[i] * w.dpsi[j];
            }
        }
        let mixed: f64 = (0..n).map(|i| w.dpsi[i] * w.d2psi[i][TIME]).sum::<f64>() * pt;
        let core = w.d2psi[TIME][TIME] * pt * pt + hess_form;
        let lower = 2.0 * l * sig.powi(3) * w.b * w.b * z2;
        b_min = b_min.min(w.b);
        b_max = b_max.max(w.b);
        c_sup = c_sup.max(w.box2_phi.abs() / (2.0 * l * l * w.phi));
        let in_eta = if w.b.abs() <= eta * gpsi2 { 1.0 } else { 0.0 };
        [
            j1,
            j2,
            j3,
            lower,
            2.0 * sig.powi(3) * core * z2 + lower,
            2.0 * sig.powi(3) * (core - 2.0 * mixed) * z2 + lower,
            sig * z2,
            sig * sig * z2,
            w.b,
            in_eta,
            1.0,
            sig * z.grad_sq(n),
            sig * z.dt() * z.dt(),
        ]
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let (gradz, ztz) = (acc[11], acc[12]);
    let vol = acc[10];
    let j3 = acc[2];
    let beta_fit = if ztz > 0.0 {
        ((4.0 * gradz - acc[0]) / (4.0 * ztz)).max(0.0)
    } else {
        0.0
    };
    Ok(JTerms {
        j1: acc[0],
        j2: acc[1],
        j3,
        j2_lower_bound: acc[3],
        j2_expanded_printed: acc[4],
        j2_expanded_corrected: acc[5],
        sigma1_l2: acc[6],
        sigma2_l2: acc[7],
        j3_constant: c_sup,
        j3_bound_direct_holds: j3.abs() <= c_sup * l * acc[6] * (1.0 + 1e-9),
        j3_bound_first_holds: j3.abs() <= c_sup * l * l * acc[6] * (1.0 + 1e-12),
        j3_bound_second_holds: j3.abs() <= c_sup * l * acc[7] * (1.0 + 1e-12),
        b_min,
        b_max,
        b_mean: acc[8] / vol,
        eta,
        q_eta_fraction: acc[9] / vol,
        beta_fit,
    })
}
