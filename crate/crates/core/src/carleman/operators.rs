//! `P = d_t^2 - Laplacian`, its conjugate split `P_s^+ + P_s^-` and the
//! conjugation `z = exp(s phi) v`.

use super::jet::Jet2;
use super::weight::{eval_weight, CarlemanWeight, WeightEval};
use crate::error::{Error, Result};
use crate::grid::{Axis, SpaceTimeField, SpaceTimeGrid, TIME};

/// Largest exponent `exp` can take without overflow.
const EXP_LIMIT: f64 = 709.0;

pub fn apply_p(v: &Jet2, n: usize) -> f64 {
    v.wave(n)
}

/// `z'' - Laplacian z + s^2 (phi_t^2 - |grad phi|^2) z`.
pub fn apply_ps_plus(z: &Jet2, w: &WeightEval, s: f64, n: usize) -> f64 {
    z.wave(n) + s * s * w.c * z.v
}

/// `-2 s (z' phi' - grad z . grad phi) - s (phi'' - Laplacian phi) z`.
pub fn apply_ps_minus(z: &Jet2, w: &WeightEval, s: f64, n: usize) -> f64 {
    -2.0 * s * (z.dt() * w.phi_t() - z.grad_dot(&w.dphi, n)) - s * w.box_phi * z.v
}

/// Jet of `exp(c s phi) f`.
fn weighted(f: &Jet2, w: &WeightEval, s: f64, sign: f64) -> Result<Jet2> {
    let e = sign * s * w.phi;
    if e > EXP_LIMIT {
        return Err(Error::Overflow(e));
    }
    Ok(w.phi_jet().exp_scaled(sign * s).mul(f))
}

/// `z = exp(s phi) v` as a jet.
pub fn conjugate_jet(v: &Jet2, w: &WeightEval, s: f64) -> Result<Jet2> {
    weighted(v, w, s, 1.0)
}

/// `v = exp(-s phi) z` as a jet.
pub fn deconjugate_jet(z: &Jet2, w: &WeightEval, s: f64) -> Result<Jet2> {
    weighted(z, w, s, -1.0)
}

/// `exp(s phi) P(exp(-s phi) z)` against `P_s^+ z + P_s^- z`. Returns the
/// absolute residual and the size of the largest contributing term.
pub fn conjugation_residual(z: &Jet2, w: &WeightEval, s: f64, n: usize) -> Result<(f64, f64)> {
    let v = deconjugate_jet(z, w, s)?;
    let lhs = (s * w.phi).exp() * apply_p(&v, n);
    let plus = apply_ps_plus(z, w, s, n);
    let minus = apply_ps_minus(z, w, s, n);
    let terms = [
        z.dtt().abs(),
        z.laplacian(n).abs(),
        (s * s * w.c * z.v).abs(),
        (2.0 * s * z.dt() * w.phi_t()).abs(),
        (2.0 * s * z.grad_dot(&w.dphi, n)).abs(),
        (s * w.box_phi * z.v).abs(),
        lhs.abs(),
    ];
    let scale = terms.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(((lhs - plus - minus).abs(), scale))
}

/// `exp(s phi) v` stored as `log|v| + s phi` and a sign.
#[derive(Clone, Debug, PartialEq)]
pub struct LogField {
    pub log_abs: Vec<f64>,
    pub sign: Vec<i8>,
}

impl LogField {
    pub fn max_log(&self) -> f64 {
        self.log_abs
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values times `exp(-offset)`.
    pub fn values(&self, offset: f64) -> Result<Vec<f64>> {
        self.log_abs
            .iter()
            .zip(&self.sign)
            .map(|(l, s)| {
                let e = l - offset;
                if e > EXP_LIMIT {
                    return Err(Error::Overflow(e));
                }
                Ok(*s as f64 * e.exp())
            })
            .collect()
    }

    /// `exp(-s phi) z` back in plain form.
    pub fn deconjugate(&self, phi: &[f64], s: f64) -> Result<Vec<f64>> {
        self.log_abs
            .iter()
            .zip(&self.sign)
            .zip(phi)
            .map(|((l, sg), p)| {
                let e = l - s * p;
                if e > EXP_LIMIT {
                    return Err(Error::Overflow(e));
                }
                Ok(*sg as f64 * e.exp())
            })
            .collect()
    }
}

pub fn conjugate_samples(v: &[f64], phi: &[f64], s: f64) -> LogField {
    let mut log_abs = Vec::with_capacity(v.len());
    let mut sign = Vec::with_capacity(v.len());
    for (vi, p) in v.iter().zip(phi) {
        if *vi == 0.0 {
            log_abs.push(f64::NEG_INFINITY);
            sign.push(0);
        } else {
            log_abs.push(vi.abs().ln() + s * p);
            sign.push(if *vi > 0.0 { 1 } else { -1 });
        }
    }
    LogField { log_abs, sign }
}

/// Weight values at every grid node, level-major like [`SpaceTimeField`].
pub fn phi_field(grid: &SpaceTimeGrid, wt: &CarlemanWeight) -> SpaceTimeField {
    SpaceTimeField::from_fn(grid, |x, t| wt.phi(grid.n, x, t))
}

pub fn conjugate_field(
    field: &SpaceTimeField,
    grid: &SpaceTimeGrid,
    wt: &CarlemanWeight,
) -> LogField {
    conjugate_samples(&field.data, &phi_field(grid, wt).data, wt.s)
}

/// `P` on a grid field through repeated differencing.
pub fn apply_p_field(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    let mut out = field.diff(Axis::Time)?.diff(Axis::Time)?;
    for a in 0..field.n {
        let d2 = field.diff(Axis::Space(a))?.diff(Axis::Space(a))?;
        for (o, v) in out.data.iter_mut().zip(&d2.data) {
            *o -= v;
        }
    }
    Ok(out)
}

/// `P_s^+ z` and `P_s^- z` on a grid field.
pub fn apply_ps_fields(
    z: &SpaceTimeField,
    grid: &SpaceTimeGrid,
    wt: &CarlemanWeight,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let n = grid.n;
    let p = apply_p_field(z)?;
    let dt = z.diff(Axis::Time)?;
    let grads: Vec<SpaceTimeField> = (0..n)
        .map(|a| z.diff(Axis::Space(a)))
        .collect::<Result<_>>()?;
    let mut plus = p.clone();
    let mut minus = p;
    let len = grid.spatial_len();
    let s = wt.s;
    for k in 0..grid.nt {
        let t = grid.time(k);
        for i in 0..len {
            let x = grid.coord(i);
            let w = eval_weight(wt, n, &x, t);
            let idx = k * len + i;
            let zv = z.data[idx];
            plus.data[idx] += s * s * w.c * zv;
            let gdot: f64 = (0..n).map(|a| grads[a].data[idx] * w.dphi[a]).sum();
            minus.data[idx] = -2.0 * s * (dt.data[idx] * w.dphi[TIME] - gdot) - s * w.box_phi * zv;
        }
    }
    Ok((plus, minus))
}
