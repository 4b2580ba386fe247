//! `h(s) = sup_{x in B} int_0^T exp(2s(phi(x, t) - phi(x, x_n))) dt`.

use serde::{Deserialize, Serialize};

use super::weight::{geometry_check, CarlemanWeight};
use crate::error::{Error, Result};
use crate::potential::adaptive_gk;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub s_values: Vec<f64>,
    pub values: Vec<f64>,
    /// Where the sup was attained, as `(|x'|, x_n)`.
    pub argmax: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    /// First index whose value fails to drop below its predecessor.
    pub first_violation: Option<usize>,
}

/// Inner integral at a point with tangential radius `rho` and height `xn`.
pub fn inner_integral(wt: &CarlemanWeight, rho: f64, xn: f64) -> f64 {
    let x = [rho, xn, 0.0];
    let peak = wt.phi(2, &x, xn);
    let g = |t: f64| (2.0 * wt.s * (wt.phi(2, &x, t) - peak)).exp();
    let t_end = wt.t_end;
    let mut total = 0.0;
    // the integrand peaks at t = x_n; split there when it lies inside
    let split = xn.clamp(0.0, t_end);
    if split > 0.0 {
        total += adaptive_gk(&g, 0.0, split, 1e-11, 40);
    }
    total += adaptive_gk(&g, split, t_end, 1e-11, 40);
    total
}

/// `sqrt(pi / (2 s lambda phi_0))`, the Laplace approximation of the inner
/// integral at `x = (0, 1)` where the exponent has curvature `-4 s lambda phi_0`
/// at its maximum on `[0, T]`.
pub fn laplace_oracle(wt: &CarlemanWeight, xn: f64) -> f64 {
    let phi0 = wt.phi(2, &[0.0, xn, 0.0], xn);
    let full = (std::f64::consts::PI / (2.0 * wt.s * wt.lambda * phi0)).sqrt();
    if xn > 0.0 && xn < wt.t_end {
        full
    } else {
        0.5 * full
    }
}

/// Dense search over `(|x'|, x_n)` in the closed half disc. The integral
/// depends on `x'` only through `|x'|`, so 2D and 3D share it.
pub fn h_s_decay(
    template: &CarlemanWeight,
    s_values: &[f64],
    resolution: usize,
) -> Result<DecayReport> {
    let geo = geometry_check(template.t_end, template.a)?;
    if !geo.ok {
        return Err(Error::Weight(format!(
            "geometry condition fails for T = {}, a = {}",
            template.t_end, template.a
        )));
    }
    if s_values.is_empty() || s_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(
            "s values must be non-empty and strictly ascending".into(),
        ));
    }
    let m = resolution.max(4);
    let mut values = Vec::with_capacity(s_values.len());
    let mut argmax = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let wt = template.with_s(s)?;
        let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
        for i in 0..=m {
            let xn = -1.0 + 2.0 * i as f64 / m as f64;
            let rmax = (1.0 - xn * xn).max(0.0).sqrt();
            for j in 0..=m / 2 {
                let rho = rmax * j as f64 / (m / 2) as f64;
                let v = inner_integral(&wt, rho, xn);
                if v > best.0 {
                    best = (v, (rho, xn));
                }
            }
        }
        values.push(best.0);
        argmax.push(best.1);
    }
    let first_violation = values.windows(2).position(|w| w[1] >= w[0]).map(|i| i + 1);
    Ok(DecayReport {
        s_values: s_values.to_vec(),
        strictly_decreasing: first_violation.is_none(),
        first_violation,
        values,
        argmax,
    })
}
