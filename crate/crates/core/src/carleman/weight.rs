//! The weight `psi = 5(a - x_n)^2 + 5|x'|^2 - (t - x_n)^2`, `phi = exp(lambda psi)`,
//! and the derivatives of `phi` the estimates need, all in closed form.

use serde::{Deserialize, Serialize};

use super::jet::Jet2;
use crate::error::{Error, Result};
use crate::grid::TIME;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanWeight {
    pub a: f64,
    pub lambda: f64,
    pub s: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
}

impl Default for CarlemanWeight {
    fn default() -> Self {
        Self {
            a: 1.1,
            lambda: 0.1,
            s: 1.0,
            t_end: 6.5,
        }
    }
}

impl CarlemanWeight {
    /// `s = 0` is accepted: it switches the conjugation off.
    pub fn new(a: f64, lambda: f64, s: f64, t_end: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::Weight(format!("a must exceed 1, got {a}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Weight(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Weight(format!("s must be non-negative, got {s}")));
        }
        if !(t_end > 1.0) {
            return Err(Error::Weight(format!("T must exceed 1, got {t_end}")));
        }
        Ok(Self {
            a,
            lambda,
            s,
            t_end,
        })
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::new(self.a, self.lambda, s, self.t_end)
    }

    /// Aliases used by some displays: `gamma = lambda`.
    pub fn gamma(&self) -> f64 {
        self.lambda
    }

    /// `sigma = s lambda phi` at a point.
    pub fn sigma(&self, phi: f64) -> f64 {
        self.s * self.lambda * phi
    }

    /// `rho = 1`.
    pub fn varrho(&self) -> f64 {
        1.0
    }

    pub fn psi(&self, n: usize, x: &[f64; 3], t: f64) -> f64 {
        let xn = x[n - 1];
        let tang: f64 = (0..n - 1).map(|i| x[i] * x[i]).sum();
        5.0 * (self.a - xn).powi(2) + 5.0 * tang - (t - xn).powi(2)
    }

    pub fn phi(&self, n: usize, x: &[f64; 3], t: f64) -> f64 {
        (self.lambda * self.psi(n, x, t)).exp()
    }

    /// Largest value of `phi` on the closure of `Q`, attained at
    /// `x = -e_n, t = -1`.
    pub fn phi_max(&self) -> f64 {
        (self.lambda * 5.0 * (self.a + 1.0).powi(2)).exp()
    }
}

/// `psi`, `phi` and their derivatives at one point. Four-slot vectors put
/// time in slot 3; slots beyond `n` are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightEval {
    pub psi: f64,
    pub dpsi: [f64; 4],
    pub d2psi: [[f64; 4]; 4],
    pub phi: f64,
    pub dphi: [f64; 4],
    pub d2phi: [[f64; 4]; 4],
    /// `A = (d_t^2 - Laplacian) phi`.
    pub box_phi: f64,
    pub grad_box_phi: [f64; 4],
    /// `(d_t^2 - Laplacian)^2 phi`.
    pub box2_phi: f64,
    /// `b(psi) = psi_t^2 - |grad psi|^2`.
    pub b: f64,
    /// `phi_t^2 - |grad phi|^2`.
    pub c: f64,
}

impl WeightEval {
    pub fn phi_t(&self) -> f64 {
        self.dphi[TIME]
    }

    pub fn phi_tt(&self) -> f64 {
        self.d2phi[TIME][TIME]
    }

    pub fn lap_phi(&self, n: usize) -> f64 {
        (0..n).map(|i| self.d2phi[i][i]).sum()
    }

    pub fn grad_psi_sq(&self, n: usize) -> f64 {
        (0..n).map(|i| self.dpsi[i] * self.dpsi[i]).sum()
    }

    pub fn phi_jet(&self) -> Jet2 {
        Jet2 {
            v: self.phi,
            d: self.dphi,
            h: self.d2phi,
        }
    }
}

/// Minkowski signature `diag(-1, .., -1, +1)` restricted to active slots.
fn sig(n: usize, i: usize) -> f64 {
    if i == TIME {
        1.0
    } else if i < n {
        -1.0
    } else {
        0.0
    }
}

pub fn eval_weight(wt: &CarlemanWeight, n: usize, x: &[f64; 3], t: f64) -> WeightEval {
    let l = wt.lambda;
    let xn = x[n - 1];
    let k = n - 1;
    let mut g = [0.0; 4];
    let mut hm = [[0.0; 4]; 4];
    for i in 0..k {
        g[i] = 10.0 * x[i];
        hm[i][i] = 10.0;
    }
    g[k] = -10.0 * (wt.a - xn) + 2.0 * (t - xn);
    g[TIME] = -2.0 * (t - xn);
    hm[k][k] = 8.0;
    hm[TIME][TIME] = -2.0;
    hm[k][TIME] = 2.0;
    hm[TIME][k] = 2.0;
    let psi = wt.psi(n, x, t);
    let phi = (l * psi).exp();

    let mut dphi = [0.0; 4];
    let mut d2phi = [[0.0; 4]; 4];
    for i in 0..4 {
        dphi[i] = l * phi * g[i];
        for j in 0..4 {
            d2phi[i][j] = l * phi * (l * g[i] * g[j] + hm[i][j]);
        }
    }
    // q = <g, g>_G, tau = tr(G H), m = H G g
    let q: f64 = (0..4).map(|i| sig(n, i) * g[i] * g[i]).sum();
    let tau: f64 = (0..4).map(|i| sig(n, i) * hm[i][i]).sum();
    let mut m = [0.0; 4];
    for i in 0..4 {
        m[i] = (0..4).map(|j| hm[i][j] * sig(n, j) * g[j]).sum();
    }
    let gm: f64 = (0..4).map(|i| sig(n, i) * g[i] * m[i]).sum();
    let mut trghgh = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            trghgh += sig(n, i) * hm[i][j] * sig(n, j) * hm[j][i];
        }
    }
    let box_phi = l * phi * (l * q + tau);
    let mut grad_box_phi = [0.0; 4];
    for i in 0..4 {
        grad_box_phi[i] = l * l * phi * (g[i] * (l * q + tau) + 2.0 * m[i]);
    }
    let box2_phi = l.powi(3) * phi * (q * (l * q + tau) + 2.0 * gm)
        + l * l * phi * (tau * (l * q + tau) + 2.0 * l * gm + 2.0 * trghgh);
    WeightEval {
        psi,
        dpsi: g,
        d2psi: hm,
        phi,
        dphi,
        d2phi,
        box_phi,
        grad_box_phi,
        box2_phi,
        b: q,
        c: l * l * phi * phi * q,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryCheck {
    /// `(T - 1)^2 > 20 a + 5`.
    pub ok: bool,
    /// `min_Gamma phi - max_{t = T} phi`, by dense search.
    pub alpha: f64,
    pub min_gamma_phi: f64,
    pub max_top_phi: f64,
}

/// Geometry gate at the default `lambda = 0.1`.
pub fn geometry_check(t_end: f64, a: f64) -> Result<GeometryCheck> {
    geometry_check_with(t_end, a, 0.1, 400)
}

/// Both extremes depend on `x'` only through `|x'|`, so the search runs over
/// the half-disc `{(rho, x_n): rho >= 0, rho^2 + x_n^2 <= 1}`.
pub fn geometry_check_with(
    t_end: f64,
    a: f64,
    lambda: f64,
    resolution: usize,
) -> Result<GeometryCheck> {
    if !(t_end > 1.0) || !(a > 1.0) {
        return Err(Error::Weight(format!(
            "geometry check needs T > 1 and a > 1, got T = {t_end}, a = {a}"
        )));
    }
    let wt = CarlemanWeight::new(a, lambda, 1.0, t_end)?;
    let ok = (t_end - 1.0).powi(2) > 20.0 * a + 5.0;
    let mut min_gamma = f64::INFINITY;
    let mut max_top = f64::NEG_INFINITY;
    let m = resolution.max(8);
    for i in 0..=m {
        let xn = -1.0 + 2.0 * i as f64 / m as f64;
        let rmax = (1.0 - xn * xn).max(0.0).sqrt();
        for j in 0..=m {
            let rho = rmax * j as f64 / m as f64;
            let x = [rho, xn, 0.0];
            min_gamma = min_gamma.min(wt.phi(2, &x, xn));
            max_top = max_top.max(wt.phi(2, &x, t_end));
        }
    }
    Ok(GeometryCheck {
        ok,
        alpha: min_gamma - max_top,
        min_gamma_phi: min_gamma,
        max_top_phi: max_top,
    })
}
