//! Second-order jets in space-time: value, gradient and Hessian over four
//! slots (three spatial, time in slot 3).

use crate::grid::TIME;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; 4],
    pub h: [[f64; 4]; 4],
}

impl Jet2 {
    pub fn constant(c: f64) -> Self {
        Self {
            v: c,
            ..Default::default()
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.v *= c;
        for i in 0..4 {
            out.d[i] *= c;
            for j in 0..4 {
                out.h[i][j] *= c;
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        out.v += o.v;
        for i in 0..4 {
            out.d[i] += o.d[i];
            for j in 0..4 {
                out.h[i][j] += o.h[i][j];
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self {
            v: self.v * o.v,
            ..Default::default()
        };
        for i in 0..4 {
            out.d[i] = self.d[i] * o.v + self.v * o.d[i];
            for j in 0..4 {
                out.h[i][j] = self.h[i][j] * o.v
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                    + self.v * o.h[i][j];
            }
        }
        out
    }

    /// Jet of `exp(c f)` where `self` is the jet of `f`.
    pub fn exp_scaled(&self, c: f64) -> Self {
        let e = (c * self.v).exp();
        let mut out = Self {
            v: e,
            ..Default::default()
        };
        for i in 0..4 {
            out.d[i] = c * e * self.d[i];
            for j in 0..4 {
                out.h[i][j] = e * (c * self.h[i][j] + c * c * self.d[i] * self.d[j]);
            }
        }
        out
    }

    pub fn dt(&self) -> f64 {
        self.d[TIME]
    }

    pub fn dtt(&self) -> f64 {
        self.h[TIME][TIME]
    }

    pub fn laplacian(&self, n: usize) -> f64 {
        (0..n).map(|i| self.h[i][i]).sum()
    }

    /// `f_tt - Laplacian f`.
    pub fn wave(&self, n: usize) -> f64 {
        self.dtt() - self.laplacian(n)
    }

    pub fn grad_sq(&self, n: usize) -> f64 {
        (0..n).map(|i| self.d[i] * self.d[i]).sum()
    }

    pub fn grad_dot(&self, other: &[f64; 4], n: usize) -> f64 {
        (0..n).map(|i| self.d[i] * other[i]).sum()
    }
}

/// Jet of a product of one-dimensional factors `prod_a g_a(y_a)`, each
/// given as `(g, g', g'')`.
pub fn separable(factors: &[[f64; 3]; 4]) -> Jet2 {
    let mut out = Jet2 {
        v: factors.iter().map(|f| f[0]).product(),
        ..Default::default()
    };
    for a in 0..4 {
        for b in 0..4 {
            let mut p = 1.0;
            for (c, f) in factors.iter().enumerate() {
                p *= if a == b && c == a {
                    f[2]
                } else if c == a || c == b {
                    f[1]
                } else {
                    f[0]
                };
            }
            out.h[a][b] = p;
        }
        let mut p = 1.0;
        for (c, f) in factors.iter().enumerate() {
            p *= if c == a { f[1] } else { f[0] };
        }
        out.d[a] = p;
    }
    out
}
