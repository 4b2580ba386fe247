//! Closed family of analytic test functions with exact second-order jets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::jet::{separable, Jet2};
use crate::error::{Error, Result};
use crate::grid::TIME;

/// Space-time coordinates `(x_1, x_2, x_3, t)`.
pub type Point4 = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub pow: [u8; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    /// Sum of monomials of total degree at most 3.
    Poly(Vec<Monomial>),
    /// `exp(-sum_a ((y_a - c_a) k_a)^2)`; `k_a = 0` drops the slot.
    Gauss { center: Point4, inv_width: Point4 },
    /// `sin(k . y + phase)`.
    Wave { k: Point4, phase: f64 },
    /// `exp(-1 / (1 - |y - c|^2 / r^2))` over the active slots, zero outside.
    Bump { center: Point4, radius: f64 },
    /// `prod_{a < n} (1 - (x_a / L)^2)^3` inside the box, zero outside.
    Cutoff { half_width: f64 },
}

impl Factor {
    fn jet(&self, n: usize, y: &Point4) -> Jet2 {
        match self {
            Factor::Poly(terms) => {
                let mut out = Jet2::default();
                for m in terms {
                    let mut f = [[1.0, 0.0, 0.0]; 4];
                    for a in 0..4 {
                        let p = m.pow[a] as i32;
                        if p == 0 {
                            continue;
                        }
                        let x = y[a];
                        f[a] = [
                            x.powi(p),
                            p as f64 * x.powi(p - 1),
                            if p >= 2 {
                                (p * (p - 1)) as f64 * x.powi(p - 2)
                            } else {
                                0.0
                            },
                        ];
                    }
                    out = out.add(&separable(&f).scale(m.coef));
                }
                out
            }
            Factor::Gauss { center, inv_width } => {
                let mut f = [[1.0, 0.0, 0.0]; 4];
                for a in 0..4 {
                    let k = inv_width[a];
                    if k == 0.0 {
                        continue;
                    }
                    let u = (y[a] - center[a]) * k;
                    let e = (-u * u).exp();
                    f[a] = [e, -2.0 * u * k * e, (4.0 * u * u - 2.0) * k * k * e];
                }
                separable(&f)
            }
            Factor::Wave { k, phase } => {
                let th: f64 = (0..4).map(|a| k[a] * y[a]).sum::<f64>() + phase;
                let (s, c) = th.sin_cos();
                let mut out = Jet2 {
                    v: s,
                    ..Default::default()
                };
                for a in 0..4 {
                    out.d[a] = k[a] * c;
                    for b in 0..4 {
                        out.h[a][b] = -k[a] * k[b] * s;
                    }
                }
                out
            }
            Factor::Bump { center, radius } => {
                let r2 = radius * radius;
                let slots: Vec<usize> = (0..n).chain([TIME]).collect();
                let u: f64 = slots
                    .iter()
                    .map(|&a| (y[a] - center[a]).powi(2))
                    .sum::<f64>()
                    / r2;
                if u >= 1.0 {
                    return Jet2::default();
                }
                let q = 1.0 - u;
                let e = (-1.0 / q).exp();
                let d1 = -e / (q * q);
                let d2 = e / q.powi(4) - 2.0 * e / q.powi(3);
                let mut out = Jet2 {
                    v: e,
                    ..Default::default()
                };
                for &a in &slots {
                    let ua = 2.0 * (y[a] - center[a]) / r2;
                    out.d[a] = d1 * ua;
                    for &b in &slots {
                        let ub = 2.0 * (y[b] - center[b]) / r2;
                        out.h[a][b] = d2 * ua * ub + if a == b { d1 * 2.0 / r2 } else { 0.0 };
                    }
                }
                out
            }
            Factor::Cutoff { half_width } => {
                let mut f = [[1.0, 0.0, 0.0]; 4];
                for a in 0..n {
                    let s = y[a] / half_width;
                    if s.abs() >= 1.0 {
                        return Jet2::default();
                    }
                    let g = 1.0 - s * s;
                    let gp = -2.0 * s / half_width;
                    let gpp = -2.0 / (half_width * half_width);
                    f[a] = [
                        g.powi(3),
                        3.0 * g * g * gp,
                        6.0 * g * gp * gp + 3.0 * g * g * gpp,
                    ];
                }
                separable(&f)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub n: usize,
    pub factors: Vec<Factor>,
    pub label: String,
}

impl TestFunction {
    pub fn new(n: usize, factors: Vec<Factor>, label: impl Into<String>) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::Invalid(format!("dimension must be 2 or 3, got {n}")));
        }
        for f in &factors {
            let bad_slot = |v: &Point4| (n..TIME).any(|a| v[a] != 0.0);
            let bad = match f {
                Factor::Poly(terms) => terms.iter().any(|m| {
                    m.pow.iter().map(|&p| p as u32).sum::<u32>() > 3
                        || (n..TIME).any(|a| m.pow[a] != 0)
                }),
                Factor::Gauss { center, inv_width } => bad_slot(center) || bad_slot(inv_width),
                Factor::Wave { k, .. } => bad_slot(k),
                Factor::Bump { center, radius } => bad_slot(center) || !(*radius > 0.0),
                Factor::Cutoff { half_width } => !(*half_width > 1.0),
            };
            if bad {
                return Err(Error::Invalid(format!(
                    "factor {f:?} is outside the family for n = {n}"
                )));
            }
        }
        Ok(Self {
            n,
            factors,
            label: label.into(),
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            factors: vec![Factor::Poly(vec![])],
            label: "zero".into(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            n,
            factors: vec![Factor::Poly(vec![Monomial {
                coef: c,
                pow: [0; 4],
            }])],
            label: format!("const({c})"),
        }
    }

    /// `v = t^2`.
    pub fn t_squared(n: usize) -> Self {
        let m = Monomial {
            coef: 1.0,
            pow: [0, 0, 0, 2],
        };
        Self {
            n,
            factors: vec![Factor::Poly(vec![m])],
            label: "t^2".into(),
        }
    }

    /// Space-time bump centred at `(center, t_center)`, away from every
    /// boundary piece of `Q` when the radius is small enough.
    pub fn interior_bump(n: usize, center: [f64; 3], t_center: f64, radius: f64) -> Self {
        let c = [
            center[0],
            center[1],
            if n == 3 { center[2] } else { 0.0 },
            t_center,
        ];
        Self {
            n,
            factors: vec![Factor::Bump { center: c, radius }],
            label: "interior bump".into(),
        }
    }

    pub fn jet(&self, x: &[f64; 3], t: f64) -> Jet2 {
        let y = [x[0], x[1], x[2], t];
        let mut out = Jet2::constant(1.0);
        for f in &self.factors {
            out = out.mul(&f.jet(self.n, &y));
        }
        out
    }

    pub fn value(&self, x: &[f64; 3], t: f64) -> f64 {
        self.jet(x, t).v
    }

    /// One random member: cutoff times one or two random factors.
    pub fn random(n: usize, rng: &mut impl Rng, half_width: f64) -> Self {
        loop {
            let mut factors = vec![Factor::Cutoff { half_width }];
            let count = rng.gen_range(1..=2);
            let mut kinds = Vec::new();
            for _ in 0..count {
                let kind = rng.gen_range(0..3);
                kinds.push(["poly", "gauss", "wave"][kind]);
                factors.push(random_factor(n, kind, rng));
            }
            let f = Self {
                n,
                factors,
                label: format!("cutoff*{}", kinds.join("*")),
            };
            // exclude members that are numerically zero on Q
            let probes = [
                ([0.0, 0.0, 0.0], 0.5),
                ([0.3, -0.2, 0.1], 1.5),
                ([-0.5, 0.4, 0.0], 3.0),
            ];
            let mag: f64 = probes.iter().map(|(x, t)| f.value(x, *t).abs()).sum();
            if mag > 1e-3 {
                return f;
            }
        }
    }

    /// Seeded suite of `count` random members.
    pub fn suite(n: usize, count: usize, seed: u64, half_width: f64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let mut f = Self::random(n, &mut rng, half_width);
                f.label = format!("{i}:{}", f.label);
                f
            })
            .collect()
    }
}

fn random_factor(n: usize, kind: usize, rng: &mut impl Rng) -> Factor {
    let active = |a: usize| a < n || a == TIME;
    match kind {
        0 => {
            let mut terms = vec![Monomial {
                coef: rng.gen_range(0.5..1.5),
                pow: [0; 4],
            }];
            for _ in 0..rng.gen_range(1..=4) {
                let mut pow = [0u8; 4];
                let deg = rng.gen_range(1..=3);
                for _ in 0..deg {
                    let a = loop {
                        let a = rng.gen_range(0..4);
                        if active(a) {
                            break a;
                        }
                    };
                    pow[a] += 1;
                }
                // keep the time degree modest so values stay O(1) up to t = T
                if pow[TIME] > 1 {
                    pow[TIME] = 1;
                }
                terms.push(Monomial {
                    coef: rng.gen_range(-1.0..1.0),
                    pow,
                });
            }
            Factor::Poly(terms)
        }
        1 => {
            let mut center = [0.0; 4];
            let mut inv_width = [0.0; 4];
            for a in 0..n {
                center[a] = rng.gen_range(-0.6..0.6);
                inv_width[a] = 1.0 / rng.gen_range(0.4..1.5);
            }
            center[TIME] = rng.gen_range(-1.0..3.0);
            inv_width[TIME] = 1.0 / rng.gen_range(0.8..3.0);
            Factor::Gauss { center, inv_width }
        }
        _ => {
            let mut k = [0.0; 4];
            for (a, item) in k.iter_mut().enumerate() {
                if active(a) {
                    *item = rng.gen_range(-2.0..2.0);
                }
            }
            Factor::Wave {
                k,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fd_jet_error(f: &TestFunction, x: [f64; 3], t: f64, h: f64) -> f64 {
        let j = f.jet(&x, t);
        let n = f.n;
        let slots: Vec<usize> = (0..n).chain([TIME]).collect();
        let shift = |a: usize, d: f64| {
            let mut y = x;
            let mut s = t;
            if a == TIME {
                s += d;
            } else {
                y[a] += d;
            }
            f.jet(&y, s)
        };
        let mut err: f64 = 0.0;
        for &a in &slots {
            let p = shift(a, h);
            let m = shift(a, -h);
            err = err.max(((p.v - m.v) / (2.0 * h) - j.d[a]).abs());
            for &b in &slots {
                err = err.max(((p.d[b] - m.d[b]) / (2.0 * h) - j.h[a][b]).abs());
            }
        }
        err
    }

    #[test]
    fn jets_match_finite_differences() {
        for n in [2, 3] {
            for f in TestFunction::suite(n, 12, 3, 1.6) {
                let x = [0.21, -0.33, if n == 3 { 0.12 } else { 0.0 }];
                let e1 = fd_jet_error(&f, x, 0.7, 1e-3);
                let e2 = fd_jet_error(&f, x, 0.7, 5e-4);
                assert!(e1 < 1e-3, "{} {e1}", f.label);
                assert!(e2 < 0.3 * e1 + 1e-9, "{} {e1} {e2}", f.label);
            }
        }
    }

    #[test]
    fn bump_jet() {
        let f = TestFunction::interior_bump(2, [0.1, 0.0, 0.0], 3.0, 0.5);
        assert!(fd_jet_error(&f, [0.2, 0.1, 0.0], 3.1, 1e-4) < 1e-6);
        assert_eq!(f.value(&[0.0, 0.0, 0.0], 0.0), 0.0);
    }

    #[test]
    fn simple_members() {
        let f = TestFunction::t_squared(2);
        let j = f.jet(&[0.3, 0.1, 0.0], 1.7);
        assert_eq!(j.wave(2), 2.0);
        assert_eq!(TestFunction::zero(2).value(&[0.1, 0.2, 0.0], 0.3), 0.0);
    }

    #[test]
    fn family_validation() {
        let bad = Factor::Poly(vec![Monomial {
            coef: 1.0,
            pow: [2, 2, 0, 0],
        }]);
        assert!(TestFunction::new(2, vec![bad], "deg4").is_err());
        let slot = Factor::Wave {
            k: [0.0, 0.0, 1.0, 0.0],
            phase: 0.0,
        };
        assert!(TestFunction::new(2, vec![slot], "slot").is_err());
    }
}
