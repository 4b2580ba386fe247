//! Smooth compactly supported potentials built from bumps, and the line
//! integrals along `e_n` that carry the characteristic data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, quad, GridRule, Region, SpaceTimeGrid};

/// `amplitude * exp(-1 / (1 - |x - center|^2 / radius^2))` inside the ball
/// of the given radius, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: [f64; 3], radius: f64, amplitude: f64) -> Self {
        Self {
            center,
            radius,
            amplitude,
        }
    }

    fn rel2(&self, x: &[f64; 3]) -> f64 {
        let d = [
            x[0] - self.center[0],
            x[1] - self.center[1],
            x[2] - self.center[2],
        ];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (self.radius * self.radius)
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        let u = self.rel2(x);
        if u >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - u)).exp()
        }
    }

    /// Value, gradient and Laplacian in dimension `n`.
    pub fn eval_with_laplacian(&self, n: usize, x: &[f64; 3]) -> (f64, [f64; 3], f64) {
        let u = self.rel2(x);
        if u >= 1.0 {
            return (0.0, [0.0; 3], 0.0);
        }
        let r2 = self.radius * self.radius;
        let q = 1.0 - u;
        let e = self.amplitude * (-1.0 / q).exp();
        let d1 = -e / (q * q);
        let d2 = e / q.powi(4) - 2.0 * e / q.powi(3);
        let mut grad = [0.0; 3];
        for a in 0..n {
            grad[a] = d1 * 2.0 * (x[a] - self.center[a]) / r2;
        }
        let lap = d2 * 4.0 * u / r2 + d1 * 2.0 * n as f64 / r2;
        (e, grad, lap)
    }

    /// `int_{-inf}^{upper} bump(x', s) ds` along the `e_n` line through `x`.
    fn line_integral(&self, n: usize, x: &[f64; 3], upper: f64) -> f64 {
        let mut d2 = 0.0;
        for a in 0..n - 1 {
            d2 += (x[a] - self.center[a]).powi(2);
        }
        let r2 = self.radius * self.radius;
        if d2 >= r2 {
            return 0.0;
        }
        let w = (r2 - d2).sqrt();
        let c = self.center[n - 1];
        let lo = c - w;
        let hi = (c + w).min(upper);
        if hi <= lo {
            return 0.0;
        }
        let profile = |s: f64| {
            let u = (d2 + (s - c).powi(2)) / r2;
            if u >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - u)).exp()
            }
        };
        self.amplitude * adaptive_gk(&profile, lo, hi, 1e-15, 40)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub n: usize,
    pub bumps: Vec<Bump>,
    pub sup_bound: f64,
    pub id: String,
}

impl Potential {
    pub fn new(n: usize, bumps: Vec<Bump>) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::Potential(format!(
                "dimension must be 2 or 3, got {n}"
            )));
        }
        for (i, b) in bumps.iter().enumerate() {
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return Err(Error::Potential(format!(
                    "bump {i}: radius must be positive"
                )));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::Potential(format!("bump {i}: non-finite parameters")));
            }
            if n == 2 && b.center[2] != 0.0 {
                return Err(Error::Potential(format!(
                    "bump {i}: third coordinate must be 0 for n = 2"
                )));
            }
            if norm(&b.center) + b.radius >= 1.0 {
                return Err(Error::Potential(format!(
                    "bump {i}: support |x0| + r = {} reaches the unit sphere",
                    norm(&b.center) + b.radius
                )));
            }
        }
        let id = if bumps.is_empty() {
            "zero".to_string()
        } else {
            bumps
                .iter()
                .map(|b| {
                    let c: Vec<String> = b.center[..n].iter().map(|v| format!("{v:.4}")).collect();
                    format!("({};{:.4};{:.4})", c.join(","), b.radius, b.amplitude)
                })
                .collect::<Vec<_>>()
                .join("+")
        };
        let mut pot = Self {
            n,
            bumps,
            sup_bound: 0.0,
            id,
        };
        pot.sup_bound = pot.compute_sup();
        Ok(pot)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            bumps: Vec::new(),
            sup_bound: 0.0,
            id: "zero".into(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    pub fn eval_with_laplacian(&self, x: &[f64; 3]) -> (f64, [f64; 3], f64) {
        let mut v = 0.0;
        let mut g = [0.0; 3];
        let mut l = 0.0;
        for b in &self.bumps {
            let (bv, bg, bl) = b.eval_with_laplacian(self.n, x);
            v += bv;
            l += bl;
            for a in 0..3 {
                g[a] += bg[a];
            }
        }
        (v, g, l)
    }

    /// `c V`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let bumps = self
            .bumps
            .iter()
            .map(|b| Bump {
                amplitude: c * b.amplitude,
                ..*b
            })
            .collect();
        Self::new(self.n, bumps)
    }

    /// `V1 - V2` as a bump combination.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().map(|b| Bump {
            amplitude: -b.amplitude,
            ..*b
        }));
        Self::new(self.n, bumps)
    }

    /// Values at every spatial node of the grid.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        (0..grid.spatial_len())
            .map(|i| self.eval(&grid.coord(i)))
            .collect()
    }

    /// `int_{-inf}^{x_n} V(x', s) ds`.
    pub fn halfline_integral(&self, x: &[f64; 3]) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutsideBox(*x));
        }
        let upper = x[self.n - 1];
        Ok(self
            .bumps
            .iter()
            .map(|b| b.line_integral(self.n, x, upper))
            .sum())
    }

    /// The characteristic datum `-1/2 int_{-inf}^{x_n} V(x', s) ds`.
    pub fn characteristic_datum(&self, x: &[f64; 3]) -> Result<f64> {
        Ok(-0.5 * self.halfline_integral(x)?)
    }

    /// `||V||_{L^2(B)}` on the grid's ball quadrature.
    pub fn l2_norm_b(&self, grid: &SpaceTimeGrid) -> f64 {
        quad(&GridRule::new(grid), Region::Ball, |p| {
            self.eval(&p.x).powi(2)
        })
        .map(f64::sqrt)
        .unwrap_or(0.0)
    }

    fn compute_sup(&self) -> f64 {
        if self.bumps.is_empty() {
            return 0.0;
        }
        let rmin = self
            .bumps
            .iter()
            .map(|b| b.radius)
            .fold(f64::INFINITY, f64::min);
        let step = (rmin / 6.0).min(1.0 / 16.0);
        let m = (2.0 / step).ceil() as i64;
        let mut best = (0.0f64, [0.0; 3]);
        let mut consider = |x: [f64; 3]| {
            let v = self.eval(&x).abs();
            if v > best.0 {
                best = (v, x);
            }
        };
        for b in &self.bumps {
            consider(b.center);
        }
        let range = |a: usize| if a < self.n { 0..=m } else { 0..=0 };
        for i in range(0) {
            for j in range(1) {
                for k in range(2) {
                    let mut x = [0.0; 3];
                    for (a, idx) in [i, j, k].into_iter().enumerate().take(self.n) {
                        x[a] = -1.0 + idx as f64 * step;
                    }
                    consider(x);
                }
            }
        }
        // pattern search polish
        let (mut v, mut x) = best;
        let mut s = step;
        while s > 1e-10 {
            let mut moved = false;
            for a in 0..self.n {
                for sign in [-1.0, 1.0] {
                    let mut y = x;
                    y[a] += sign * s;
                    let w = self.eval(&y).abs();
                    if w > v {
                        v = w;
                        x = y;
                        moved = true;
                    }
                }
            }
            if !moved {
                s *= 0.5;
            }
        }
        v
    }
}

/// Seeded random ensemble of bump potentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    pub min_bumps: usize,
    pub max_bumps: usize,
    pub center_max: f64,
    pub radius_range: [f64; 2],
    pub amplitude_range: [f64; 2],
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            count: 20,
            seed: 7,
            min_bumps: 1,
            max_bumps: 3,
            center_max: 0.4,
            radius_range: [0.2, 0.4],
            amplitude_range: [-1.0, 1.0],
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let [r0, r1] = self.radius_range;
        let [a0, a1] = self.amplitude_range;
        if self.min_bumps == 0 || self.max_bumps < self.min_bumps {
            return Err(Error::Potential("bump count range is empty".into()));
        }
        if !(r0 > 0.0 && r1 >= r0) || !(a1 >= a0) {
            return Err(Error::Potential(
                "radius or amplitude range is invalid".into(),
            ));
        }
        if self.center_max < 0.0 || self.center_max + r1 >= 1.0 {
            return Err(Error::Potential(
                "center_max + max radius must stay below 1".into(),
            ));
        }
        Ok(())
    }

    pub fn generate(&self, n: usize) -> Result<Vec<Potential>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                let k = rng.gen_range(self.min_bumps..=self.max_bumps);
                let bumps = (0..k)
                    .map(|_| {
                        let center = loop {
                            let mut c = [0.0; 3];
                            for v in c.iter_mut().take(n) {
                                *v = rng.gen_range(-self.center_max..=self.center_max);
                            }
                            if norm(&c) <= self.center_max {
                                break c;
                            }
                        };
                        let radius = rng.gen_range(self.radius_range[0]..=self.radius_range[1]);
                        let amplitude =
                            rng.gen_range(self.amplitude_range[0]..=self.amplitude_range[1]);
                        Bump {
                            center,
                            radius,
                            amplitude,
                        }
                    })
                    .collect();
                Potential::new(n, bumps)
            })
            .collect()
    }
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let s = f(c - r * GK_X[i]) + f(c + r * GK_X[i]);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss-Kronrod (7, 15) quadrature.
pub fn adaptive_gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (v, e) = gk15(f, a, b);
    if depth == 0 || e <= tol.max(1e-15 * v.abs()) {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, 0.5 * tol, depth - 1) + adaptive_gk(f, m, b, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_zero() {
        let v = Potential::new(2, vec![]).unwrap();
        assert_eq!(v.eval(&[0.1, 0.2, 0.0]), 0.0);
        assert_eq!(v.sup_bound, 0.0);
        assert_eq!(v.halfline_integral(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn centered_bump_value() {
        let v = Potential::new(2, vec![Bump::new([0.0; 3], 0.5, 1.0)]).unwrap();
        assert!((v.eval(&[0.0; 3]) - (-1f64).exp()).abs() < 1e-15);
        assert!((v.sup_bound - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn support_violations() {
        assert!(Potential::new(2, vec![Bump::new([0.6, 0.0, 0.0], 0.4, 1.0)]).is_err());
        assert!(Potential::new(2, vec![Bump::new([0.0; 3], 0.0, 1.0)]).is_err());
        assert!(Potential::new(2, vec![Bump::new([0.0; 3], -0.2, 1.0)]).is_err());
    }

    #[test]
    fn gk_matches_polynomial_and_gaussian() {
        let v = adaptive_gk(&|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 30);
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-12);
        let g = adaptive_gk(&|x| (-x * x).exp(), -10.0, 10.0, 1e-14, 30);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let b = Bump::new([0.1, -0.2, 0.0], 0.5, 0.7);
        let x = [0.25, -0.1, 0.0];
        let (v, g, l) = b.eval_with_laplacian(2, &x);
        let h = 1e-4;
        let mut lap = 0.0;
        for a in 0..2 {
            let mut p = x;
            let mut m = x;
            p[a] += h;
            m[a] -= h;
            lap += (b.eval(&p) - 2.0 * v + b.eval(&m)) / (h * h);
            let fd = (b.eval(&p) - b.eval(&m)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-7);
        }
        assert!((lap - l).abs() < 1e-5 * l.abs().max(1.0));
    }

    #[test]
    fn ensemble_is_seeded_and_valid() {
        let spec = EnsembleSpec {
            count: 6,
            ..Default::default()
        };
        let a = spec.generate(2).unwrap();
        let b = spec.generate(2).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!((1..=3).contains(&p.bumps.len()));
            for bump in &p.bumps {
                assert!(norm(&bump.center) <= 0.4 + 1e-12);
                assert!((0.2..=0.4).contains(&bump.radius));
            }
        }
    }
}
