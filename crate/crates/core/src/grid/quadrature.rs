//! Quadrature over `Q`, `Sigma`, `Gamma`, the top slice and the ball.
//!
//! Rules stream their nodes through a visitor, so no node list for the
//! full cylinder is ever materialized.

use serde::{Deserialize, Serialize};

use super::{SpaceTimeGrid, SphereSamples};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// The cylinder `{x in B, x_n <= t <= T}`.
    Q,
    /// Lateral boundary `{|x| = 1, x_n <= t <= T}`, measure `ds dt`.
    Sigma,
    /// Characteristic slice `{t = x_n}`, surface measure `dS = sqrt(2) dx`.
    Gamma,
    /// `{t = T}`, measure `dx`.
    Top,
    /// The unit ball alone; points carry `t = 0`.
    Ball,
    /// The ball at a fixed time.
    Slice(f64),
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::Q => write!(f, "Q"),
            Region::Sigma => write!(f, "Sigma"),
            Region::Gamma => write!(f, "Gamma"),
            Region::Top => write!(f, "Top"),
            Region::Ball => write!(f, "Ball"),
            Region::Slice(t) => write!(f, "Slice({t})"),
        }
    }
}

/// Where a quadrature point sits relative to the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeTag {
    /// Spatial grid node; `level` is set when the time is a grid level.
    Grid {
        node: usize,
        level: Option<usize>,
    },
    /// Sphere sample of the rule.
    Sphere {
        sample: usize,
        level: Option<usize>,
    },
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QPoint {
    pub x: [f64; 3],
    pub t: f64,
    /// Outward unit normal on `Sigma`, zero elsewhere.
    pub normal: [f64; 3],
    pub tag: NodeTag,
}

pub trait QuadRule: Sync {
    fn dim(&self) -> usize;
    fn t_end(&self) -> f64;
    /// Typical node spacing, used for resolution diagnostics.
    fn spacing(&self) -> f64;
    fn visit(&self, region: Region, f: &mut dyn FnMut(&QPoint, f64));
}

pub fn quad<R: QuadRule + ?Sized>(
    rule: &R,
    region: Region,
    f: impl Fn(&QPoint) -> f64,
) -> Result<f64> {
    let [v] = quad_many(rule, region, |p| [f(p)])?;
    Ok(v)
}

/// Several integrals over one pass of the nodes.
pub fn quad_many<R: QuadRule + ?Sized, const K: usize>(
    rule: &R,
    region: Region,
    mut f: impl FnMut(&QPoint) -> [f64; K],
) -> Result<[f64; K]> {
    let mut acc = [0.0; K];
    let mut count = 0usize;
    rule.visit(region, &mut |p, w| {
        count += 1;
        let v = f(p);
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += w * vi;
        }
    });
    if count == 0 {
        return Err(Error::EmptyRegion(region.to_string()));
    }
    Ok(acc)
}

/// Integrals of `exp(L(p)) * v_k(p)` with a shared running exponent offset.
pub fn quad_log_many<R: QuadRule + ?Sized, const K: usize>(
    rule: &R,
    region: Region,
    mut f: impl FnMut(&QPoint) -> (f64, [f64; K]),
) -> Result<[LogScaled; K]> {
    let mut offset = f64::NEG_INFINITY;
    let mut acc = [0.0; K];
    let mut count = 0usize;
    rule.visit(region, &mut |p, w| {
        count += 1;
        let (l, v) = f(p);
        if l > offset {
            if offset.is_finite() {
                let r = (offset - l).exp();
                for a in acc.iter_mut() {
                    *a *= r;
                }
            }
            offset = l;
        }
        let e = (l - offset).exp() * w;
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += e * vi;
        }
    });
    if count == 0 {
        return Err(Error::EmptyRegion(region.to_string()));
    }
    let offset = if offset.is_finite() { offset } else { 0.0 };
    Ok(acc.map(|m| LogScaled {
        mantissa: m,
        log_scale: offset,
    }))
}

/// `mantissa * exp(log_scale)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogScaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl LogScaled {
    pub fn from_value(v: f64) -> Self {
        Self {
            mantissa: v,
            log_scale: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            mantissa: self.mantissa * c,
            log_scale: self.log_scale,
        }
    }

    pub fn add(self, other: Self) -> Self {
        if self.mantissa == 0.0 {
            return other;
        }
        if other.mantissa == 0.0 {
            return self;
        }
        let top = self.log_scale.max(other.log_scale);
        Self {
            mantissa: self.mantissa * (self.log_scale - top).exp()
                + other.mantissa * (other.log_scale - top).exp(),
            log_scale: top,
        }
    }

    /// `self / other` without forming either value.
    pub fn ratio(&self, other: &Self) -> f64 {
        self.mantissa / other.mantissa * (self.log_scale - other.log_scale).exp()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let pi = std::f64::consts::PI;
    for i in 0..m.div_ceil(2) {
        let mut z = (pi * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Composite trapezoid on the grid's time levels over `[start, T]`, with a
/// partial first cell ending at the first level after `start`.
fn grid_time_rule(grid: &SpaceTimeGrid, start: f64, f: &mut dyn FnMut(f64, f64, Option<usize>)) {
    let last = grid.nt - 1;
    let kf = grid.level_at_or_after(start).min(last);
    let tf = grid.time(kf);
    let delta = tf - start;
    if delta > 1e-12 * grid.dt {
        f(start, 0.5 * delta, None);
    }
    let head = if delta > 1e-12 * grid.dt {
        0.5 * delta
    } else {
        0.0
    };
    if kf == last {
        f(tf, head, Some(kf));
        return;
    }
    for k in kf..=last {
        let mut w = if k == kf || k == last {
            0.5 * grid.dt
        } else {
            grid.dt
        };
        if k == kf {
            w += head;
        }
        f(grid.time(k), w, Some(k));
    }
}

/// Trapezoid-type rule on the solver grid: exact cut-cell volumes for the
/// ball, sphere samples for `Sigma`, grid levels in time.
#[derive(Clone, Copy, Debug)]
pub struct GridRule<'g> {
    pub grid: &'g SpaceTimeGrid,
}

impl<'g> GridRule<'g> {
    pub fn new(grid: &'g SpaceTimeGrid) -> Self {
        Self { grid }
    }
}

impl QuadRule for GridRule<'_> {
    fn dim(&self) -> usize {
        self.grid.n
    }

    fn t_end(&self) -> f64 {
        self.grid.t_end
    }

    fn spacing(&self) -> f64 {
        self.grid.h
    }

    fn visit(&self, region: Region, f: &mut dyn FnMut(&QPoint, f64)) {
        let g = self.grid;
        let zero = [0.0; 3];
        match region {
            Region::Q => {
                for b in g.ball_nodes() {
                    let xn = g.xn(&b.x);
                    grid_time_rule(g, xn, &mut |t, wt, level| {
                        let p = QPoint {
                            x: b.x,
                            t,
                            normal: zero,
                            tag: NodeTag::Grid {
                                node: b.index,
                                level,
                            },
                        };
                        f(&p, b.weight * wt);
                    });
                }
            }
            Region::Sigma => {
                for (m, (y, ws)) in g.sphere.points.iter().zip(&g.sphere.weights).enumerate() {
                    let xn = g.xn(y);
                    grid_time_rule(g, xn, &mut |t, wt, level| {
                        let p = QPoint {
                            x: *y,
                            t,
                            normal: *y,
                            tag: NodeTag::Sphere { sample: m, level },
                        };
                        f(&p, ws * wt);
                    });
                }
            }
            Region::Gamma | Region::Top | Region::Ball | Region::Slice(_) => {
                let scale = if region == Region::Gamma {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                for b in g.ball_nodes() {
                    let (t, level) = match region {
                        Region::Gamma => (g.xn(&b.x), None),
                        Region::Top => (g.t_end, Some(g.nt - 1)),
                        Region::Slice(t) => (t, None),
                        _ => (0.0, None),
                    };
                    let p = QPoint {
                        x: b.x,
                        t,
                        normal: zero,
                        tag: NodeTag::Grid {
                            node: b.index,
                            level,
                        },
                    };
                    f(&p, scale * b.weight);
                }
            }
        }
    }
}

/// Spectral rule for analytic integrands: Gauss in the radius, equispaced
/// azimuth (Gauss in the polar cosine for n = 3), composite Gauss in time.
#[derive(Clone, Debug)]
pub struct GaussRule {
    n: usize,
    t_end: f64,
    ball: Vec<([f64; 3], f64)>,
    sphere: SphereSamples,
    time_nodes: Vec<f64>,
    time_weights: Vec<f64>,
    time_panels: usize,
    spacing: f64,
}

impl GaussRule {
    pub fn new(
        n: usize,
        t_end: f64,
        radial: usize,
        angular: usize,
        time_panels: usize,
        time_order: usize,
    ) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {n}")));
        }
        if radial == 0 || angular < 4 || time_panels == 0 || time_order == 0 {
            return Err(Error::Grid("Gauss rule needs positive node counts".into()));
        }
        let (r, wr) = gauss_legendre(radial);
        let sphere = if n == 2 {
            SphereSamples::new(2, angular, 0.5)
        } else {
            SphereSamples::new(3, angular.div_ceil(2), 0.5)
        };
        let mut ball = Vec::with_capacity(radial * sphere.len());
        for (ri, wi) in r.iter().zip(&wr) {
            let rho = 0.5 * (ri + 1.0);
            let jac = 0.5 * wi * rho.powi(n as i32 - 1);
            for (y, ws) in sphere.points.iter().zip(&sphere.weights) {
                ball.push(([rho * y[0], rho * y[1], rho * y[2]], jac * ws));
            }
        }
        let (tn, tw) = gauss_legendre(time_order);
        let spacing = (std::f64::consts::TAU / angular as f64).max(2.0 / radial as f64);
        Ok(Self {
            n,
            t_end,
            ball,
            sphere,
            time_nodes: tn,
            time_weights: tw,
            time_panels,
            spacing,
        })
    }

    /// Rule that resolves weights `exp(2 s phi)` for the default parameters.
    pub fn standard(n: usize, t_end: f64) -> Result<Self> {
        if n == 2 {
            Self::new(2, t_end, 64, 256, 4, 16)
        } else {
            Self::new(3, t_end, 24, 48, 4, 12)
        }
    }

    fn time_rule(&self, start: f64, f: &mut dyn FnMut(f64, f64)) {
        let len = (self.t_end - start) / self.time_panels as f64;
        for p in 0..self.time_panels {
            let a = start + p as f64 * len;
            for (g, w) in self.time_nodes.iter().zip(&self.time_weights) {
                f(a + 0.5 * len * (g + 1.0), 0.5 * len * w);
            }
        }
    }
}

impl QuadRule for GaussRule {
    fn dim(&self) -> usize {
        self.n
    }

    fn t_end(&self) -> f64 {
        self.t_end
    }

    fn spacing(&self) -> f64 {
        self.spacing
    }

    fn visit(&self, region: Region, f: &mut dyn FnMut(&QPoint, f64)) {
        let n = self.n;
        let zero = [0.0; 3];
        match region {
            Region::Q => {
                for (x, wb) in &self.ball {
                    self.time_rule(x[n - 1], &mut |t, wt| {
                        f(
                            &QPoint {
                                x: *x,
                                t,
                                normal: zero,
                                tag: NodeTag::Free,
                            },
                            wb * wt,
                        );
                    });
                }
            }
            Region::Sigma => {
                for (m, (y, ws)) in self
                    .sphere
                    .points
                    .iter()
                    .zip(&self.sphere.weights)
                    .enumerate()
                {
                    self.time_rule(y[n - 1], &mut |t, wt| {
                        let tag = NodeTag::Sphere {
                            sample: m,
                            level: None,
                        };
                        f(
                            &QPoint {
                                x: *y,
                                t,
                                normal: *y,
                                tag,
                            },
                            ws * wt,
                        );
                    });
                }
            }
            Region::Gamma | Region::Top | Region::Ball | Region::Slice(_) => {
                let scale = if region == Region::Gamma {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                for (x, wb) in &self.ball {
                    let t = match region {
                        Region::Gamma => x[n - 1],
                        Region::Top => self.t_end,
                        Region::Slice(t) => t,
                        _ => 0.0,
                    };
                    f(
                        &QPoint {
                            x: *x,
                            t,
                            normal: zero,
                            tag: NodeTag::Free,
                        },
                        scale * wb,
                    );
                }
            }
        }
    }
}

#[cfg(test)]
fn on_unit_sphere(x: &[f64; 3]) -> bool {
    (super::norm(x) - 1.0).abs() < 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;

    #[test]
    fn gauss_legendre_exactness() {
        for m in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let got: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(deg as i32))
                    .sum();
                let want = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-13, "m={m} deg={deg} {got} {want}");
            }
        }
    }

    #[test]
    fn log_scaled_accumulation() {
        let a = LogScaled {
            mantissa: 2.0,
            log_scale: 700.0,
        };
        let b = LogScaled {
            mantissa: 3.0,
            log_scale: 701.0,
        };
        let c = a.add(b);
        assert!((c.ratio(&a) - (1.0 + 1.5 * 1f64.exp())).abs() < 1e-12);
        assert_eq!(LogScaled::default().add(a), a);
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = SpaceTimeGrid::build(&GridConfig::default()).unwrap();
        let rule = GridRule::new(&g);
        for r in [
            Region::Q,
            Region::Sigma,
            Region::Gamma,
            Region::Top,
            Region::Ball,
        ] {
            assert_eq!(quad(&rule, r, |_| 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn sigma_points_on_sphere() {
        let g = SpaceTimeGrid::build(&GridConfig::default()).unwrap();
        let mut ok = true;
        GridRule::new(&g).visit(Region::Sigma, &mut |p, _| {
            ok &= on_unit_sphere(&p.x) && on_unit_sphere(&p.normal)
        });
        assert!(ok);
    }

    #[test]
    fn time_rule_integrates_linear_exactly() {
        let g = SpaceTimeGrid::build(&GridConfig::default()).unwrap();
        for start in [-1.0, -0.3337, 0.0, 0.71] {
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            grid_time_rule(&g, start, &mut |t, w, _| {
                s0 += w;
                s1 += w * t;
            });
            assert!((s0 - (6.5 - start)).abs() < 1e-12);
            assert!((s1 - 0.5 * (6.5f64.powi(2) - start * start)).abs() < 1e-10);
        }
    }

    #[test]
    fn gauss_rule_volumes() {
        let pi = std::f64::consts::PI;
        let r2 = GaussRule::new(2, 6.5, 8, 16, 1, 4).unwrap();
        assert!((quad(&r2, Region::Ball, |_| 1.0).unwrap() - pi).abs() < 1e-13);
        // |Q| = int_B (T - x_n) dx = pi T
        assert!((quad(&r2, Region::Q, |_| 1.0).unwrap() - pi * 6.5).abs() < 1e-12);
        let r3 = GaussRule::new(3, 6.5, 8, 16, 1, 4).unwrap();
        assert!((quad(&r3, Region::Ball, |_| 1.0).unwrap() - 4.0 * pi / 3.0).abs() < 1e-13);
        assert!((quad(&r3, Region::Sigma, |_| 1.0).unwrap() - 4.0 * pi * 6.5).abs() < 1e-11);
    }
}
