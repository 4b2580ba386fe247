//! Space-time discretization of the characteristic cylinder
//! `Q = {x in B, x_n <= t <= T}` and its boundary pieces.
//!
//! Spatial nodes live on a uniform box `[-L, L]^n`; axis `n - 1` is `x_n`,
//! the incidence direction. Time levels are anchored at `T`, so the last
//! level lands exactly on the top slice.

mod field;
mod quadrature;

pub use field::{Axis, SpaceTimeField};
pub use quadrature::{
    gauss_legendre, quad, quad_log_many, quad_many, GaussRule, GridRule, LogScaled, NodeTag,
    QPoint, QuadRule, Region,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the time slot in four-component space-time vectors.
pub const TIME: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(alias = "L")]
    pub half_width: f64,
    pub h: f64,
    pub dt_factor: f64,
    pub t0: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub sponge_width: f64,
    /// Number of sphere samples (circle points for n = 2, polar nodes for n = 3).
    pub sphere_points: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 2,
            half_width: 3.25,
            h: 1.0 / 32.0,
            dt_factor: 0.5,
            t0: -2.0,
            t_end: 6.5,
            sponge_width: 0.5,
            sphere_points: None,
        }
    }
}

impl GridConfig {
    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }
}

/// Points on the unit sphere with surface weights. The outward normal at a
/// sample is the sample itself.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereSamples {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Samples per unit arc length along a great circle.
    pub linear_density: f64,
}

impl SphereSamples {
    /// `count` equispaced angles for n = 2; for n = 3, `count` Gauss nodes
    /// in `cos(theta)` times `2 count` equispaced azimuths. `rotation` is a
    /// fraction of one angular step.
    pub fn new(n: usize, count: usize, rotation: f64) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let tau = std::f64::consts::TAU;
        if n == 2 {
            let step = tau / count as f64;
            for m in 0..count {
                let th = (m as f64 + rotation) * step;
                points.push([th.cos(), th.sin(), 0.0]);
                weights.push(step);
            }
            return Self {
                points,
                weights,
                linear_density: count as f64 / tau,
            };
        }
        let (mu, wmu) = gauss_legendre(count);
        let naz = 2 * count;
        let step = tau / naz as f64;
        for (c, wc) in mu.iter().zip(&wmu) {
            let s = (1.0 - c * c).sqrt();
            for m in 0..naz {
                let ph = (m as f64 + rotation) * step;
                // x_n is the polar axis
                points.push([s * ph.cos(), s * ph.sin(), *c]);
                weights.push(wc * step);
            }
        }
        Self {
            points,
            weights,
            linear_density: naz as f64 / tau,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Spatial node inside (or cut by) the unit ball, with its cut-cell volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallNode {
    pub index: usize,
    pub x: [f64; 3],
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct SpaceTimeGrid {
    pub n: usize,
    pub nx: usize,
    pub h: f64,
    pub dt: f64,
    /// Box half-width after snapping to the spacing.
    pub half_width: f64,
    /// First time level; at most the configured `t0`.
    pub t0: f64,
    pub t_end: f64,
    pub nt: usize,
    pub sponge_width: f64,
    pub sphere: SphereSamples,
    ball: Vec<BallNode>,
}

impl SpaceTimeGrid {
    pub fn build(cfg: &GridConfig) -> Result<Self> {
        let n = cfg.n;
        if n != 2 && n != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {n}")));
        }
        if !(cfg.h > 0.0) || !cfg.h.is_finite() {
            return Err(Error::Grid(format!(
                "spacing must be positive, got {}",
                cfg.h
            )));
        }
        if !(cfg.t_end > 1.0) {
            return Err(Error::Grid(format!("T must exceed 1, got {}", cfg.t_end)));
        }
        if !(cfg.t0 < -1.0) {
            return Err(Error::Grid(format!("t0 must be below -1, got {}", cfg.t0)));
        }
        let dt = cfg.dt_factor * cfg.h;
        let limit = cfg.h / (n as f64).sqrt();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let cells = (2.0 * cfg.half_width / cfg.h).round() as usize;
        let nx = cells + 1;
        let half_width = cells as f64 * cfg.h / 2.0;
        if cfg.sponge_width < 0.0 || half_width - cfg.sponge_width < 1.0 + 2.0 * cfg.h {
            return Err(Error::Grid(format!(
                "box half-width {half_width} minus sponge {} leaves no room around the unit ball",
                cfg.sponge_width
            )));
        }
        let nt = ((cfg.t_end - cfg.t0) / dt - 1e-9).ceil() as usize + 1;
        let t0 = cfg.t_end - (nt - 1) as f64 * dt;
        let count = cfg.sphere_points.unwrap_or(if n == 2 {
            let m = (std::f64::consts::TAU / cfg.h).ceil() as usize;
            m.max(64).div_ceil(4) * 4
        } else {
            ((1.0 / cfg.h).ceil() as usize).max(8)
        });
        if count < 4 {
            return Err(Error::Grid("too few sphere samples".into()));
        }
        let mut grid = Self {
            n,
            nx,
            h: cfg.h,
            dt,
            half_width,
            t0,
            t_end: cfg.t_end,
            nt,
            sponge_width: cfg.sponge_width,
            sphere: SphereSamples::new(n, count, 0.5),
            ball: Vec::new(),
        };
        grid.ball = grid.compute_ball_weights();
        Ok(grid)
    }

    pub fn spatial_len(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn axis_coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.h
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.nx.pow(axis as u32)
    }

    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let mut m = [0; 3];
        let mut r = index;
        for item in m.iter_mut().take(self.n) {
            *item = r % self.nx;
            r /= self.nx;
        }
        m
    }

    pub fn flat_index(&self, m: [usize; 3]) -> usize {
        (0..self.n).rev().fold(0, |acc, a| acc * self.nx + m[a])
    }

    pub fn coord(&self, index: usize) -> [f64; 3] {
        let m = self.multi_index(index);
        let mut x = [0.0; 3];
        for a in 0..self.n {
            x[a] = self.axis_coord(m[a]);
        }
        x
    }

    /// `x_n` of a point.
    pub fn xn(&self, x: &[f64; 3]) -> f64 {
        x[self.n - 1]
    }

    pub fn in_box(&self, x: &[f64; 3]) -> bool {
        (0..self.n).all(|a| x[a].abs() <= self.half_width + 1e-12)
    }

    /// Nodes whose dual cell meets the unit ball, with exact cut-cell volumes.
    pub fn ball_nodes(&self) -> &[BallNode] {
        &self.ball
    }

    /// First time level at or after `t`.
    pub fn level_at_or_after(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt - 1e-9).ceil();
        k.max(0.0) as usize
    }

    /// Grid nodes (spatial index, level) with `|t - x_n| <= dt/2` and `|x| < 1`.
    pub fn gamma_nodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.spatial_len() {
            let x = self.coord(i);
            if norm(&x) >= 1.0 {
                continue;
            }
            let xn = self.xn(&x);
            let lo = ((xn - 0.5 * self.dt - self.t0) / self.dt - 1e-9)
                .ceil()
                .max(0.0) as usize;
            let hi = ((xn + 0.5 * self.dt - self.t0) / self.dt + 1e-9).floor() as usize;
            for k in lo..=hi.min(self.nt - 1) {
                out.push((i, k));
            }
        }
        out
    }

    /// Whether the node `(i, k)` lies in the closed cylinder `Q`.
    pub fn in_q(&self, index: usize, level: usize) -> bool {
        let x = self.coord(index);
        let t = self.time(level);
        norm(&x) <= 1.0 && t >= self.xn(&x) - 1e-12 && t <= self.t_end + 1e-12
    }

    fn compute_ball_weights(&self) -> Vec<BallNode> {
        let h = self.h;
        let reach = 1.0 + h;
        let mut out = Vec::new();
        for i in 0..self.spatial_len() {
            let x = self.coord(i);
            if (0..self.n).any(|a| x[a].abs() > reach) {
                continue;
            }
            let w = cell_ball_volume(self.n, &x, h);
            if w > 0.0 {
                out.push(BallNode {
                    index: i,
                    x,
                    weight: w,
                });
            }
        }
        out
    }
}

pub fn norm(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Volume of the dual cell `x + [-h/2, h/2]^n` intersected with the unit ball.
pub fn cell_ball_volume(n: usize, x: &[f64; 3], h: f64) -> f64 {
    let half = 0.5 * h;
    let mut near = 0.0;
    let mut far = 0.0;
    for &c in x.iter().take(n) {
        let lo = c.abs() - half;
        near += if lo > 0.0 { lo * lo } else { 0.0 };
        far += (c.abs() + half).powi(2);
    }
    if far <= 1.0 {
        return h.powi(n as i32);
    }
    if near >= 1.0 {
        return 0.0;
    }
    if n == 2 {
        return rect_disc_area(x[0] - half, x[0] + half, x[1] - half, x[1] + half, 1.0);
    }
    let za = (x[2] - half).max(-1.0);
    let zb = (x[2] + half).min(1.0);
    if zb <= za {
        return 0.0;
    }
    // the slice area has kinks, so use many Gauss nodes
    let (g, w) = gauss_legendre(24);
    let mid = 0.5 * (za + zb);
    let rad = 0.5 * (zb - za);
    let mut v = 0.0;
    for (gi, wi) in g.iter().zip(&w) {
        let z = mid + rad * gi;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        v += wi * rect_disc_area(x[0] - half, x[0] + half, x[1] - half, x[1] + half, rho);
    }
    v * rad
}

/// Area of `[xa, xb] x [ya, yb]` intersected with the disc of radius `r`.
pub fn rect_disc_area(xa: f64, xb: f64, ya: f64, yb: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let (xa, xb, ya, yb) = (xa / r, xb / r, ya / r, yb / r);
    let a = xa.max(-1.0);
    let b = xb.min(1.0);
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    for y in [ya, yb] {
        if y.abs() < 1.0 {
            let c = (1.0 - y * y).sqrt();
            for v in [-c, c] {
                if v > a && v < b {
                    cuts.push(v);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let root = |x: f64| (1.0 - x * x).max(0.0).sqrt();
    // antiderivative of sqrt(1 - x^2)
    let big_f = |x: f64| {
        let x = x.clamp(-1.0, 1.0);
        0.5 * (x * root(x) + x.asin())
    };
    let mut area = 0.0;
    for win in cuts.windows(2) {
        let (p, q) = (win[0], win[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let s = root(m);
        let upper_is_arc = s <= yb;
        let lower_is_arc = -s >= ya;
        let top = if upper_is_arc { s } else { yb };
        let bot = if lower_is_arc { -s } else { ya };
        if top <= bot {
            continue;
        }
        let arc = big_f(q) - big_f(p);
        let len = q - p;
        let up = if upper_is_arc { arc } else { yb * len };
        let lo = if lower_is_arc { -arc } else { ya * len };
        area += up - lo;
    }
    area * r * r
}
