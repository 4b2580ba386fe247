//! Traces of a solved field on `Sigma`, near `Gamma` and on the top slice.
//!
//! Everything is recorded while the solve streams its levels, so a full
//! space-time field is never needed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::stepper::Levels;
use super::{SolverConfig, WaveField};
use crate::error::{Error, Result};
use crate::grid::{norm, SpaceTimeField, SpaceTimeGrid};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub u: f64,
    pub ut: f64,
    pub grad: [f64; 3],
}

impl TraceSample {
    fn axpy(&mut self, w: f64, o: &Self) {
        self.u += w * o.u;
        self.ut += w * o.ut;
        for a in 0..3 {
            self.grad[a] += w * o.grad[a];
        }
    }

    pub fn lerp(&self, o: &Self, f: f64) -> Self {
        let mut s = Self::default();
        s.axpy(1.0 - f, self);
        s.axpy(f, o);
        s
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut s = *self;
        s.axpy(-1.0, o);
        s
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut s = Self::default();
        s.axpy(c, self);
        s
    }

    /// `|grad u|^2 + u_t^2 + u^2`.
    pub fn energy(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>() + self.ut * self.ut + self.u * self.u
    }
}

/// Spatial node near the ball with its cut-cell volume (zero outside `B`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaNode {
    pub index: usize,
    pub x: [f64; 3],
    pub weight: f64,
}

/// `u_s(x, x_n + offset eps)` per gamma node; `None` past `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTrace {
    pub offset: f64,
    pub samples: Vec<Option<TraceSample>>,
}

/// Least-squares fit of the smeared front at one node. `value` estimates
/// `u(x, x_n+)` and `char_deriv` estimates `(d_n + d_t) u` there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontFit {
    pub value: f64,
    pub char_deriv: f64,
    pub rms_u: f64,
    pub rms_d: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopNode {
    pub x: [f64; 3],
    pub weight: f64,
    pub sample: TraceSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub n: usize,
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub settle: f64,
    pub sigma_points: Vec<[f64; 3]>,
    pub sigma_weights: Vec<f64>,
    /// Time of `sigma[0]`.
    pub sigma_t0: f64,
    /// `[level][sample]`.
    pub sigma: Vec<Vec<TraceSample>>,
    pub gamma_nodes: Vec<GammaNode>,
    pub gamma: Vec<GammaTrace>,
    pub front: Vec<Option<FrontFit>>,
    pub top: Vec<TopNode>,
}

impl BoundaryTrace {
    pub fn offset(&self, offset: f64) -> Result<&GammaTrace> {
        self.gamma
            .iter()
            .find(|g| (g.offset - offset).abs() < 1e-12)
            .ok_or(Error::OffsetNotRecorded(offset))
    }

    fn same_shape(&self, o: &Self) -> bool {
        self.n == o.n
            && self.sigma.len() == o.sigma.len()
            && self.sigma_points == o.sigma_points
            && self.gamma_nodes.len() == o.gamma_nodes.len()
            && self.gamma.len() == o.gamma.len()
            && self.top.len() == o.top.len()
            && (self.sigma_t0 - o.sigma_t0).abs() < 1e-12
            && (self.dt - o.dt).abs() < 1e-15
    }

    /// Pointwise `self - other`; both must come from the same grid.
    pub fn difference(&self, o: &Self) -> Result<Self> {
        if !self.same_shape(o) {
            return Err(Error::Invalid("traces come from different grids".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.sigma.iter_mut().zip(&o.sigma) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = x.sub(y);
            }
        }
        for (ga, gb) in out.gamma.iter_mut().zip(&o.gamma) {
            for (x, y) in ga.samples.iter_mut().zip(&gb.samples) {
                *x = match (*x, y) {
                    (Some(a), Some(b)) => Some(a.sub(b)),
                    _ => None,
                };
            }
        }
        for (x, y) in out.front.iter_mut().zip(&o.front) {
            *x = match (*x, y) {
                (Some(a), Some(b)) => Some(FrontFit {
                    value: a.value - b.value,
                    char_deriv: a.char_deriv - b.char_deriv,
                    rms_u: a.rms_u.hypot(b.rms_u),
                    rms_d: a.rms_d.hypot(b.rms_d),
                    samples: a.samples.min(b.samples),
                }),
                _ => None,
            };
        }
        for (x, y) in out.top.iter_mut().zip(&o.top) {
            x.sample = x.sample.sub(&y.sample);
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.sigma.iter_mut().flatten().for_each(|s| *s = s.scale(c));
        for g in out.gamma.iter_mut() {
            g.samples.iter_mut().flatten().for_each(|s| *s = s.scale(c));
        }
        for f in out.front.iter_mut().flatten() {
            f.value *= c;
            f.char_deriv *= c;
            f.rms_u *= c.abs();
            f.rms_d *= c.abs();
        }
        out.top
            .iter_mut()
            .for_each(|t| t.sample = t.sample.scale(c));
        out
    }

    /// `int f(trace) ds dt` over `{|x| = 1, x_n + start_offset eps <= t <= T}`.
    pub fn sigma_integral(&self, start_offset: f64, f: impl Fn(&TraceSample) -> f64) -> f64 {
        let levels = self.sigma.len();
        if levels == 0 {
            return 0.0;
        }
        let last_t = self.sigma_t0 + (levels - 1) as f64 * self.dt;
        let mut total = 0.0;
        for (j, (p, w)) in self
            .sigma_points
            .iter()
            .zip(&self.sigma_weights)
            .enumerate()
        {
            let start = (p[self.n - 1] + start_offset * self.eps).max(self.sigma_t0);
            if start >= last_t {
                continue;
            }
            let pos = (start - self.sigma_t0) / self.dt;
            let l0 = (pos - 1e-9).ceil().max(0.0) as usize;
            let mut acc = 0.0;
            let t_l0 = self.sigma_t0 + l0 as f64 * self.dt;
            let head = t_l0 - start;
            if head > 1e-12 * self.dt && l0 > 0 {
                let fr = 1.0 - head / self.dt;
                let s0 = self.sigma[l0 - 1][j].lerp(&self.sigma[l0][j], fr);
                acc += 0.5 * head * (f(&s0) + f(&self.sigma[l0][j]));
            }
            for l in l0..levels - 1 {
                acc += 0.5 * self.dt * (f(&self.sigma[l][j]) + f(&self.sigma[l + 1][j]));
            }
            total += w * acc;
        }
        total
    }

    /// `int f dS` over `Gamma` at one recorded offset, skipping flagged nodes.
    pub fn gamma_integral(
        &self,
        offset: f64,
        f: impl Fn(&[f64; 3], &TraceSample) -> f64,
    ) -> Result<f64> {
        let g = self.offset(offset)?;
        Ok(std::f64::consts::SQRT_2
            * self
                .gamma_nodes
                .iter()
                .zip(&g.samples)
                .filter_map(|(node, s)| s.map(|s| node.weight * f(&node.x, &s)))
                .sum::<f64>())
    }
}

/// `sqrt(int_Sigma |grad w|^2 + w_t^2 + w^2)` over the settled window.
pub fn h1_sigma_norm(trace: &BoundaryTrace) -> f64 {
    trace
        .sigma_integral(trace.settle, TraceSample::energy)
        .max(0.0)
        .sqrt()
}

/// The recorded trace at `t = x_n + offset eps`.
pub fn characteristic_trace(field: &WaveField, offset: f64) -> Result<&GammaTrace> {
    if offset < 4.0 {
        return Err(Error::Invalid(format!(
            "offset {offset} eps is inside the smeared jump; use at least 4"
        )));
    }
    field.trace.offset(offset)
}

pub fn front_trace(field: &WaveField) -> &[Option<FrontFit>] {
    &field.trace.front
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Largest polynomial order of the front model.
pub const MAX_FIT_ORDER: usize = 3;
const NB: usize = MAX_FIT_ORDER + 1;

/// Smeared `tau^k H`, scaled by `eps^-k`, for `k <= MAX_FIT_ORDER`.
fn front_basis(tau: f64, eps: f64) -> [f64; NB] {
    let z = tau / eps;
    let mut b = [0.0; NB];
    b[0] = normal_cdf(z);
    b[1] = z * b[0] + normal_pdf(z);
    for k in 2..NB {
        b[k] = z * b[k - 1] + (k - 1) as f64 * b[k - 2];
    }
    b
}

#[derive(Clone, Copy)]
struct FitAcc {
    terms: usize,
    ata: [[f64; NB]; NB],
    aty: [[f64; NB]; 2],
    yy: [f64; 2],
    count: usize,
}

impl FitAcc {
    fn new(order: usize) -> Self {
        Self {
            terms: order + 1,
            ata: [[0.0; NB]; NB],
            aty: [[0.0; NB]; 2],
            yy: [0.0; 2],
            count: 0,
        }
    }

    fn add(&mut self, b: [f64; NB], y: [f64; 2]) {
        let m = self.terms;
        for i in 0..m {
            for j in 0..m {
                self.ata[i][j] += b[i] * b[j];
            }
            for (r, yr) in y.iter().enumerate() {
                self.aty[r][i] += b[i] * yr;
            }
        }
        for (r, yr) in y.iter().enumerate() {
            self.yy[r] += yr * yr;
        }
        self.count += 1;
    }

    fn solve(&self) -> Option<FrontFit> {
        let m = self.terms;
        if self.count <= m {
            return None;
        }
        let c = [
            solve_small(&self.ata, &self.aty[0], m)?,
            solve_small(&self.ata, &self.aty[1], m)?,
        ];
        let rms = |r: usize| {
            let fit: f64 = (0..m).map(|i| c[r][i] * self.aty[r][i]).sum();
            ((self.yy[r] - fit).max(0.0) / self.count as f64).sqrt()
        };
        Some(FrontFit {
            value: c[0][0],
            char_deriv: c[1][0],
            rms_u: rms(0),
            rms_d: rms(1),
            samples: self.count,
        })
    }
}

/// Gauss-Jordan with partial pivoting on the leading `m x m` block.
fn solve_small(a: &[[f64; NB]; NB], b: &[f64; NB], m: usize) -> Option<[f64; NB]> {
    let mut w = [[0.0; NB + 1]; NB];
    for i in 0..m {
        w[i][..m].copy_from_slice(&a[i][..m]);
        w[i][NB] = b[i];
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| w[i][col].abs().total_cmp(&w[j][col].abs()))?;
        if w[piv][col].abs() < 1e-300 {
            return None;
        }
        w.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = w[r][col] / w[col][col];
                for c in col..m {
                    w[r][c] -= f * w[col][c];
                }
                w[r][NB] -= f * w[col][NB];
            }
        }
    }
    let mut x = [0.0; NB];
    for i in 0..m {
        x[i] = w[i][NB] / w[i][i];
    }
    Some(x)
}

/// Sample of value, time derivative and gradient at node `idx` on level `k + r`.
fn node_sample(grid: &SpaceTimeGrid, lv: &Levels, r: i32, idx: usize) -> TraceSample {
    let cur = lv.get(r).expect("level present");
    let u = cur[idx];
    let dt = grid.dt;
    let ut = match (lv.get(r - 1), lv.get(r + 1)) {
        (Some(p), Some(q)) => (q[idx] - p[idx]) / (2.0 * dt),
        (Some(p), None) => match lv.get(r - 2) {
            Some(pp) => (3.0 * u - 4.0 * p[idx] + pp[idx]) / (2.0 * dt),
            None => (u - p[idx]) / dt,
        },
        (None, Some(q)) => match lv.get(r + 2) {
            Some(qq) => (-3.0 * u + 4.0 * q[idx] - qq[idx]) / (2.0 * dt),
            None => (q[idx] - u) / dt,
        },
        (None, None) => 0.0,
    };
    let mut grad = [0.0; 3];
    let mut stride = 1;
    for g in grad.iter_mut().take(grid.n) {
        *g = (cur[idx + stride] - cur[idx - stride]) / (2.0 * grid.h);
        stride *= grid.nx;
    }
    TraceSample { u, ut, grad }
}

struct Stencil {
    corners: Vec<(usize, f64)>,
}

impl Stencil {
    fn new(grid: &SpaceTimeGrid, x: &[f64; 3]) -> Self {
        let n = grid.n;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..n {
            let s = (x[a] + grid.half_width) / grid.h;
            let j = (s.floor() as usize).min(grid.nx - 2);
            base[a] = j;
            frac[a] = s - j as f64;
        }
        let mut corners = Vec::with_capacity(1 << n);
        for c in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for a in 0..n {
                let bit = (c >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + bit) * stride;
                stride *= grid.nx;
            }
            corners.push((idx, w));
        }
        Self { corners }
    }

    fn sample(&self, grid: &SpaceTimeGrid, lv: &Levels, r: i32) -> TraceSample {
        let mut s = TraceSample::default();
        for &(idx, w) in &self.corners {
            if w != 0.0 {
                s.axpy(w, &node_sample(grid, lv, r, idx));
            }
        }
        s
    }
}

pub(crate) struct Recorder<'g> {
    grid: &'g SpaceTimeGrid,
    eps: f64,
    settle: f64,
    window: (f64, f64),
    sigma_start: usize,
    stencils: Vec<Stencil>,
    sigma: Vec<Vec<TraceSample>>,
    nodes: Vec<GammaNode>,
    offsets: Vec<f64>,
    gamma: Vec<Vec<Option<TraceSample>>>,
    /// Per level: `(offset slot, node slot, fraction toward the next level)`.
    pending: HashMap<usize, Vec<(usize, usize, f64)>>,
    fits: Vec<FitAcc>,
    characteristic_stencil: bool,
    top: Vec<TopNode>,
}

impl<'g> Recorder<'g> {
    pub(crate) fn new(grid: &'g SpaceTimeGrid, cfg: &SolverConfig, eps: f64) -> Self {
        let weights: HashMap<usize, f64> = grid
            .ball_nodes()
            .iter()
            .map(|b| (b.index, b.weight))
            .collect();
        let reach = 1.0 + 2.0 * grid.h;
        let nodes: Vec<GammaNode> = (0..grid.spatial_len())
            .filter_map(|i| {
                let x = grid.coord(i);
                (norm(&x) <= reach).then(|| GammaNode {
                    index: i,
                    x,
                    weight: weights.get(&i).copied().unwrap_or(0.0),
                })
            })
            .collect();
        let mut pending: HashMap<usize, Vec<(usize, usize, f64)>> = HashMap::new();
        let last = grid.nt - 1;
        let mut gamma = Vec::new();
        for (o, off) in cfg.trace_offsets.iter().enumerate() {
            gamma.push(vec![None; nodes.len()]);
            for (j, node) in nodes.iter().enumerate() {
                let tau = grid.xn(&node.x) + off * eps;
                let pos = (tau - grid.t0) / grid.dt;
                if pos < 0.0 || pos > last as f64 + 1e-9 {
                    continue;
                }
                let k = (pos.floor() as usize).min(last);
                let fr = (pos - k as f64).clamp(0.0, 1.0);
                let k = if k == last { last } else { k };
                pending
                    .entry(k)
                    .or_default()
                    .push((o, j, if k == last { 0.0 } else { fr }));
            }
        }
        // the whole record, so transforms see the quiet lead-in
        let sigma_start = 0;
        Self {
            grid,
            eps,
            settle: cfg.settle,
            window: cfg.fit_window,
            sigma_start,
            stencils: grid
                .sphere
                .points
                .iter()
                .map(|p| Stencil::new(grid, p))
                .collect(),
            sigma: Vec::new(),
            fits: vec![FitAcc::new(cfg.fit_order); nodes.len()],
            characteristic_stencil: (grid.dt - 0.5 * grid.h).abs() < 1e-12 * grid.h,
            nodes,
            offsets: cfg.trace_offsets.clone(),
            gamma,
            pending,
            top: Vec::new(),
        }
    }

    pub(crate) fn observe(&mut self, k: usize, lv: &Levels) {
        let g = self.grid;
        let t = g.time(k);
        if k >= self.sigma_start {
            self.sigma
                .push(self.stencils.iter().map(|s| s.sample(g, lv, 0)).collect());
        }
        if let Some(list) = self.pending.remove(&k) {
            for (o, j, fr) in list {
                let idx = self.nodes[j].index;
                let a = node_sample(g, lv, 0, idx);
                let s = if fr > 0.0 {
                    a.lerp(&node_sample(g, lv, 1, idx), fr)
                } else {
                    a
                };
                self.gamma[o][j] = Some(s);
            }
        }
        let (lo, hi) = (self.window.0 * self.eps, self.window.1 * self.eps);
        let cur = lv.get(0).expect("current level");
        let stride_n = g.nx.pow(g.n as u32 - 1);
        for (j, node) in self.nodes.iter().enumerate() {
            let tau = t - g.xn(&node.x);
            if tau < lo - 1e-12 || tau > hi + 1e-12 {
                continue;
            }
            let idx = node.index;
            let d = match (self.characteristic_stencil, lv.get(-2), lv.get(2)) {
                (true, Some(p), Some(q)) => (q[idx + stride_n] - p[idx - stride_n]) / (2.0 * g.h),
                _ => {
                    let s = node_sample(g, lv, 0, idx);
                    s.ut + s.grad[g.n - 1]
                }
            };
            self.fits[j].add(front_basis(tau, self.eps), [cur[idx], d]);
        }
        if k == g.nt - 1 {
            self.top = g
                .ball_nodes()
                .iter()
                .map(|b| TopNode {
                    x: b.x,
                    weight: b.weight,
                    sample: node_sample(g, lv, 0, b.index),
                })
                .collect();
        }
    }

    pub(crate) fn finish(self) -> BoundaryTrace {
        let g = self.grid;
        BoundaryTrace {
            n: g.n,
            eps: self.eps,
            dt: g.dt,
            t_end: g.t_end,
            settle: self.settle,
            sigma_points: g.sphere.points.clone(),
            sigma_weights: g.sphere.weights.clone(),
            sigma_t0: g.time(self.sigma_start),
            sigma: self.sigma,
            front: self.fits.iter().map(FitAcc::solve).collect(),
            gamma_nodes: self.nodes,
            gamma: self
                .offsets
                .iter()
                .zip(self.gamma)
                .map(|(o, samples)| GammaTrace {
                    offset: *o,
                    samples,
                })
                .collect(),
            top: self.top,
        }
    }
}

/// Runs the recorder over levels produced on demand.
fn feed(
    grid: &SpaceTimeGrid,
    cfg: &SolverConfig,
    level: impl Fn(usize) -> Vec<f64>,
) -> BoundaryTrace {
    let eps = cfg.eps(grid);
    let mut rec = Recorder::new(grid, cfg, eps);
    let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
    for k in 0..grid.nt {
        cache.retain(|&l, _| l + 2 >= k);
        for l in k.saturating_sub(2)..=(k + 2).min(grid.nt - 1) {
            cache.entry(l).or_insert_with(|| level(l));
        }
        let mut slots: [Option<&[f64]>; 5] = [None; 5];
        for (j, slot) in slots.iter_mut().enumerate() {
            let l = k as i64 + j as i64 - 2;
            if l >= 0 {
                *slot = cache.get(&(l as usize)).map(|v| &v[..]);
            }
        }
        rec.observe(k, &Levels::from_slots(slots));
    }
    rec.finish()
}

/// Traces of a stored field, by the same code path the solver uses.
pub fn boundary_trace_from_field(
    field: &SpaceTimeField,
    grid: &SpaceTimeGrid,
    cfg: &SolverConfig,
) -> Result<BoundaryTrace> {
    if field.nt != grid.nt || field.nx != grid.nx || field.n != grid.n {
        return Err(Error::Invalid("field does not match the grid".into()));
    }
    Ok(feed(grid, cfg, |k| field.level(k).to_vec()))
}

/// Traces of a closed-form field evaluated level by level.
pub fn boundary_trace_from_fn(
    grid: &SpaceTimeGrid,
    cfg: &SolverConfig,
    f: impl Fn(&[f64; 3], f64) -> f64,
) -> BoundaryTrace {
    let coords: Vec<[f64; 3]> = (0..grid.spatial_len()).map(|i| grid.coord(i)).collect();
    feed(grid, cfg, |k| {
        let t = grid.time(k);
        coords.iter().map(|x| f(x, t)).collect()
    })
}
