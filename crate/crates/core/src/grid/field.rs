//! Dense samples on every (spatial node, time level) of a grid.

use super::{NodeTag, QPoint, SpaceTimeGrid};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Space(usize),
    Time,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub n: usize,
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub dt: f64,
    pub half_width: f64,
    pub t0: f64,
    /// Level-major: `data[k * spatial_len + i]`.
    pub data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self {
            n: grid.n,
            nx: grid.nx,
            nt: grid.nt,
            h: grid.h,
            dt: grid.dt,
            half_width: grid.half_width,
            t0: grid.t0,
            data: vec![0.0; grid.spatial_len() * grid.nt],
        }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(&[f64; 3], f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        let len = grid.spatial_len();
        let coords: Vec<[f64; 3]> = (0..len).map(|i| grid.coord(i)).collect();
        for k in 0..grid.nt {
            let t = grid.time(k);
            for (i, x) in coords.iter().enumerate() {
                out.data[k * len + i] = f(x, t);
            }
        }
        out
    }

    pub fn spatial_len(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn get(&self, node: usize, level: usize) -> f64 {
        self.data[level * self.spatial_len() + node]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let len = self.spatial_len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let len = self.spatial_len();
        &mut self.data[k * len..(k + 1) * len]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// Second-order centered differences, second-order one-sided at edges.
    pub fn diff(&self, axis: Axis) -> Result<Self> {
        let len = self.spatial_len();
        let (stride, count, step) = match axis {
            Axis::Space(a) if a < self.n => (self.nx.pow(a as u32), self.nx, self.h),
            Axis::Space(a) => return Err(Error::Axis { axis: a, n: self.n }),
            Axis::Time => (len, self.nt, self.dt),
        };
        if count < 3 {
            return Err(Error::Grid(
                "need at least three points along the axis".into(),
            ));
        }
        let mut out = self.clone();
        let total = self.data.len();
        let inv = 0.5 / step;
        for idx in 0..total {
            let j = (idx / stride) % count;
            let d = &self.data;
            out.data[idx] = if j == 0 {
                (-3.0 * d[idx] + 4.0 * d[idx + stride] - d[idx + 2 * stride]) * inv
            } else if j == count - 1 {
                (3.0 * d[idx] - 4.0 * d[idx - stride] + d[idx - 2 * stride]) * inv
            } else {
                (d[idx + stride] - d[idx - stride]) * inv
            };
        }
        Ok(out)
    }

    /// Multilinear interpolation in space, linear in time.
    pub fn interp(&self, x: &[f64; 3], t: f64) -> Result<f64> {
        let tau = (t - self.t0) / self.dt;
        if !(tau >= -1e-9 && tau <= (self.nt - 1) as f64 + 1e-9) {
            return Err(Error::Invalid(format!("time {t} outside the grid window")));
        }
        let k = (tau.floor().max(0.0) as usize).min(self.nt - 2);
        let ft = (tau - k as f64).clamp(0.0, 1.0);
        let a = self.interp_level(k, x)?;
        let b = self.interp_level(k + 1, x)?;
        Ok((1.0 - ft) * a + ft * b)
    }

    pub fn interp_level(&self, k: usize, x: &[f64; 3]) -> Result<f64> {
        let (base, frac) = locate(self.n, self.nx, self.h, self.half_width, x)?;
        let lvl = self.level(k);
        Ok(multilinear(self.n, self.nx, lvl, base, frac))
    }

    /// Value at a quadrature point: direct lookup when the point is a node.
    pub fn at(&self, p: &QPoint) -> Result<f64> {
        match p.tag {
            NodeTag::Grid {
                node,
                level: Some(k),
            } => Ok(self.get(node, k)),
            _ => self.interp(&p.x, p.t),
        }
    }
}

/// Lower-corner node and fractional offsets of `x` in the box.
pub(crate) fn locate(
    n: usize,
    nx: usize,
    h: f64,
    half_width: f64,
    x: &[f64; 3],
) -> Result<([usize; 3], [f64; 3])> {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..n {
        let s = (x[a] + half_width) / h;
        if !(s >= -1e-9 && s <= (nx - 1) as f64 + 1e-9) {
            return Err(Error::OutsideBox(*x));
        }
        let j = (s.floor().max(0.0) as usize).min(nx - 2);
        base[a] = j;
        frac[a] = (s - j as f64).clamp(0.0, 1.0);
    }
    Ok((base, frac))
}

pub(crate) fn multilinear(
    n: usize,
    nx: usize,
    data: &[f64],
    base: [usize; 3],
    frac: [f64; 3],
) -> f64 {
    let corners = 1usize << n;
    let mut v = 0.0;
    for c in 0..corners {
        let mut w = 1.0;
        let mut idx = 0usize;
        let mut stride = 1usize;
        for a in 0..n {
            let bit = (c >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx += (base[a] + bit) * stride;
            stride *= nx;
        }
        if w != 0.0 {
            v += w * data[idx];
        }
    }
    v
}
