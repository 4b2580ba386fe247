//! Damped leapfrog on the box with a five-level ring buffer.
//!
//! The fourth-order variant is the modified-equation scheme
//! `u^{k+1} = 2u^k - u^{k-1} + dt^2 (A_4 u + f) + dt^4 / 12 (A_2 (A_2 u + f) + f_tt)`
//! with `A_p = Laplacian_p - V`. Nodes within two cells of the box edge use
//! the second-order Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;

/// Update rule for the outermost nodes of the box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// Held at zero.
    Dirichlet,
    /// First-order Mur radiation condition along the outward axis.
    #[default]
    Mur,
}

/// Accuracy of the interior update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Second,
    Fourth,
}

/// Fixed parts of the scheme: interior nodes, potential samples and the
/// sponge profile.
pub struct Stepper<'g> {
    pub grid: &'g SpaceTimeGrid,
    interior: Vec<u32>,
    potential: Vec<f64>,
    /// `sigma dt / 2` per node.
    damp: Vec<f64>,
    /// Edge node, its inward neighbour and the Mur coefficient.
    edges: Vec<(u32, u32, f64)>,
    edge: Edge,
    /// Per interior node: far enough from the edge for the wide stencil.
    deep: Vec<bool>,
    scheme: Scheme,
}

impl<'g> Stepper<'g> {
    /// The sponge rate grows as `strength (d / width)^2` with `d` the depth
    /// into the layer along the worst axis.
    pub fn new(
        grid: &'g SpaceTimeGrid,
        potential: Vec<f64>,
        strength: f64,
        edge: Edge,
    ) -> Result<Self> {
        let len = grid.spatial_len();
        if potential.len() != len {
            return Err(Error::Solver(format!(
                "potential has {} samples, grid has {len} nodes",
                potential.len()
            )));
        }
        if len > u32::MAX as usize {
            return Err(Error::Solver("grid too large".into()));
        }
        let n = grid.n;
        let inner = grid.half_width - grid.sponge_width;
        let mut interior = Vec::with_capacity(len);
        let mut damp = vec![0.0; len];
        let mut edges = Vec::new();
        let mut deep = Vec::with_capacity(len);
        for i in 0..len {
            let m = grid.multi_index(i);
            if (0..n).all(|a| m[a] > 0 && m[a] < grid.nx - 1) {
                interior.push(i as u32);
                deep.push((0..n).all(|a| m[a] > 1 && m[a] < grid.nx - 2));
            } else {
                // inward along the axis that is on the edge; corners step diagonally
                let mut j = i as i64;
                let mut stride = 1i64;
                let mut moved = 0;
                for a in 0..n {
                    if m[a] == 0 {
                        j += stride;
                        moved += 1;
                    } else if m[a] == grid.nx - 1 {
                        j -= stride;
                        moved += 1;
                    }
                    stride *= grid.nx as i64;
                }
                let dist = grid.h * (moved as f64).sqrt();
                edges.push((i as u32, j as u32, (grid.dt - dist) / (grid.dt + dist)));
            }
            if grid.sponge_width > 0.0 {
                let x = grid.coord(i);
                let depth = (0..n).map(|a| x[a].abs() - inner).fold(0.0f64, f64::max);
                let r = (depth / grid.sponge_width).min(1.0);
                damp[i] = 0.5 * grid.dt * strength * r * r;
            }
        }
        Ok(Self {
            grid,
            interior,
            potential,
            damp,
            edges,
            edge,
            deep,
            scheme: Scheme::Second,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `(Laplacian_2 - V) u` at interior node `i`.
    #[inline]
    fn apply2(&self, u: &[f64], i: usize, strides: &[usize], inv_h2: f64) -> f64 {
        let c = u[i];
        let mut lap = -2.0 * strides.len() as f64 * c;
        for &s in strides {
            lap += u[i + s] + u[i - s];
        }
        lap * inv_h2 - self.potential[i] * c
    }

    /// `(Laplacian_4 - V) u` at a deep interior node.
    #[inline]
    fn apply4(&self, u: &[f64], i: usize, strides: &[usize], inv_h2: f64) -> f64 {
        let c = u[i];
        let mut lap = -2.5 * strides.len() as f64 * c;
        for &s in strides {
            lap +=
                (4.0 / 3.0) * (u[i + s] + u[i - s]) - (1.0 / 12.0) * (u[i + 2 * s] + u[i - 2 * s]);
        }
        lap * inv_h2 - self.potential[i] * c
    }

    /// `next = [2 cur - (1 - d) prev + dt^2 (A cur + f) + ...] / (1 + d)`.
    /// `force_tt` and `scratch` are used by the fourth-order scheme only.
    pub fn step(
        &self,
        prev: &[f64],
        cur: &[f64],
        force: &[f64],
        force_tt: &[f64],
        scratch: &mut [f64],
        next: &mut [f64],
    ) {
        let g = self.grid;
        let inv_h2 = 1.0 / (g.h * g.h);
        let dt2 = g.dt * g.dt;
        let all = [1usize, g.nx, g.nx * g.nx];
        let strides = &all[..g.n];
        match self.scheme {
            Scheme::Second => {
                for &iu in &self.interior {
                    let i = iu as usize;
                    let rhs = self.apply2(cur, i, strides, inv_h2) + force[i];
                    let d = self.damp[i];
                    next[i] = (2.0 * cur[i] - (1.0 - d) * prev[i] + dt2 * rhs) / (1.0 + d);
                }
            }
            Scheme::Fourth => {
                // scratch = A_2 cur + f on the interior, zero on the edge
                for &(e, _, _) in &self.edges {
                    scratch[e as usize] = 0.0;
                }
                for &iu in &self.interior {
                    let i = iu as usize;
                    scratch[i] = self.apply2(cur, i, strides, inv_h2) + force[i];
                }
                for (&iu, &deep) in self.interior.iter().zip(&self.deep) {
                    let i = iu as usize;
                    let a = if deep {
                        self.apply4(cur, i, strides, inv_h2) + force[i]
                    } else {
                        scratch[i]
                    };
                    let rhs =
                        a + dt2 / 12.0 * (self.apply2(scratch, i, strides, inv_h2) + force_tt[i]);
                    let d = self.damp[i];
                    next[i] = (2.0 * cur[i] - (1.0 - d) * prev[i] + dt2 * rhs) / (1.0 + d);
                }
            }
        }
        match self.edge {
            Edge::Dirichlet => {}
            Edge::Mur => {
                // u_0^{k+1} = u_1^k + (dt - h)/(dt + h) (u_1^{k+1} - u_0^k)
                for &(e, inner, c) in &self.edges {
                    let (e, inner) = (e as usize, inner as usize);
                    next[e] = cur[inner] + c * (next[inner] - cur[e]);
                }
            }
        }
    }
}

/// Read access to levels `k - 2 ..= k + 2` around the observed level `k`.
pub struct Levels<'a> {
    slots: [Option<&'a [f64]>; 5],
}

impl<'a> Levels<'a> {
    /// Level `k + offset`, `offset` in `-2..=2`, when it exists.
    pub fn get(&self, offset: i32) -> Option<&'a [f64]> {
        if !(-2..=2).contains(&offset) {
            return None;
        }
        self.slots[(offset + 2) as usize]
    }

    pub fn from_slots(slots: [Option<&'a [f64]>; 5]) -> Self {
        Self { slots }
    }
}

/// Runs the scheme from the two initial levels to the last level of the
/// grid. `force(k, f)` fills the source at level `k` into a zeroed buffer;
/// `observe(k, levels)` sees each level once its two successors exist (or
/// the run has ended).
pub fn run_leapfrog(
    stepper: &Stepper,
    init: (&[f64], &[f64]),
    mut force: impl FnMut(usize, &mut [f64]),
    mut observe: impl FnMut(usize, &Levels),
) -> Result<()> {
    let g = stepper.grid;
    let len = g.spatial_len();
    let nt = g.nt;
    if init.0.len() != len || init.1.len() != len {
        return Err(Error::Solver("initial levels have the wrong length".into()));
    }
    if nt < 3 {
        return Err(Error::Solver("need at least three time levels".into()));
    }
    let mut ring: Vec<Vec<f64>> = vec![vec![0.0; len]; 5];
    ring[0].copy_from_slice(init.0);
    ring[1].copy_from_slice(init.1);
    let fourth = stepper.scheme == Scheme::Fourth;
    // forces at k - 1, k, k + 1; the outer two only for the fourth-order scheme
    let mut fs: [Vec<f64>; 3] = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut ftt = vec![0.0; if fourth { len } else { 0 }];
    let mut scratch = vec![0.0; if fourth { len } else { 0 }];
    let fill = |k: usize, f: &mut Vec<f64>, force: &mut dyn FnMut(usize, &mut [f64])| {
        f.iter_mut().for_each(|x| *x = 0.0);
        force(k, f);
    };
    if fourth {
        fill(0, &mut fs[1], &mut force);
        fill(1, &mut fs[2], &mut force);
    } else {
        fill(1, &mut fs[1], &mut force);
    }
    let emit =
        |ring: &Vec<Vec<f64>>, k: usize, last: usize, observe: &mut dyn FnMut(usize, &Levels)| {
            let mut slots: [Option<&[f64]>; 5] = [None; 5];
            for (j, slot) in slots.iter_mut().enumerate() {
                let lvl = k as i64 + j as i64 - 2;
                if lvl >= 0 && lvl as usize <= last {
                    *slot = Some(&ring[lvl as usize % 5][..]);
                }
            }
            observe(k, &Levels { slots });
        };
    let inv_dt2 = 1.0 / (g.dt * g.dt);
    for k in 1..nt - 1 {
        if fourth {
            fs.rotate_left(1);
            fill(k + 1, &mut fs[2], &mut force);
            for (((o, a), b), c) in ftt.iter_mut().zip(&fs[0]).zip(&fs[1]).zip(&fs[2]) {
                *o = (a - 2.0 * b + c) * inv_dt2;
            }
        } else if k > 1 {
            fill(k, &mut fs[1], &mut force);
        }
        let mut next = std::mem::take(&mut ring[(k + 1) % 5]);
        stepper.step(
            &ring[(k - 1) % 5],
            &ring[k % 5],
            &fs[1],
            &ftt,
            &mut scratch,
            &mut next,
        );
        ring[(k + 1) % 5] = next;
        if k + 1 >= 2 {
            emit(&ring, k - 1, k + 1, &mut observe);
        }
    }
    emit(&ring, nt - 2, nt - 1, &mut observe);
    emit(&ring, nt - 1, nt - 1, &mut observe);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;

    #[test]
    fn every_level_observed_once_with_neighbours() {
        let g = SpaceTimeGrid::build(&GridConfig {
            t_end: 1.5,
            t0: -1.5,
            ..GridConfig::default().with_h(1.0 / 8.0)
        })
        .unwrap();
        let st = Stepper::new(&g, vec![0.0; g.spatial_len()], 0.0, Edge::Dirichlet).unwrap();
        let len = g.spatial_len();
        let init0 = vec![0.0; len];
        let init1 = vec![0.0; len];
        let mut seen = Vec::new();
        run_leapfrog(
            &st,
            (&init0, &init1),
            |_, _| {},
            |k, lv| {
                seen.push(k);
                assert!(lv.get(0).is_some());
                assert_eq!(lv.get(-2).is_some(), k >= 2);
                assert_eq!(lv.get(2).is_some(), k + 2 < g.nt);
            },
        )
        .unwrap();
        assert_eq!(seen, (0..g.nt).collect::<Vec<_>>());
    }

    #[test]
    fn linear_in_the_source() {
        let g = SpaceTimeGrid::build(&GridConfig {
            t_end: 1.5,
            t0: -1.5,
            ..GridConfig::default().with_h(1.0 / 8.0)
        })
        .unwrap();
        for scheme in [Scheme::Second, Scheme::Fourth] {
            let st = Stepper::new(&g, vec![0.3; g.spatial_len()], 30.0, Edge::Mur)
                .unwrap()
                .with_scheme(scheme);
            let len = g.spatial_len();
            let zero = vec![0.0; len];
            let run = |scale: f64| {
                let mut last = vec![];
                run_leapfrog(
                    &st,
                    (&zero, &zero),
                    |k, f| f[len / 2] = scale * (k as f64 * 0.1).sin(),
                    |k, lv| {
                        if k == g.nt - 1 {
                            last = lv.get(0).unwrap().to_vec();
                        }
                    },
                )
                .unwrap();
                last
            };
            let a = run(1.0);
            let b = run(-2.5);
            let m = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(m > 0.0);
            for (x, y) in a.iter().zip(&b) {
                assert!((y + 2.5 * x).abs() <= 1e-12 * m);
            }
        }
    }
}
