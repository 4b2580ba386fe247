//! Manufactured-solution convergence and sponge calibration.

use serde::{Deserialize, Serialize};

use super::stepper::{run_leapfrog, Edge, Scheme, Stepper};
use super::{solve_scattered, SolverConfig, TraceSample};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, SpaceTimeGrid};
use crate::potential::{Bump, Potential};

/// Profile of the manufactured solution `u = cos(t) b(x)`.
fn profile() -> Bump {
    Bump::new([0.0; 3], 0.9, 1.0)
}

/// Max nodal error over all time levels for `u = cos(t) b(x)` with forcing
/// `cos(t) (-b - Laplacian b + V b)`.
pub fn mms_error(cfg: &GridConfig, v: &Potential) -> Result<f64> {
    mms_error_with(cfg, v, Scheme::Second)
}

pub fn mms_error_with(cfg: &GridConfig, v: &Potential, scheme: Scheme) -> Result<f64> {
    let grid = SpaceTimeGrid::build(cfg)?;
    let n = grid.n;
    let len = grid.spatial_len();
    let b = profile();
    let mut bv = vec![0.0; len];
    let mut lap = vec![0.0; len];
    let mut pot = vec![0.0; len];
    for i in 0..len {
        let x = grid.coord(i);
        let (val, _, l) = b.eval_with_laplacian(n, &x);
        bv[i] = val;
        lap[i] = l;
        pot[i] = v.eval(&x);
    }
    let spatial: Vec<f64> = (0..len).map(|i| -bv[i] - lap[i] + pot[i] * bv[i]).collect();
    let stepper = Stepper::new(&grid, pot, 0.0, Edge::Dirichlet)?.with_scheme(scheme);
    let u0: Vec<f64> = bv.iter().map(|x| grid.time(0).cos() * x).collect();
    let u1: Vec<f64> = bv.iter().map(|x| grid.time(1).cos() * x).collect();
    let mut err = 0.0f64;
    run_leapfrog(
        &stepper,
        (&u0, &u1),
        |k, f| {
            let c = grid.time(k).cos();
            for (fi, s) in f.iter_mut().zip(&spatial) {
                *fi = c * s;
            }
        },
        |k, lv| {
            let c = grid.time(k).cos();
            let cur = lv.get(0).expect("level");
            err = cur
                .iter()
                .zip(&bv)
                .fold(err, |m, (u, b)| m.max((u - c * b).abs()));
        },
    )?;
    Ok(err)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsReport {
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})` for each halving.
    pub orders: Vec<f64>,
    pub min_order: f64,
}

pub fn mms_study(base: &GridConfig, hs: &[f64], v: &Potential) -> Result<MmsReport> {
    mms_study_with(base, hs, v, Scheme::Second)
}

pub fn mms_study_with(
    base: &GridConfig,
    hs: &[f64],
    v: &Potential,
    scheme: Scheme,
) -> Result<MmsReport> {
    if hs.len() < 2 {
        return Err(Error::Invalid("need at least two spacings".into()));
    }
    let errors: Vec<f64> = hs
        .iter()
        .map(|&h| mms_error_with(&base.clone().with_h(h), v, scheme))
        .collect::<Result<_>>()?;
    let orders: Vec<f64> = errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MmsReport {
        hs: hs.to_vec(),
        errors,
        orders,
        min_order,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpongeCalibration {
    /// Relative distance in the `H^1(Sigma)` energy between the working box
    /// and the enlarged box.
    pub reflection: f64,
    pub threshold: f64,
    pub big_half_width: f64,
}

/// Solves on the working box and on a box large enough that nothing
/// returning from its edge reaches `Sigma` before `T`, then compares the
/// `Sigma` values.
pub fn calibrate_sponge(
    v: &Potential,
    cfg: &GridConfig,
    solver: &SolverConfig,
) -> Result<SpongeCalibration> {
    let small = SpaceTimeGrid::build(cfg)?;
    let big_half_width = (cfg.t_end - cfg.t0) / 2.0 + 1.0 + cfg.sponge_width;
    let big_half_width = big_half_width.max(4.75);
    let big = SpaceTimeGrid::build(&GridConfig {
        half_width: big_half_width,
        ..cfg.clone()
    })?;
    let quiet = SolverConfig {
        keep_field: false,
        ..solver.clone()
    };
    let a = solve_scattered(v, &small, &quiet)?;
    let b = solve_scattered(v, &big, &quiet)?;
    let diff = a.trace.difference(&b.trace)?;
    let num = diff.sigma_integral(0.0, TraceSample::energy);
    let den = b.trace.sigma_integral(0.0, TraceSample::energy);
    let reflection = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    let out = SpongeCalibration {
        reflection,
        threshold: solver.reflection_threshold,
        big_half_width,
    };
    if reflection > solver.reflection_threshold {
        return Err(Error::SpongeReflection {
            reflection,
            threshold: solver.reflection_threshold,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mms_converges_at_second_order_coarse() {
        let base = GridConfig {
            t_end: 2.0,
            ..Default::default()
        };
        let r = mms_study(&base, &[1.0 / 16.0, 1.0 / 32.0], &Potential::zero(2)).unwrap();
        assert!(r.errors[1] < r.errors[0]);
        assert!(r.min_order > 1.5, "{r:?}");
    }

    #[test]
    fn fourth_order_scheme_converges_faster() {
        let base = GridConfig {
            t_end: 2.0,
            ..Default::default()
        };
        let v = Potential::new(2, vec![Bump::new([0.2, 0.0, 0.0], 0.5, 0.7)]).unwrap();
        let r = mms_study_with(&base, &[1.0 / 16.0, 1.0 / 32.0], &v, Scheme::Fourth).unwrap();
        assert!(r.min_order > 3.0, "{r:?}");
    }
}
