//! Regularized-source leapfrog for the scattered field.
//!
//! `u_s` solves `u_tt - Laplacian u + V u = -V delta_eps(t - x_n)` with zero
//! data at `t0`, where `delta_eps` is a unit-mass Gaussian of width `eps`.
//! By time invariance `u_s` is the scattered field `u H(t - x_n)` smeared in
//! time by `delta_eps`. A first-order Mur condition on the box edge lets
//! outgoing waves leave; an optional graded sponge can damp them earlier.

mod mms;
mod stepper;
mod trace;

pub use mms::{
    calibrate_sponge, mms_error, mms_error_with, mms_study, mms_study_with, MmsReport,
    SpongeCalibration,
};
pub use stepper::{run_leapfrog, Edge, Levels, Scheme, Stepper};
pub use trace::{
    boundary_trace_from_field, boundary_trace_from_fn, characteristic_trace, front_trace,
    h1_sigma_norm, BoundaryTrace, FrontFit, GammaNode, GammaTrace, TopNode, TraceSample,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpaceTimeField, SpaceTimeGrid};
use crate::potential::Potential;
use trace::Recorder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// `eps = eps_factor * h`.
    pub eps_factor: f64,
    /// Peak damping rate at the outer edge of the sponge. Damping distorts
    /// the slowly decaying two-dimensional tail, so it is off by default and
    /// the Mur edge does the absorbing.
    pub sponge_strength: f64,
    /// Treatment of the outermost nodes.
    pub edge: Edge,
    /// Interior update.
    pub scheme: Scheme,
    /// Offsets in units of `eps` at which `u_s(x, x_n + offset eps)` is kept.
    pub trace_offsets: Vec<f64>,
    /// Window `[lo, hi]` of `(t - x_n) / eps` used by the front fit.
    pub fit_window: (f64, f64),
    /// Polynomial order in `t - x_n` of the front model, at most 3.
    pub fit_order: usize,
    /// Boundary data count from `t = x_n + settle eps` on.
    pub settle: f64,
    /// Keep every time level in memory.
    pub keep_field: bool,
    /// Largest relative `Sigma` discrepancy accepted by the sponge calibration.
    pub reflection_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_factor: 4.0,
            sponge_strength: 0.0,
            edge: Edge::Mur,
            scheme: Scheme::Second,
            trace_offsets: vec![4.0, 8.0],
            fit_window: (-3.0, 2.0),
            fit_order: 3,
            settle: 4.0,
            keep_field: false,
            reflection_threshold: 0.02,
        }
    }
}

impl SolverConfig {
    pub fn eps(&self, grid: &SpaceTimeGrid) -> f64 {
        self.eps_factor * grid.h
    }

    pub fn validate(&self, grid: &SpaceTimeGrid) -> Result<f64> {
        let eps = self.eps(grid);
        if !(eps >= 2.0 * grid.dt * (1.0 - 1e-12)) {
            return Err(Error::Solver(format!(
                "pulse width {eps} below 2 dt = {}: unresolved pulse",
                2.0 * grid.dt
            )));
        }
        if grid.t0 > -1.0 - 5.0 * eps + 1e-12 {
            return Err(Error::Solver(format!(
                "t0 = {} must be at most -1 - 5 eps = {} so the pulse starts ahead of the support",
                grid.t0,
                -1.0 - 5.0 * eps
            )));
        }
        if !(self.sponge_strength >= 0.0) {
            return Err(Error::Solver("sponge strength must be non-negative".into()));
        }
        if self.trace_offsets.iter().any(|o| !(*o >= 0.0)) {
            return Err(Error::Solver("trace offsets must be non-negative".into()));
        }
        if self.fit_order > trace::MAX_FIT_ORDER {
            return Err(Error::Solver(format!(
                "fit order {} above {}",
                self.fit_order,
                trace::MAX_FIT_ORDER
            )));
        }
        if !(self.fit_window.0 < self.fit_window.1) || !(self.settle >= 0.0) {
            return Err(Error::Solver("bad fit window or settle time".into()));
        }
        Ok(eps)
    }
}

/// Output of one solve. The incidence direction is `e_n`.
#[derive(Clone, Debug)]
pub struct WaveField {
    pub eps: f64,
    pub potential_id: String,
    /// Every level, when requested.
    pub field: Option<SpaceTimeField>,
    pub trace: BoundaryTrace,
    /// `max |u_s|` over all nodes and levels.
    pub max_abs: f64,
}

/// `delta_eps(tau)`, unit mass.
pub fn pulse(tau: f64, eps: f64) -> f64 {
    let z = tau / eps;
    (-0.5 * z * z).exp() / (eps * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn solve_scattered(
    v: &Potential,
    grid: &SpaceTimeGrid,
    cfg: &SolverConfig,
) -> Result<WaveField> {
    if v.n != grid.n {
        return Err(Error::Solver(format!(
            "potential dimension {} differs from grid dimension {}",
            v.n, grid.n
        )));
    }
    let eps = cfg.validate(grid)?;
    let samples = v.sample(grid);
    let support: Vec<(usize, f64, f64)> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| **s != 0.0)
        .map(|(i, s)| (i, *s, grid.xn(&grid.coord(i))))
        .collect();
    let stepper =
        Stepper::new(grid, samples, cfg.sponge_strength, cfg.edge)?.with_scheme(cfg.scheme);
    let mut recorder = Recorder::new(grid, cfg, eps);
    let mut field = if cfg.keep_field {
        Some(SpaceTimeField::zeros(grid))
    } else {
        None
    };
    let len = grid.spatial_len();
    let mut max_abs: f64 = 0.0;
    let zero = vec![0.0; len];
    run_leapfrog(
        &stepper,
        (&zero, &zero),
        |k, f: &mut [f64]| {
            let t = grid.time(k);
            for &(i, vi, xn) in &support {
                f[i] = -vi * pulse(t - xn, eps);
            }
        },
        |k, lv: &Levels| {
            let cur = lv.get(0).expect("current level");
            max_abs = cur.iter().fold(max_abs, |m, x| m.max(x.abs()));
            if let Some(fd) = field.as_mut() {
                fd.level_mut(k).copy_from_slice(cur);
            }
            recorder.observe(k, lv);
        },
    )?;
    Ok(WaveField {
        eps,
        potential_id: v.id.clone(),
        field,
        trace: recorder.finish(),
        max_abs,
    })
}
