//! Numerical lab for time-domain fixed-angle scattering.
//!
//! The pieces: a space-time grid with quadrature over the characteristic
//! cylinder `Q = {x in B, x_n <= t <= T}` and its boundary parts, smooth bump
//! potentials, a regularized-source leapfrog solver for the scattered field,
//! weighted-estimate machinery for the weight `phi = exp(lambda psi)`, end to
//! end stability experiments, and a time-to-frequency bridge.

pub mod carleman;
pub mod error;
pub mod experiments;
pub mod freqbridge;
pub mod grid;
pub mod potential;
pub mod wavesolver;

pub use carleman::{CarlemanWeight, EstimateReport, TestFunction};
pub use error::{Error, Result};
pub use grid::{GaussRule, GridConfig, GridRule, QuadRule, Region, SpaceTimeField, SpaceTimeGrid};
pub use potential::{Bump, Potential};
pub use wavesolver::{BoundaryTrace, SolverConfig, WaveField};
