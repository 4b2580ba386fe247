//! Weighted-estimate machinery for `phi = exp(lambda psi)`: closed-form weight
//! derivatives, conjugation, the split `P_s^+ + P_s^-`, and quadrature of
//! every term in the estimate, the integration-by-parts identity, the energy
//! estimates and the decay of `h(s)`.

pub mod decay;
pub mod energy;
pub mod estimate;
pub mod identity;
pub mod jet;
pub mod operators;
pub mod testfn;
pub mod weight;

pub use decay::{h_s_decay, DecayReport};
pub use energy::{energy_check_char, energy_check_t, energy_sweep, EnergyEntry, EnergySweep};
pub use estimate::{carleman_sides, carleman_sweep, EstimateReport, SidesEntry, SidesOptions};
pub use identity::{ibp_identity_check, j_terms, IdentityResidual, JTerms, ZInput};
pub use jet::Jet2;
pub use operators::{
    apply_p, apply_ps_minus, apply_ps_plus, conjugate_jet, conjugation_residual, deconjugate_jet,
};
pub use testfn::{Factor, TestFunction};
pub use weight::{
    eval_weight, geometry_check, geometry_check_with, CarlemanWeight, GeometryCheck, WeightEval,
};
