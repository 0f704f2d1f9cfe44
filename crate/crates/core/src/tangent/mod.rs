//! Reduced tangent dynamics: collision derivatives, their cocycle, the
//! invariant cone field of the quadratic form `Q` and estimators built on it.

mod cocycle;
mod cone;
mod hv;
mod jacobian;
mod lyapunov;
mod noncontraction;
mod orbit;
mod precise;
mod sigma;
mod tau;

pub use cocycle::{cocycle, matrix_csv, Cocycle};
pub use cone::{
    cone_membership, cw_invariance_report, cw_norm, ht_norm, q_form, sample_cone_vector, ConeClass,
    ConePart, CwInvarianceRow, TangentVector,
};
pub use hv::{to_hv, HVState};
pub use jacobian::{
    collision_jacobian, symplectic_defect, symplectic_inverse, symplectic_j, CollisionJacobian,
    IdentityMap, TangentMap, GRAZING_ALPHA,
};
pub use orbit::{orbit_jacobians, JacobianStream};
pub use sigma::{sigma_estimate, sigma_of_cocycle, sigma_prime_estimate, SigmaReport, DEFAULT_STARTS};
pub use precise::{sigma_trace, PreciseCocycle, SigmaTrace};
pub use lyapunov::{lyapunov_max_fd, lyapunov_of_factors, lyapunov_spectrum, LyapunovSpectrum};
pub use noncontraction::{
    noncontraction_estimate, sample_ht_unit_vectors, ContractionWitness, NoncontractionReport,
};
pub use tau::{tau_e0, TauOutcome, TauReport};
