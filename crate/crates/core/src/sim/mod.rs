//! Event-driven dynamics of N balls falling onto a floor under unit gravity.

pub mod collision;
mod config;
mod engine;
pub mod jsonl;
mod sample;
mod state;

pub use collision::{
    apply_collision, collision_candidates, detect_singularity, next_collision, Candidate,
    Classification, CollisionKind, NextCollision, Singularity,
};
pub use config::MassConfig;
pub use engine::{
    poincare_step, simulate, BranchOrder, BranchPolicy, CollisionEvent, EventLog, Horizon,
    SingularReport, Simulator, Step, DEFAULT_BRANCH_DEPTH, DRIFT_LIMIT, ORDER_TOL,
};
pub use sample::{rng_from_seed, sample_state};
pub use state::{advance, advance_checked, hamiltonian, kinetic_energy, momentum, BallState};
