use std::path::PathBuf;

use crate::sim::SingularReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("at least two balls are required, got {0}")]
    TooFewBalls(usize),
    #[error("masses must be strictly decreasing (m[{index}] = {lower} follows {upper})")]
    NonDecreasingMasses { index: usize, upper: f64, lower: f64 },
    #[error("mass m[{index}] = {value} is not positive")]
    NonPositiveMass { index: usize, value: f64 },
    #[error("energy {0} is not positive")]
    NonPositiveEnergy(f64),
    #[error("state has {got} coordinates, configuration has {expected} balls")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("a collision at dt = {at} lies inside the flight interval of length {dt}")]
    CollisionSkipped { dt: f64, at: f64 },
    #[error("state is not on the pre-collision section for {kind}: {reason}")]
    NotOnSection { kind: String, reason: String },
    #[error("ordering constraint violated at event {event}: q[{index}] - q[{next}] = {excess}", next = index + 1)]
    OrderingViolated { event: u64, index: usize, excess: f64 },
    #[error("zero-velocity floor contact repeats with zero flight time at t = {0}")]
    DegenerateContact(f64),
    #[error("relative energy drift {drift:e} exceeds {limit:e} after event {event}")]
    EnergyDrift { event: u64, drift: f64, limit: f64 },
    #[error("orbit reaches a singular collision: {0}")]
    SingularOrbit(Box<SingularReport>),
    #[error("could not sample a state with the requested energy after {0} attempts")]
    EnergyInfeasible(usize),
    #[error("unresolved simultaneous collision cluster after {0} sub-collisions")]
    UnresolvedCluster(usize),

    #[error("floor collision with v1 = {0} has no defined derivative")]
    DegenerateBasePoint(f64),
    #[error("event {0} in the requested range is singular")]
    SingularEventInRange(u64),
    #[error("matrix is not Q-monotone: Q(Mv) - Q(v) = {deficit:e} for a sampled vector")]
    NotMonotone { deficit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("log exhausted before the collision pattern completed (scanned from event {0})")]
    Incomplete(usize),
    #[error("interval content does not match the expansion hypotheses: {0}")]
    WrongVariant(String),
    #[error("singular event encountered after {0} iterates")]
    SingularEncountered(usize),
    #[error("threshold not reached within {0} iterates")]
    Exceeded(usize),

    #[error("expected three balls, got {0}")]
    WrongDimension(usize),
    #[error("special mass condition is infeasible: {0}")]
    Infeasible(String),
    #[error("masses do not satisfy the special condition (residual {0:e})")]
    NotSpecialMasses(f64),
    #[error("trajectory meets the {edge} edge at t = {t}")]
    EdgeHit { edge: String, t: f64 },
    #[error("point lies outside the wedge (generator coefficient {0:e})")]
    OutsideWedge(f64),

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {key}: {message}")]
    TypeMismatch { line: usize, key: String, message: String },
    #[error("missing required key `{0}`")]
    MissingRequired(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
