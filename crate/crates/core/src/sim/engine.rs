use serde::{Deserialize, Serialize};

use super::collision::{
    collide_velocities, detect_singularity, next_collision, Classification, CollisionKind,
    Singularity, EPS_SING,
};
use super::state::{advance, hamiltonian};
use super::{BallState, MassConfig};
use crate::error::{Error, Result};

/// Drift of `H` beyond this relative amount aborts a run.
pub const DRIFT_LIMIT: f64 = 1e-8;
/// Ordering violations beyond this (times the position scale) abort a run.
pub const ORDER_TOL: f64 = 1e-10;
/// Default cap on nested branching at singular events.
pub const DEFAULT_BRANCH_DEPTH: usize = 4;
const CLUSTER_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub n: u64,
    pub t: f64,
    pub kind: CollisionKind,
    pub q_at: Vec<f64>,
    pub v_pre: Vec<f64>,
    pub v_post: Vec<f64>,
    pub singular: Singularity,
    pub section_label: usize,
}

impl CollisionEvent {
    /// Pre-collision gap `v_i - v_{i+1}` for a pair event.
    pub fn pre_gap(&self) -> Option<f64> {
        match self.kind {
            CollisionKind::Pair(i) => Some(self.v_pre[i - 1] - self.v_pre[i]),
            CollisionKind::Floor => None,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular != Singularity::None
    }
}

/// What the simulator saw when it stopped in front of a singular collision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    pub event: u64,
    pub t: f64,
    pub kind: Singularity,
    pub cluster: Vec<CollisionKind>,
    /// State at the moment of impact, contacts snapped.
    pub state: BallState,
}

impl std::fmt::Display for SingularReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} collision at t = {} (event {}, cluster", self.kind, self.t, self.event)?;
        for k in &self.cluster {
            write!(f, " {k}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Regular(Vec<CollisionEvent>),
    Singular(SingularReport),
}

/// Which collision of a singular cluster is resolved first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchOrder {
    /// Lowest collision first (floor before pair 1, pair 1 before pair 2).
    LowerFirst,
    UpperFirst,
}

impl BranchOrder {
    pub fn tag(self) -> char {
        match self {
            BranchOrder::LowerFirst => 'a',
            BranchOrder::UpperFirst => 'b',
        }
    }
}

/// Exact event-driven dynamics of one orbit.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    cfg: &'a MassConfig,
    state: BallState,
    events: u64,
    just_hit: Vec<CollisionKind>,
    h0: f64,
    check_drift: bool,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a MassConfig, state: BallState) -> Result<Self> {
        state.check_dim(cfg)?;
        let h0 = hamiltonian(cfg, &state);
        Ok(Simulator {
            cfg,
            state,
            events: 0,
            just_hit: Vec::new(),
            h0,
            check_drift: true,
        })
    }

    /// Disable the energy-drift abort (used by finite-difference probes that
    /// deliberately start off the energy surface).
    pub fn without_drift_check(mut self) -> Self {
        self.check_drift = false;
        self
    }

    pub fn state(&self) -> &BallState {
        &self.state
    }

    pub fn config(&self) -> &MassConfig {
        self.cfg
    }

    pub fn events_done(&self) -> u64 {
        self.events
    }

    pub fn initial_energy(&self) -> f64 {
        self.h0
    }

    /// Next collision (or simultaneous group of commuting collisions).
    pub fn step(&mut self) -> Result<Step> {
        let nc = next_collision(&self.state, &self.just_hit);
        match detect_singularity(&nc.candidates, EPS_SING) {
            Classification::Singular { kind, cluster } => {
                let mut at = advance(&self.state, nc.dt);
                snap_contacts(&mut at, &cluster);
                Ok(Step::Singular(SingularReport {
                    event: self.events,
                    t: at.t,
                    kind,
                    cluster,
                    state: at,
                }))
            }
            _ => {
                let mut kinds = vec![nc.kind];
                kinds.extend(nc.simultaneous.iter().copied());
                if nc.kind == CollisionKind::Floor
                    && nc.dt == 0.0
                    && self.state.v[0] == 0.0
                    && self.just_hit.contains(&CollisionKind::Floor)
                {
                    return Err(Error::DegenerateContact(self.state.t));
                }
                let mut at = advance(&self.state, nc.dt);
                snap_contacts(&mut at, &kinds);
                let events = kinds
                    .iter()
                    .map(|&k| self.collide(&mut at, k, Singularity::None))
                    .collect();
                self.state = at;
                self.just_hit = kinds;
                self.post_checks()?;
                Ok(Step::Regular(events))
            }
        }
    }

    /// Step, treating a singular cluster as an error.
    pub fn step_regular(&mut self) -> Result<Vec<CollisionEvent>> {
        match self.step()? {
            Step::Regular(ev) => Ok(ev),
            Step::Singular(r) => Err(Error::SingularOrbit(Box::new(r))),
        }
    }

    /// Resolve the singular cluster reported by the last [`Simulator::step`]
    /// as a sequence of binary collisions in the given order.
    pub fn resolve_singular(
        &mut self,
        report: &SingularReport,
        order: BranchOrder,
    ) -> Result<Vec<CollisionEvent>> {
        let mut at = report.state.clone();
        let mut out = Vec::new();
        let mut last: Option<CollisionKind> = None;
        for _ in 0..CLUSTER_CAP {
            let mut approaching: Vec<CollisionKind> = report
                .cluster
                .iter()
                .copied()
                .filter(|&k| Some(k) != last && approaching_at_contact(&at, k))
                .collect();
            approaching.sort();
            let next = match order {
                BranchOrder::LowerFirst => approaching.first(),
                BranchOrder::UpperFirst => approaching.last(),
            };
            let Some(&k) = next else {
                self.state = at;
                self.just_hit = report.cluster.clone();
                self.post_checks()?;
                return Ok(out);
            };
            out.push(self.collide(&mut at, k, report.kind));
            last = Some(k);
        }
        Err(Error::UnresolvedCluster(CLUSTER_CAP))
    }

    fn collide(&mut self, at: &mut BallState, kind: CollisionKind, singular: Singularity) -> CollisionEvent {
        let v_pre = at.v.clone();
        collide_velocities(self.cfg, &mut at.v, kind);
        let ev = CollisionEvent {
            n: self.events,
            t: at.t,
            kind,
            q_at: at.q.clone(),
            v_pre,
            v_post: at.v.clone(),
            singular,
            section_label: kind.section_label(),
        };
        self.events += 1;
        ev
    }

    fn post_checks(&self) -> Result<()> {
        let scale = 1.0 + self.state.q.iter().fold(0.0f64, |a, q| a.max(q.abs()));
        let (index, excess) = self.state.ordering_excess();
        if excess > ORDER_TOL * scale {
            return Err(Error::OrderingViolated {
                event: self.events,
                index,
                excess,
            });
        }
        if self.check_drift && self.h0 != 0.0 {
            let drift = ((hamiltonian(self.cfg, &self.state) - self.h0) / self.h0).abs();
            if drift > DRIFT_LIMIT {
                return Err(Error::EnergyDrift {
                    event: self.events,
                    drift,
                    limit: DRIFT_LIMIT,
                });
            }
        }
        Ok(())
    }
}

fn approaching_at_contact(s: &BallState, kind: CollisionKind) -> bool {
    match kind {
        CollisionKind::Floor => s.v[0] < 0.0,
        CollisionKind::Pair(i) => s.v[i - 1] > s.v[i],
    }
}

/// Make the contacts of `kinds` exact: touching balls share one position,
/// a group touching the floor sits at zero.
fn snap_contacts(s: &mut BallState, kinds: &[CollisionKind]) {
    let n = s.q.len();
    let mut linked = vec![false; n];
    let mut floor = false;
    for k in kinds {
        match *k {
            CollisionKind::Floor => floor = true,
            CollisionKind::Pair(i) => linked[i] = true,
        }
    }
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && linked[end] {
            end += 1;
        }
        if end - start > 1 || (start == 0 && floor) {
            let value = if start == 0 && floor {
                0.0
            } else {
                s.q[start..end].iter().sum::<f64>() / (end - start) as f64
            };
            s.q[start..end].iter_mut().for_each(|q| *q = value);
        }
        start = end;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Events(u64),
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchPolicy {
    /// Fail with [`Error::SingularOrbit`].
    Stop,
    /// End the log before the singular collision and record why.
    Truncate,
    Branch { max_depth: usize },
}

impl Default for BranchPolicy {
    fn default() -> Self {
        BranchPolicy::Stop
    }
}

/// Time-ordered record of one (sub)orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub config: MassConfig,
    pub initial: BallState,
    pub events: Vec<CollisionEvent>,
    pub final_state: BallState,
    /// Empty for an unbranched orbit, otherwise a word in {a, b}.
    pub branch: String,
    pub seed: Option<u64>,
    /// Why the log ended before the horizon, if it did.
    pub terminated: Option<String>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// One application of the Poincaré map: fly to the next collision and apply it.
pub fn poincare_step(cfg: &MassConfig, s: &BallState) -> Result<(BallState, CollisionEvent)> {
    let mut sim = Simulator::new(cfg, s.clone())?;
    let mut events = sim.step_regular()?;
    let ev = events.remove(0);
    Ok((sim.state().clone(), ev))
}

/// Run an orbit until `horizon`. Returns one log, or one log per branch when
/// `policy` branches at singular events.
pub fn simulate(
    cfg: &MassConfig,
    s0: &BallState,
    horizon: Horizon,
    policy: BranchPolicy,
) -> Result<Vec<EventLog>> {
    let sim = Simulator::new(cfg, s0.clone())?;
    let root = EventLog {
        config: cfg.clone(),
        initial: s0.clone(),
        events: Vec::new(),
        final_state: s0.clone(),
        branch: String::new(),
        seed: None,
        terminated: None,
    };
    let mut out = Vec::new();
    run_branch(sim, root, horizon, policy, 0, &mut out)?;
    Ok(out)
}

fn horizon_reached(horizon: Horizon, log: &EventLog) -> bool {
    match horizon {
        Horizon::Events(n) => log.events.len() as u64 >= n,
        Horizon::Time(_) => false,
    }
}

fn run_branch(
    mut sim: Simulator<'_>,
    mut log: EventLog,
    horizon: Horizon,
    policy: BranchPolicy,
    depth: usize,
    out: &mut Vec<EventLog>,
) -> Result<()> {
    while !horizon_reached(horizon, &log) {
        let before = sim.clone();
        match sim.step()? {
            Step::Regular(events) => {
                if let Horizon::Time(t_end) = horizon {
                    if events[0].t > t_end {
                        sim = before;
                        break;
                    }
                }
                log.events.extend(events);
            }
            Step::Singular(report) => {
                if let Horizon::Time(t_end) = horizon {
                    if report.t > t_end {
                        break;
                    }
                }
                match policy {
                    BranchPolicy::Stop => return Err(Error::SingularOrbit(Box::new(report))),
                    BranchPolicy::Truncate => {
                        log.terminated = Some(format!("singular: {report}"));
                        break;
                    }
                    BranchPolicy::Branch { max_depth } if depth >= max_depth => {
                        log.terminated = Some(format!("branch depth cap {max_depth} at {report}"));
                        break;
                    }
                    BranchPolicy::Branch { .. } => {
                        for order in [BranchOrder::LowerFirst, BranchOrder::UpperFirst] {
                            let mut child = sim.clone();
                            let mut child_log = log.clone();
                            child_log.branch.push(order.tag());
                            child_log.events.extend(child.resolve_singular(&report, order)?);
                            run_branch(child, child_log, horizon, policy, depth + 1, out)?;
                        }
                        return Ok(());
                    }
                }
            }
        }
    }
    log.final_state = sim.state().clone();
    out.push(log);
    Ok(())
}
