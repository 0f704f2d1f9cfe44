use std::collections::VecDeque;

use super::jacobian::{collision_jacobian, CollisionJacobian};
use crate::error::Result;
use crate::sim::{BallState, CollisionEvent, MassConfig, Simulator};

/// Streams the collision events of an orbit together with their derivatives.
///
/// Singular clusters end the stream with `Error::SingularOrbit`.
pub struct JacobianStream<'a> {
    sim: Simulator<'a>,
    pending: VecDeque<CollisionEvent>,
    failed: bool,
}

impl<'a> JacobianStream<'a> {
    pub fn new(cfg: &'a MassConfig, state: BallState) -> Result<Self> {
        Ok(JacobianStream {
            sim: Simulator::new(cfg, state)?,
            pending: VecDeque::new(),
            failed: false,
        })
    }

    pub fn state(&self) -> &BallState {
        self.sim.state()
    }

    pub fn next_event(&mut self) -> Result<(CollisionEvent, CollisionJacobian)> {
        if self.pending.is_empty() {
            self.pending.extend(self.sim.step_regular()?);
        }
        let ev = self.pending.pop_front().expect("step yields at least one event");
        let jac = collision_jacobian(self.sim.config(), &ev)?;
        Ok((ev, jac))
    }
}

impl Iterator for JacobianStream<'_> {
    type Item = Result<(CollisionEvent, CollisionJacobian)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.next_event();
        if r.is_err() {
            self.failed = true;
        }
        Some(r)
    }
}

/// Jacobians of the first `n` events of an orbit.
pub fn orbit_jacobians(cfg: &MassConfig, state: &BallState, n: usize) -> Result<Vec<(CollisionEvent, CollisionJacobian)>> {
    JacobianStream::new(cfg, state.clone())?.take(n).collect()
}
