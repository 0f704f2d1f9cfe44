use serde::{Deserialize, Serialize};

use super::cone::{q_form, sample_cone_vector, ConePart, TangentVector};
use super::jacobian::TangentMap;
use super::orbit::JacobianStream;
use crate::error::{Error, Result};
use crate::sim::{rng_from_seed, BallState, MassConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TauOutcome {
    /// Elapsed time since the start and the number of collisions after which
    /// every sampled vector has `Q > E0`.
    Finite { tau: f64, events: usize },
    Exceeded { cutoff: usize },
}

impl TauOutcome {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            TauOutcome::Finite { tau, .. } => Some(tau),
            TauOutcome::Exceeded { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub outcome: TauOutcome,
    pub e0: f64,
    pub interior: usize,
    pub boundary: usize,
    pub seed: u64,
    /// The vector that crossed `E0` last (or has the smallest `Q` at the cutoff).
    pub slowest: TangentVector,
}

/// First event time after which `Q(d phi^t v) > e0` for all sampled unit
/// vectors `v` of the closed cone, boundary vectors included.
///
/// `Q` is constant between collisions and non-decreasing at each of them, so
/// it suffices to look at collision times.
pub fn tau_e0(
    cfg: &MassConfig,
    state: &BallState,
    e0: f64,
    interior: usize,
    boundary: usize,
    cutoff: usize,
    seed: u64,
) -> Result<TauReport> {
    if !(e0 > 0.0) || cutoff == 0 {
        return Err(Error::InvalidArgument("tau needs E0 > 0 and a positive cutoff".into()));
    }
    let dim = cfg.n() - 1;
    let mut rng = rng_from_seed(seed);
    let mut initial: Vec<TangentVector> = Vec::with_capacity(interior + boundary);
    for k in 0..interior + boundary {
        let part = if k < interior { ConePart::Interior } else { ConePart::Boundary };
        initial.push(sample_cone_vector(&mut rng, dim, part));
    }
    let mut current = initial.clone();
    let mut pending: Vec<usize> = (0..current.len()).filter(|&k| !(q_form(&current[k]) > e0)).collect();
    let mut slowest = pending.first().copied().unwrap_or(0);
    let report = |outcome, slowest: usize| TauReport {
        outcome,
        e0,
        interior,
        boundary,
        seed,
        slowest: initial.get(slowest).cloned().unwrap_or_else(|| TangentVector::zeros(dim)),
    };
    if pending.is_empty() {
        return Ok(report(TauOutcome::Finite { tau: 0.0, events: 0 }, slowest));
    }
    let mut stream = JacobianStream::new(cfg, state.clone())?;
    for events in 1..=cutoff {
        let (ev, jac) = stream.next_event()?;
        for u in current.iter_mut() {
            jac.apply(u);
        }
        let before = pending.clone();
        pending.retain(|&k| !(q_form(&current[k]) > e0));
        if pending.is_empty() {
            slowest = before[0];
            return Ok(report(
                TauOutcome::Finite {
                    tau: ev.t - state.t,
                    events,
                },
                slowest,
            ));
        }
    }
    let lowest = pending
        .iter()
        .copied()
        .min_by(|&a, &b| q_form(&current[a]).partial_cmp(&q_form(&current[b])).unwrap())
        .unwrap();
    Ok(report(TauOutcome::Exceeded { cutoff }, lowest))
}
