use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{build_wedge, special_residual, to_wedge, Face, WedgeSim};
use crate::error::{Error, Result};
use crate::sim::{BallState, CollisionEvent, MassConfig, Simulator};

/// Event-by-event comparison of a three-ball orbit with the wedge billiard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub events: usize,
    /// Largest `|t_wedge - t_balls|` over one-step predictions from the mapped state.
    pub max_time_error: f64,
    /// Largest `|x_wedge - to_wedge(q)|` at the predicted hits.
    pub max_position_error: f64,
    /// Largest `|u_wedge - to_wedge(v)|` after the reflection.
    pub max_velocity_error: f64,
    /// Events whose wedge face differs from the collision dictionary.
    pub face_mismatches: usize,
    /// Floor events whose wedge image has a nonzero `e_1` coefficient beyond `1e-12`.
    pub floor_span_violations: usize,
    /// Largest relative drift of the wedge energy along the mapped orbit.
    pub max_energy_drift: f64,
    pub gram_defect: f64,
    pub simple_defect: f64,
    pub special_residual: f64,
    /// Leading events on which an independent, never-resynchronised wedge
    /// run agrees with the orbit to `tol` (limited by chaotic growth).
    pub free_run_agreement: usize,
    pub tol: f64,
}

impl EquivalenceReport {
    pub fn passes(&self) -> bool {
        self.max_time_error <= self.tol
            && self.max_position_error <= self.tol
            && self.max_velocity_error <= self.tol
            && self.face_mismatches == 0
            && self.floor_span_violations == 0
    }
}

fn regular_events(cfg: &MassConfig, s0: &BallState, events: usize) -> Result<Vec<CollisionEvent>> {
    let mut sim = Simulator::new(cfg, s0.clone())?;
    let mut out = Vec::with_capacity(events);
    while out.len() < events {
        out.extend(sim.step_regular()?);
    }
    out.truncate(events);
    Ok(out)
}

/// Compares `events` collisions of the orbit of `s0` with the wedge billiard.
///
/// Each wedge step starts from the image of the previous post-collision
/// state, so the comparison is not swamped by exponential divergence.
pub fn wedge_equivalence(cfg: &MassConfig, s0: &BallState, events: usize, tol: f64) -> Result<EquivalenceReport> {
    let model = build_wedge(cfg)?;
    let evs = regular_events(cfg, s0, events)?;
    let (gram_defect, simple_defect) = model.gram_defects();
    let m = model.masses;
    let mut r = EquivalenceReport {
        events: evs.len(),
        max_time_error: 0.0,
        max_position_error: 0.0,
        max_velocity_error: 0.0,
        face_mismatches: 0,
        floor_span_violations: 0,
        max_energy_drift: 0.0,
        gram_defect,
        simple_defect,
        special_residual: special_residual(m[0], m[1], m[2]),
        free_run_agreement: 0,
        tol,
    };
    let (x0, u0) = to_wedge(cfg, s0)?;
    let e0 = model.energy(&x0, &u0);
    let image = |ev: &CollisionEvent, post: bool| -> Result<(Vector3<f64>, Vector3<f64>)> {
        let v = if post { &ev.v_post } else { &ev.v_pre };
        to_wedge(cfg, &BallState::new(ev.t, ev.q_at.clone(), v.clone()))
    };

    let (mut t, mut x, mut u) = (s0.t, x0, u0);
    let mut k = 0;
    while k < evs.len() {
        let mut sim = WedgeSim::new(&model, t, x, u)?;
        let hits = sim.step()?;
        for hit in &hits {
            let Some(ev) = evs.get(k) else { break };
            let (xe, ue) = image(ev, true)?;
            r.max_time_error = r.max_time_error.max((hit.t - ev.t).abs());
            r.max_position_error = r.max_position_error.max((hit.x - xe).norm());
            r.max_velocity_error = r.max_velocity_error.max((hit.u_post - ue).norm());
            if hit.face != Face::of_collision(ev.kind) {
                r.face_mismatches += 1;
            }
            if ev.kind == crate::sim::CollisionKind::Floor && model.coefficients(&xe)[0].abs() > 1e-12 * (1.0 + xe.norm()) {
                r.floor_span_violations += 1;
            }
            r.max_energy_drift = r.max_energy_drift.max((model.energy(&xe, &ue) - e0).abs() / e0.abs());
            k += 1;
        }
        // resynchronise on the orbit
        let ev = &evs[k - 1];
        let (xe, ue) = image(ev, true)?;
        t = ev.t;
        x = xe;
        u = ue;
    }

    // independent run, for the record
    let mut free = WedgeSim::new(&model, s0.t, x0, u0)?;
    let mut agree = 0;
    'outer: while agree < evs.len() {
        let Ok(hits) = free.step() else { break };
        for hit in hits {
            let Some(ev) = evs.get(agree) else { break 'outer };
            let (xe, _) = image(ev, true)?;
            if (hit.t - ev.t).abs() > tol || (hit.x - xe).norm() > tol || hit.face != Face::of_collision(ev.kind) {
                break 'outer;
            }
            agree += 1;
        }
    }
    r.free_run_agreement = agree;
    if r.events == 0 {
        return Err(Error::InvalidArgument("no events to compare".into()));
    }
    Ok(r)
}
