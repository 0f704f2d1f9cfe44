use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Face, WedgeModel};
use crate::error::{Error, Result};
use crate::sim::jsonl::VERSION;

/// Relative distance to a second face below which a hit counts as an edge hit.
pub const EDGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeEvent {
    pub n: u64,
    pub t: f64,
    pub face: Face,
    pub x: Vector3<f64>,
    pub u_pre: Vector3<f64>,
    pub u_post: Vector3<f64>,
}

/// A point particle under constant acceleration reflecting in the wedge faces.
#[derive(Debug, Clone)]
pub struct WedgeSim<'a> {
    model: &'a WedgeModel,
    pub t: f64,
    pub x: Vector3<f64>,
    pub u: Vector3<f64>,
    events: u64,
}

/// First `s > 0` with `a + b s + c s^2 / 2 = 0` reached from above, if any.
fn descent_time(a: f64, b: f64, c: f64) -> Option<f64> {
    let a = a.max(0.0);
    if c.abs() <= 1e-15 * (b.abs() + a.abs()).max(1.0) {
        return (b < 0.0).then(|| a / -b);
    }
    if c > 0.0 {
        // accelerating away from the face: a hit only before the turning point
        let disc = b * b - 2.0 * c * a;
        if b >= 0.0 || disc < 0.0 {
            return None;
        }
        return Some(2.0 * a / (-b + disc.sqrt()));
    }
    let root = (b * b - 2.0 * c * a).max(0.0).sqrt();
    // the larger root of c s^2 / 2 + b s + a, written without cancellation
    Some(if b >= 0.0 { (b + root) / -c } else { 2.0 * a / (root - b) })
}

impl<'a> WedgeSim<'a> {
    /// Starts from `x` inside the wedge.
    pub fn new(model: &'a WedgeModel, t: f64, x: Vector3<f64>, u: Vector3<f64>) -> Result<Self> {
        let c = model.coefficients(&x);
        let min = c.min();
        if min < -EDGE_TOL * (1.0 + x.norm()) {
            return Err(Error::OutsideWedge(min));
        }
        Ok(WedgeSim { model, t, x, u, events: 0 })
    }

    pub fn model(&self) -> &WedgeModel {
        self.model
    }

    pub fn position_at(&self, dt: f64) -> Vector3<f64> {
        self.x + self.u * dt + self.model.gravity * (0.5 * dt * dt)
    }

    /// Time to the next face hit and the face.
    fn next_hit(&self) -> (f64, Face) {
        let g = self.model.gravity;
        Face::ALL
            .iter()
            .filter_map(|&f| {
                let n = self.model.normal(f);
                descent_time(n.dot(&self.x), n.dot(&self.u), n.dot(&g)).map(|s| (s, f))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("the floor face is always reached")
    }

    /// Fly to the next face and reflect. Hitting the edge of two orthogonal
    /// faces reflects in both (two events at the same time); any other edge
    /// is an error.
    pub fn step(&mut self) -> Result<Vec<WedgeEvent>> {
        let (dt, face) = self.next_hit();
        let x = self.position_at(dt);
        let u_pre = self.u + self.model.gravity * dt;
        let t = self.t + dt;
        let scale = EDGE_TOL * (1.0 + x.norm());
        let mut faces = vec![face];
        for f in Face::ALL {
            if f != face && self.model.normal(f).dot(&x) < scale {
                faces.push(f);
            }
        }
        if faces.len() > 1 {
            let orthogonal = faces.len() == 2 && self.model.normal(faces[0]).dot(&self.model.normal(faces[1])).abs() < 1e-12;
            if !orthogonal {
                let edge = match (faces.contains(&Face::E12), faces.contains(&Face::E13)) {
                    (true, true) => "e1",
                    (true, false) => "e2",
                    _ => "e3",
                };
                return Err(Error::EdgeHit { edge: edge.into(), t });
            }
            faces.sort();
        }
        let mut out = Vec::with_capacity(faces.len());
        let mut u = u_pre;
        for f in faces {
            let post = self.model.reflect(f, &u);
            self.events += 1;
            out.push(WedgeEvent {
                n: self.events,
                t,
                face: f,
                x,
                u_pre: u,
                u_post: post,
            });
            u = post;
        }
        self.t = t;
        self.x = x;
        self.u = u;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeLog {
    pub masses: [f64; 3],
    pub t0: f64,
    pub x0: Vector3<f64>,
    pub u0: Vector3<f64>,
    pub events: Vec<WedgeEvent>,
    /// Edge hit that ended the run early, if any.
    pub terminated: Option<String>,
}

/// Reflections of the particle started at `(x0, u0)` until `events` face hits.
pub fn simulate_wedge(model: &WedgeModel, x0: Vector3<f64>, u0: Vector3<f64>, events: usize) -> Result<WedgeLog> {
    let mut sim = WedgeSim::new(model, 0.0, x0, u0)?;
    let mut log = WedgeLog {
        masses: model.masses,
        t0: 0.0,
        x0,
        u0,
        events: Vec::with_capacity(events),
        terminated: None,
    };
    while log.events.len() < events {
        match sim.step() {
            Ok(evs) => log.events.extend(evs),
            Err(e @ Error::EdgeHit { .. }) => {
                log.terminated = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    log.events.truncate(events);
    Ok(log)
}

/// JSON lines in the event-log layout, with `kind` one of the face labels.
pub fn write_wedge_jsonl<W: Write>(log: &WedgeLog, config_hash: Option<&str>, mut w: W) -> Result<()> {
    let io = |e| Error::io("<wedge log>", e);
    let header = serde_json::json!({
        "config_hash": config_hash,
        "masses": log.masses,
        "version": VERSION,
        "t0": log.t0,
        "x0": log.x0.as_slice(),
        "u0": log.u0.as_slice(),
        "terminated": log.terminated,
    });
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for ev in &log.events {
        let line = serde_json::json!({
            "n": ev.n,
            "t": ev.t,
            "kind": ev.face.label(),
            "q": ev.x.as_slice(),
            "v_pre": ev.u_pre.as_slice(),
            "v_post": ev.u_post.as_slice(),
        });
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MassConfig;
    use crate::wedge::build_wedge;

    fn model() -> WedgeModel {
        build_wedge(&MassConfig::new(&[2.0, 1.0, 3.0 / 7.0], 1.0).unwrap()).unwrap()
    }

    #[test]
    fn energy_is_conserved() {
        let w = model();
        let x0 = w.e(1) * 1.0 + w.e(2) * 0.7 + w.e(3) * 0.4;
        let u0 = Vector3::new(0.3, -0.2, 0.5);
        let e0 = w.energy(&x0, &u0);
        let log = simulate_wedge(&w, x0, u0, 10_000).unwrap();
        assert_eq!(log.events.len(), 10_000);
        for ev in &log.events {
            assert!((w.energy(&ev.x, &ev.u_post) - e0).abs() < 1e-9 * e0.abs());
            assert!(w.coefficients(&ev.x).min() > -1e-9);
        }
    }

    #[test]
    fn motion_in_a_face_plane_stays_there() {
        // the plane of W(e_1, e_2) contains gravity
        let w = model();
        let x0 = w.e(1) * 2.0 + w.e(2) * 0.5;
        let u0 = w.e(1) * 0.3 - w.e(2) * 0.2;
        let mut sim = WedgeSim::new(&w, 0.0, x0, u0).unwrap();
        let n = w.normal(Face::E12);
        for s in [0.1, 0.5, 1.0] {
            assert!(n.dot(&sim.position_at(s)).abs() < 1e-15);
        }
        let ev = sim.step().unwrap();
        assert!(ev.iter().all(|e| n.dot(&e.x).abs() < 1e-14));
    }

    #[test]
    fn outside_start_is_rejected() {
        let w = model();
        assert!(matches!(
            WedgeSim::new(&w, 0.0, Vector3::new(-1.0, 0.0, 0.0), Vector3::zeros()),
            Err(Error::OutsideWedge(_))
        ));
    }

    #[test]
    fn triple_edge_is_reported() {
        let w = model();
        // fall straight down the e_1 axis from inside, aimed at the edge
        let target = w.e(1) * 3.0;
        let inward = (w.e(2) + w.e(3)).normalize();
        let x0 = target + inward * 0.5;
        let mut sim = WedgeSim::new(&w, 0.0, x0, -inward).unwrap();
        let r = sim.step();
        assert!(matches!(r, Err(Error::EdgeHit { ref edge, .. }) if edge == "e1"), "{r:?}");
    }

    #[test]
    fn descent_times() {
        assert_eq!(descent_time(1.0, -2.0, 0.0), Some(0.5));
        assert_eq!(descent_time(1.0, 2.0, 0.0), None);
        // 1 + 0 s - s^2 / 2
        assert!((descent_time(1.0, 0.0, -1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(descent_time(0.0, 1.0, -2.0), Some(1.0));
        assert_eq!(descent_time(1.0, -1.0, 1.0), None);
    }
}
