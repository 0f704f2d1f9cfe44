use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BallState, MassConfig};
use crate::error::{Error, Result};

/// Time-difference tolerance for classifying a cluster of collisions as singular.
pub const EPS_SING: f64 = 1e-10;

/// Tolerance used when checking that a state sits on a collision section.
pub const SECTION_TOL: f64 = 1e-9;

/// Simultaneity tolerance for collisions `dt` ahead of the current state.
pub fn eps_t(dt: f64) -> f64 {
    1e-12 * dt.abs().max(1.0)
}

/// Floor collision of ball 1, or collision of balls `i` and `i+1` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CollisionKind {
    Floor,
    Pair(usize),
}

impl CollisionKind {
    /// Sort key: the floor is "pair 0".
    pub fn index(self) -> usize {
        match self {
            CollisionKind::Floor => 0,
            CollisionKind::Pair(i) => i,
        }
    }

    /// 0-based ball indices involved.
    pub fn balls(self) -> (Option<usize>, usize) {
        match self {
            CollisionKind::Floor => (None, 0),
            CollisionKind::Pair(i) => (Some(i - 1), i),
        }
    }

    pub fn shares_ball(self, other: CollisionKind) -> bool {
        let (a0, a1) = self.balls();
        let (b0, b1) = other.balls();
        let a = [a0, Some(a1)];
        let b = [b0, Some(b1)];
        a.iter().flatten().any(|x| b.iter().flatten().any(|y| x == y))
    }

    /// Index `l` of the section `M_l` that the post-collision state belongs to.
    pub fn section_label(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for CollisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollisionKind::Floor => write!(f, "floor"),
            CollisionKind::Pair(i) => write!(f, "pair({},{})", i, i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CollisionKind,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NextCollision {
    pub kind: CollisionKind,
    pub dt: f64,
    /// Other collisions within `eps_t` of the earliest one.
    pub simultaneous: Vec<CollisionKind>,
    /// All candidates, earliest first.
    pub candidates: Vec<Candidate>,
}

/// Time for the lowest ball to reach the floor from height `q1` with velocity `v1`.
pub fn floor_time(q1: f64, v1: f64) -> f64 {
    let q = q1.max(0.0);
    let root = (v1 * v1 + 2.0 * q).sqrt();
    if v1 >= 0.0 {
        v1 + root
    } else if root - v1 > 0.0 {
        2.0 * q / (root - v1)
    } else {
        0.0
    }
}

/// Collision candidates ordered by time. Adjacent pairs in contact that are
/// listed in `just_hit` are skipped, so that a pair leaving contact is not
/// re-detected because of rounding in the post-collision velocities.
pub fn collision_candidates(s: &BallState, just_hit: &[CollisionKind]) -> Vec<Candidate> {
    let n = s.q.len();
    let mut out = Vec::with_capacity(n);
    out.push(Candidate {
        kind: CollisionKind::Floor,
        dt: floor_time(s.q[0], s.v[0]),
    });
    for i in 1..n {
        let rel = s.v[i - 1] - s.v[i];
        if rel <= 0.0 {
            continue;
        }
        let gap = s.q[i] - s.q[i - 1];
        let kind = CollisionKind::Pair(i);
        if gap <= 0.0 && just_hit.contains(&kind) {
            continue;
        }
        out.push(Candidate {
            kind,
            dt: gap.max(0.0) / rel,
        });
    }
    out.sort_by(|a, b| a.dt.total_cmp(&b.dt).then(a.kind.cmp(&b.kind)));
    out
}

pub fn next_collision(s: &BallState, just_hit: &[CollisionKind]) -> NextCollision {
    let candidates = collision_candidates(s, just_hit);
    // the floor root is finite for any finite state
    let first = candidates[0];
    let tol = eps_t(first.dt);
    let simultaneous = candidates[1..]
        .iter()
        .take_while(|c| c.dt - first.dt <= tol)
        .map(|c| c.kind)
        .collect();
    NextCollision {
        kind: first.kind,
        dt: first.dt,
        simultaneous,
        candidates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Singularity {
    None,
    Triple,
    LowerTwoAtFloor,
}

impl fmt::Display for Singularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Singularity::None => "none",
            Singularity::Triple => "triple",
            Singularity::LowerTwoAtFloor => "lower-two-at-floor",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Regular,
    /// Collisions coinciding in time that share no ball; they commute.
    RegularSimultaneous(Vec<CollisionKind>),
    Singular {
        kind: Singularity,
        cluster: Vec<CollisionKind>,
    },
}

/// Classify the earliest candidates (as returned by [`collision_candidates`]).
pub fn detect_singularity(candidates: &[Candidate], eps_sing: f64) -> Classification {
    let Some(first) = candidates.first() else {
        return Classification::Regular;
    };
    let cluster: Vec<CollisionKind> = candidates
        .iter()
        .take_while(|c| c.dt - first.dt <= eps_sing)
        .map(|c| c.kind)
        .collect();
    if cluster.len() < 2 {
        return Classification::Regular;
    }
    for (a_idx, &a) in cluster.iter().enumerate() {
        for &b in &cluster[a_idx + 1..] {
            if a.shares_ball(b) {
                let kind = if matches!((a, b), (CollisionKind::Pair(_), CollisionKind::Pair(_))) {
                    Singularity::Triple
                } else {
                    Singularity::LowerTwoAtFloor
                };
                return Classification::Singular { kind, cluster };
            }
        }
    }
    Classification::RegularSimultaneous(cluster)
}

/// Collision law on the velocity vector, without any section checks.
pub fn collide_velocities(cfg: &MassConfig, v: &mut [f64], kind: CollisionKind) {
    match kind {
        CollisionKind::Floor => v[0] = -v[0],
        CollisionKind::Pair(i) => {
            let g = cfg.gamma(i);
            let (a, b) = (v[i - 1], v[i]);
            v[i - 1] = g * a + (1.0 - g) * b;
            v[i] = (1.0 + g) * a - g * b;
        }
    }
}

/// Apply a collision to a state sitting on the matching pre-collision section.
pub fn apply_collision(cfg: &MassConfig, s: &BallState, kind: CollisionKind) -> Result<BallState> {
    s.check_dim(cfg)?;
    let scale = 1.0 + s.q.iter().fold(0.0f64, |a, q| a.max(q.abs()));
    let vscale = 1.0 + s.v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let off = |reason: String| Error::NotOnSection {
        kind: kind.to_string(),
        reason,
    };
    match kind {
        CollisionKind::Floor => {
            if s.q[0].abs() > SECTION_TOL * scale {
                return Err(off(format!("q1 = {} is not at the floor", s.q[0])));
            }
            if s.v[0] > SECTION_TOL * vscale {
                return Err(off(format!("v1 = {} is moving away from the floor", s.v[0])));
            }
        }
        CollisionKind::Pair(i) => {
            if i == 0 || i >= cfg.n() {
                return Err(off(format!("no pair {i} for {} balls", cfg.n())));
            }
            let gap = s.q[i] - s.q[i - 1];
            if gap.abs() > SECTION_TOL * scale {
                return Err(off(format!("balls are {gap} apart")));
            }
            if s.v[i - 1] - s.v[i] < -SECTION_TOL * vscale {
                return Err(off("balls are separating".to_string()));
            }
        }
    }
    let mut out = s.clone();
    collide_velocities(cfg, &mut out.v, kind);
    Ok(out)
}
