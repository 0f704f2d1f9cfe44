use serde::{Deserialize, Serialize};

use super::collision::next_collision;
use super::MassConfig;
use crate::error::{Error, Result};

/// Positions and velocities of all balls at time `t`, bottom ball first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl BallState {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(q.len(), v.len());
        BallState { t, q, v }
    }

    pub fn at_rest(n: usize) -> Self {
        BallState::new(0.0, vec![0.0; n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub(crate) fn check_dim(&self, cfg: &MassConfig) -> Result<()> {
        if self.q.len() != cfg.n() || self.v.len() != cfg.n() {
            return Err(Error::DimensionMismatch {
                expected: cfg.n(),
                got: self.q.len().min(self.v.len()),
            });
        }
        Ok(())
    }

    /// Largest ordering violation `max(q_i - q_{i+1}, -q_1, 0)`.
    pub fn ordering_excess(&self) -> (usize, f64) {
        let mut worst = (0, (-self.q[0]).max(0.0));
        for i in 0..self.q.len() - 1 {
            let d = self.q[i] - self.q[i + 1];
            if d > worst.1 {
                worst = (i, d);
            }
        }
        worst
    }
}

/// `H = sum m_i v_i^2 / 2 + m_i q_i`.
pub fn hamiltonian(cfg: &MassConfig, s: &BallState) -> f64 {
    cfg.masses()
        .iter()
        .zip(s.q.iter().zip(&s.v))
        .map(|(m, (q, v))| m * (0.5 * v * v + q))
        .sum()
}

pub fn kinetic_energy(cfg: &MassConfig, v: &[f64]) -> f64 {
    cfg.masses()
        .iter()
        .zip(v)
        .map(|(m, v)| 0.5 * m * v * v)
        .sum()
}

pub fn momentum(cfg: &MassConfig, v: &[f64]) -> f64 {
    cfg.masses().iter().zip(v).map(|(m, v)| m * v).sum()
}

/// Free flight under unit gravity for `dt`. Does not look for collisions.
pub fn advance(s: &BallState, dt: f64) -> BallState {
    let half = 0.5 * dt * dt;
    BallState {
        t: s.t + dt,
        q: s.q.iter().zip(&s.v).map(|(q, v)| q + v * dt - half).collect(),
        v: s.v.iter().map(|v| v - dt).collect(),
    }
}

/// [`advance`] guarded against flying through a collision.
pub fn advance_checked(cfg: &MassConfig, s: &BallState, dt: f64) -> Result<BallState> {
    if dt < 0.0 {
        return Err(Error::InvalidArgument(format!("negative flight time {dt}")));
    }
    s.check_dim(cfg)?;
    let next = next_collision(s, &[]);
    if next.dt < dt && next.dt > 0.0 {
        return Err(Error::CollisionSkipped { dt, at: next.dt });
    }
    Ok(advance(s, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn oracle_energy(m: &[f64], q: &[f64], v: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..m.len() {
            e += m[i] * v[i] * v[i] / 2.0;
            e += m[i] * q[i];
        }
        e
    }

    #[test]
    fn hamiltonian_examples() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s = BallState::new(0.0, vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]);
        assert_relative_eq!(hamiltonian(&cfg, &s), 6.0, epsilon = 1e-15);
        assert_relative_eq!(hamiltonian(&cfg, &s), oracle_energy(cfg.masses(), &s.q, &s.v));
        assert_eq!(hamiltonian(&cfg, &BallState::at_rest(3)), 0.0);

        let cfg2 = MassConfig::new(&[2.0, 1.0], 1.0).unwrap();
        let s2 = BallState::new(0.0, vec![0.0, 0.0], vec![1.0, 0.0]);
        assert_relative_eq!(hamiltonian(&cfg2, &s2), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn free_flight_closed_form() {
        let s = BallState::new(0.0, vec![0.0], vec![1.0]);
        let s2 = advance(&s, 2.0);
        assert_eq!(s2.q[0], 0.0);
        assert_eq!(s2.v[0], -1.0);
        assert_eq!(s2.t, 2.0);

        let s = BallState::new(0.0, vec![1.0], vec![0.0]);
        let s2 = advance(&s, 1.0);
        assert_eq!(s2.q[0], 0.5);
        assert_eq!(s2.v[0], -1.0);

        let s = BallState::new(3.0, vec![0.2, 0.7], vec![0.1, -0.4]);
        assert_eq!(advance(&s, 0.0), s);
    }

    #[test]
    fn checked_flight_refuses_to_skip_collisions() {
        let cfg = MassConfig::new(&[2.0, 1.0], 1.0).unwrap();
        let s = BallState::new(0.0, vec![0.0, 1.0], vec![1.0, 0.0]);
        assert!(advance_checked(&cfg, &s, 0.5).is_ok());
        assert!(matches!(
            advance_checked(&cfg, &s, 1.5),
            Err(Error::CollisionSkipped { .. })
        ));
    }
}
