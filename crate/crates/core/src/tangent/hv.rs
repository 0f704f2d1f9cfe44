use serde::{Deserialize, Serialize};

use crate::sim::{BallState, MassConfig};

/// Per-ball energies `h_i = m_i v_i^2 / 2 + m_i q_i` and velocities.
///
/// Between collisions every `h_i` is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HVState {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl HVState {
    pub fn total(&self) -> f64 {
        self.h.iter().sum()
    }
}

pub fn to_hv(cfg: &MassConfig, s: &BallState) -> HVState {
    let h = cfg
        .masses()
        .iter()
        .zip(s.q.iter().zip(&s.v))
        .map(|(m, (q, v))| 0.5 * m * v * v + m * q)
        .collect();
    HVState { h, v: s.v.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{advance, hamiltonian};

    #[test]
    fn example_energies() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s = BallState::new(0.0, vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]);
        let hv = to_hv(&cfg, &s);
        assert_eq!(hv.h, vec![1.5, 2.0, 2.5]);
        assert_eq!(hv.total(), hamiltonian(&cfg, &s));
        let rest = to_hv(&cfg, &BallState::at_rest(3));
        assert!(rest.h.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn constant_in_free_flight() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s = BallState::new(0.0, vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]);
        let a = to_hv(&cfg, &s);
        let b = to_hv(&cfg, &advance(&s, 0.37));
        for (x, y) in a.h.iter().zip(&b.h) {
            assert!((x - y).abs() < 1e-14);
        }
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - 0.37 - y).abs() < 1e-15);
        }
    }
}
