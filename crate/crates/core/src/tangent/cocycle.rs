use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::DMatrix;

use super::cone::TangentVector;
use super::jacobian::{collision_jacobian, TangentMap};
use crate::error::{Error, Result};
use crate::sim::{EventLog, MassConfig};

/// Entries are rescaled once they exceed this magnitude.
const RESCALE_AT: f64 = 1e64;

/// Chronological product `J_n ... J_1` of collision derivatives.
///
/// The product is stored as `exp(log_scale) * normalized` so that long
/// products neither overflow nor lose their direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    normalized: DMatrix<f64>,
    log_scale: f64,
    n: usize,
}

impl Cocycle {
    pub fn identity(dim: usize) -> Self {
        Cocycle {
            normalized: DMatrix::identity(2 * dim, 2 * dim),
            log_scale: 0.0,
            n: 0,
        }
    }

    /// `N - 1`.
    pub fn dim(&self) -> usize {
        self.normalized.nrows() / 2
    }

    /// `exp(log_scale) * normalized` as the product of `n` factors.
    pub fn from_parts(normalized: DMatrix<f64>, log_scale: f64, n: usize) -> Self {
        Cocycle {
            normalized,
            log_scale,
            n,
        }
    }

    /// Number of factors.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Left-multiply by one factor.
    pub fn push<M: TangentMap + ?Sized>(&mut self, factor: &M) {
        let rows = self.normalized.nrows();
        let d = rows / 2;
        for col in self.normalized.as_mut_slice().chunks_mut(rows) {
            let (dxi, deta) = col.split_at_mut(d);
            factor.apply_parts(dxi, deta);
        }
        self.n += 1;
        let big = self.normalized.amax();
        if big > RESCALE_AT {
            self.normalized /= big;
            self.log_scale += big.ln();
        }
    }

    pub fn normalized(&self) -> &DMatrix<f64> {
        &self.normalized
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// The product itself; entries may overflow for very long products.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.normalized * self.log_scale.exp()
    }

    pub fn apply(&self, u: &TangentVector) -> TangentVector {
        let y = self.matrix() * u.to_dvector();
        TangentVector::from_slice(y.as_slice())
    }

    /// Row-major CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.matrix())
    }
}

/// Row-major CSV dump with 17 significant digits.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", m[(r, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Product of the derivatives of `log.events[range]`.
pub fn cocycle(cfg: &MassConfig, log: &EventLog, range: Range<usize>) -> Result<Cocycle> {
    if range.end > log.events.len() || range.start > range.end {
        return Err(Error::InvalidArgument(format!(
            "event range {range:?} outside a log of {} events",
            log.events.len()
        )));
    }
    let mut out = Cocycle::identity(cfg.n() - 1);
    for ev in &log.events[range] {
        out.push(&collision_jacobian(cfg, ev)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{sample_state, simulate, BranchPolicy, Horizon};
    use crate::tangent::cone::q_form;
    use crate::tangent::jacobian::{symplectic_defect, CollisionJacobian};
    use crate::sim::CollisionKind;

    fn two_ball_pair(alpha: f64) -> CollisionJacobian {
        CollisionJacobian {
            kind: CollisionKind::Pair(1),
            coeff: alpha,
            gamma: 1.0 / 3.0,
            dim: 1,
        }
    }

    #[test]
    fn empty_range_is_identity() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s0 = sample_state(&cfg, 1).unwrap();
        let log = simulate(&cfg, &s0, Horizon::Events(10), BranchPolicy::Stop).unwrap().remove(0);
        let c = cocycle(&cfg, &log, 3..3).unwrap();
        assert_eq!(c.matrix(), DMatrix::identity(4, 4));
    }

    #[test]
    fn two_ball_product() {
        let cfg = MassConfig::new(&[1.0, 0.5], 1.0).unwrap();
        let mut c = Cocycle::identity(1);
        c.push(&CollisionJacobian::floor(&cfg, -2.0).unwrap());
        c.push(&two_ball_pair(0.5));
        assert_eq!(c.matrix(), DMatrix::from_row_slice(2, 2, &[-1.5, -0.5, -1.0, -1.0]));
        let v = TangentVector::new(vec![1.0], vec![1.0]);
        let w = c.apply(&v);
        assert_eq!(w, TangentVector::new(vec![-2.0], vec![-2.0]));
        assert_eq!(q_form(&v), 1.0);
        assert_eq!(q_form(&w), 4.0);
    }

    #[test]
    fn products_stay_symplectic() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s0 = sample_state(&cfg, 2).unwrap();
        let log = simulate(&cfg, &s0, Horizon::Events(40), BranchPolicy::Stop).unwrap().remove(0);
        let c = cocycle(&cfg, &log, 0..40).unwrap();
        let m = c.normalized() * c.log_scale().exp();
        let scale = m.amax().powi(2);
        assert!(symplectic_defect(&m) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn rescaling_keeps_the_product() {
        let cfg = MassConfig::new(&[2.0, 1.0], 1.0).unwrap();
        let floor = CollisionJacobian::floor(&cfg, -0.01).unwrap();
        let mut c = Cocycle::identity(1);
        for _ in 0..400 {
            c.push(&floor);
            c.push(&two_ball_pair(3.0));
        }
        assert!(c.log_scale() > 0.0);
        assert!(c.normalized().amax() <= 1e64);
    }

    #[test]
    fn singular_events_are_rejected() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let mut log = simulate(&cfg, &sample_state(&cfg, 3).unwrap(), Horizon::Events(5), BranchPolicy::Stop)
            .unwrap()
            .remove(0);
        log.events[2].singular = crate::sim::Singularity::Triple;
        assert!(matches!(cocycle(&cfg, &log, 0..5), Err(Error::SingularEventInRange(2))));
        assert!(cocycle(&cfg, &log, 0..2).is_ok());
    }

    #[test]
    fn csv_dump_is_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let csv = matrix_csv(&m);
        let first: Vec<f64> = csv.lines().next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, vec![1.0, 2.0]);
    }
}
