use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cone::TangentVector;
use crate::error::{Error, Result};
use crate::sim::{CollisionEvent, CollisionKind, MassConfig};

/// Linear map on reduced tangent vectors.
pub trait TangentMap {
    fn apply_parts(&self, dxi: &mut [f64], deta: &mut [f64]);

    fn apply(&self, u: &mut TangentVector) {
        self.apply_parts(&mut u.dxi, &mut u.deta);
    }
}

/// Derivative of one collision map in reduced `(dxi, deta)` coordinates.
///
/// Floor: `[[I, 0], [B, I]]` with `b_11 = beta`.
/// Pair `i`: `[[D_i, F_i], [0, D_i^T]]`, `D_i` the identity except for row
/// `i` = `(1 - gamma_i, -1, 1 + gamma_i)` in columns `i-1, i, i+1`, and
/// `f_ii = -alpha_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionJacobian {
    pub kind: CollisionKind,
    /// `beta` for the floor, `alpha_i` for a pair.
    pub coeff: f64,
    /// `gamma_i` for a pair, unused for the floor.
    pub gamma: f64,
    /// `N - 1`.
    pub dim: usize,
}

/// Pair collisions with `alpha_i` below this are grazing.
pub const GRAZING_ALPHA: f64 = 1e-14;

impl CollisionJacobian {
    pub fn floor(cfg: &MassConfig, v1_pre: f64) -> Result<Self> {
        if !(v1_pre < 0.0) {
            return Err(Error::DegenerateBasePoint(v1_pre));
        }
        Ok(CollisionJacobian {
            kind: CollisionKind::Floor,
            coeff: cfg.beta(v1_pre),
            gamma: 0.0,
            dim: cfg.n() - 1,
        })
    }

    /// Pair derivative with pre-collision gap `v_i - v_{i+1} = gap`.
    pub fn pair(cfg: &MassConfig, pair: usize, gap: f64) -> Self {
        CollisionJacobian {
            kind: CollisionKind::Pair(pair),
            coeff: cfg.alpha(pair, gap),
            gamma: cfg.gamma(pair),
            dim: cfg.n() - 1,
        }
    }

    pub fn is_grazing(&self) -> bool {
        matches!(self.kind, CollisionKind::Pair(_)) && self.coeff < GRAZING_ALPHA
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::identity(2 * d, 2 * d);
        match self.kind {
            CollisionKind::Floor => m[(d, 0)] = self.coeff,
            CollisionKind::Pair(i) => {
                let r = i - 1;
                let g = self.gamma;
                for (block, transpose) in [(0, false), (d, true)] {
                    m[(block + r, block + r)] = -1.0;
                    if r > 0 {
                        let (a, b) = if transpose { (r - 1, r) } else { (r, r - 1) };
                        m[(block + a, block + b)] = 1.0 - g;
                    }
                    if r + 1 < d {
                        let (a, b) = if transpose { (r + 1, r) } else { (r, r + 1) };
                        m[(block + a, block + b)] = 1.0 + g;
                    }
                }
                m[(r, d + r)] = -self.coeff;
            }
        }
        m
    }
}

impl TangentMap for CollisionJacobian {
    fn apply_parts(&self, dxi: &mut [f64], deta: &mut [f64]) {
        match self.kind {
            CollisionKind::Floor => deta[0] += self.coeff * dxi[0],
            CollisionKind::Pair(i) => {
                let r = i - 1;
                let d = self.dim;
                let g = self.gamma;
                let mut row = -dxi[r] - self.coeff * deta[r];
                if r > 0 {
                    row += (1.0 - g) * dxi[r - 1];
                }
                if r + 1 < d {
                    row += (1.0 + g) * dxi[r + 1];
                }
                dxi[r] = row;
                let e = deta[r];
                deta[r] = -e;
                if r > 0 {
                    deta[r - 1] += (1.0 - g) * e;
                }
                if r + 1 < d {
                    deta[r + 1] += (1.0 + g) * e;
                }
            }
        }
    }
}

/// The identity, for degenerate cocycles in tests and probes.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl TangentMap for IdentityMap {
    fn apply_parts(&self, _dxi: &mut [f64], _deta: &mut [f64]) {}
}

impl TangentMap for DMatrix<f64> {
    fn apply_parts(&self, dxi: &mut [f64], deta: &mut [f64]) {
        let d = dxi.len();
        let x = nalgebra::DVector::from_iterator(2 * d, dxi.iter().chain(deta.iter()).copied());
        let y = self * x;
        dxi.copy_from_slice(&y.as_slice()[..d]);
        deta.copy_from_slice(&y.as_slice()[d..]);
    }
}

/// Derivative of the collision recorded in `ev`.
pub fn collision_jacobian(cfg: &MassConfig, ev: &CollisionEvent) -> Result<CollisionJacobian> {
    if ev.is_singular() {
        return Err(Error::SingularEventInRange(ev.n));
    }
    match ev.kind {
        CollisionKind::Floor => CollisionJacobian::floor(cfg, ev.v_pre[0]),
        CollisionKind::Pair(i) => {
            let gap = ev.v_pre[i - 1] - ev.v_pre[i];
            if gap < -1e-12 * (1.0 + cfg.v_max()) {
                return Err(Error::NotOnSection {
                    kind: ev.kind.to_string(),
                    reason: format!("pre-collision gap {gap} is negative"),
                });
            }
            Ok(CollisionJacobian::pair(cfg, i, gap.max(0.0)))
        }
    }
}

/// Canonical `J = [[0, I], [-I, 0]]` on `R^{2d}`.
pub fn symplectic_j(d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for k in 0..d {
        j[(k, d + k)] = 1.0;
        j[(d + k, k)] = -1.0;
    }
    j
}

/// `max |M^T J M - J|`.
pub fn symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows() / 2;
    let j = symplectic_j(d);
    (m.transpose() * &j * m - j).abs().max()
}

/// Inverse of a symplectic matrix, `-J M^T J`.
pub fn symplectic_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let j = symplectic_j(m.nrows() / 2);
    -(&j * m.transpose() * &j)
}
