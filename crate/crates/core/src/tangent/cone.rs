use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::jacobian::TangentMap;
use crate::sim::MassConfig;

/// Reduced tangent vector `(dxi, deta)`, each of length `N - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub dxi: Vec<f64>,
    pub deta: Vec<f64>,
}

impl TangentVector {
    pub fn new(dxi: Vec<f64>, deta: Vec<f64>) -> Self {
        debug_assert_eq!(dxi.len(), deta.len());
        TangentVector { dxi, deta }
    }

    pub fn zeros(dim: usize) -> Self {
        TangentVector::new(vec![0.0; dim], vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dxi.len()
    }

    /// Stacked column `(dxi; deta)` of length `2N - 2`.
    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.dim(), self.dxi.iter().chain(&self.deta).copied())
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let d = x.len() / 2;
        TangentVector::new(x[..d].to_vec(), x[d..].to_vec())
    }

    pub fn norm2(&self) -> f64 {
        self.dxi
            .iter()
            .chain(&self.deta)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.dxi.iter_mut().chain(self.deta.iter_mut()).for_each(|x| *x *= s);
    }

    pub fn is_zero(&self) -> bool {
        self.dxi.iter().chain(&self.deta).all(|&x| x == 0.0)
    }
}

/// `Q(dxi, deta) = <dxi, deta>`.
pub fn q_form(u: &TangentVector) -> f64 {
    q_form_parts(&u.dxi, &u.deta)
}

pub(crate) fn q_form_parts(dxi: &[f64], deta: &[f64]) -> f64 {
    dxi.iter().zip(deta).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeClass {
    CInterior,
    Boundary,
    CPrimeInterior,
    Zero,
}

/// Sign of `Q`, with `|Q| <= tol * |u|^2` counted as the boundary.
pub fn cone_membership(u: &TangentVector, tol: f64) -> ConeClass {
    if u.is_zero() {
        return ConeClass::Zero;
    }
    let q = q_form(u);
    let band = tol * u.norm2().powi(2);
    if q > band {
        ConeClass::CInterior
    } else if q < -band {
        ConeClass::CPrimeInterior
    } else {
        ConeClass::Boundary
    }
}

/// `||deta||_CW^2 = sum_{i=1}^{N-2} (deta_{i+1} - deta_i)^2 / m_i`.
///
/// Only a seminorm: constant vectors have length zero.
pub fn cw_norm(cfg: &MassConfig, deta: &[f64]) -> f64 {
    deta.windows(2)
        .zip(cfg.masses())
        .map(|(w, m)| (w[1] - w[0]).powi(2) / m)
        .sum::<f64>()
        .sqrt()
}

/// `||u||_2 + ||deta||_CW`.
pub fn ht_norm(cfg: &MassConfig, u: &TangentVector) -> f64 {
    u.norm2() + cw_norm(cfg, &u.deta)
}

pub(crate) fn ht_norm_parts(cfg: &MassConfig, dxi: &[f64], deta: &[f64]) -> f64 {
    let e: f64 = dxi.iter().chain(deta).map(|x| x * x).sum::<f64>().sqrt();
    e + cw_norm(cfg, deta)
}

/// Which part of the closed cone to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConePart {
    Interior,
    /// `Q = 0` exactly.
    Boundary,
}

/// Random vector of the closed cone `Q >= 0`, Euclidean unit length.
///
/// One half is chosen on the unit sphere, the other is `lambda * first + w`
/// with `w` orthogonal to the first half, so that `Q = lambda`. The roles of
/// `dxi` and `deta` are swapped with probability 1/2 so that both boundary
/// sheets (`dxi = 0` and `deta = 0` directions) are reached.
pub fn sample_cone_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, part: ConePart) -> TangentVector {
    let mut lead: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let ln = lead.iter().map(|x| x * x).sum::<f64>().sqrt();
    lead.iter_mut().for_each(|x| *x /= ln);

    let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let radius: f64 = Exp1.sample(rng);
    if dim == 1 {
        w[0] = 0.0;
    } else {
        // two passes keep the residual overlap at rounding level
        for _ in 0..2 {
            let proj: f64 = w.iter().zip(&lead).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(&lead).for_each(|(a, b)| *a -= proj * b);
        }
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter_mut().for_each(|x| *x *= radius / wn);
    }
    let lambda: f64 = match part {
        ConePart::Interior => Exp1.sample(rng),
        ConePart::Boundary => 0.0,
    };
    let other: Vec<f64> = lead.iter().zip(&w).map(|(l, w)| lambda * l + w).collect();
    let mut u = if rng.gen_bool(0.5) {
        TangentVector::new(lead, other)
    } else {
        TangentVector::new(other, lead)
    };
    let n = u.norm2();
    u.scale(1.0 / n);
    u
}

/// `||D_i^T deta||_CW / ||deta||_CW` statistics per pair over random `deta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwInvarianceRow {
    pub pair: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub max_deviation: f64,
    pub samples: usize,
}

/// Measures how far the CW seminorm is from being preserved by the pair
/// derivative blocks `D_i^T`.
pub fn cw_invariance_report<R: Rng + ?Sized>(
    cfg: &MassConfig,
    rng: &mut R,
    samples: usize,
) -> Vec<CwInvarianceRow> {
    let dim = cfg.n() - 1;
    (1..cfg.n())
        .map(|pair| {
            let jac = super::jacobian::CollisionJacobian::pair(cfg, pair, 0.0);
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            let mut taken = 0;
            for _ in 0..samples {
                let deta: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let before = cw_norm(cfg, &deta);
                if before < 1e-12 {
                    continue;
                }
                let mut u = TangentVector::new(vec![0.0; dim], deta);
                jac.apply(&mut u);
                let r = cw_norm(cfg, &u.deta) / before;
                lo = lo.min(r);
                hi = hi.max(r);
                taken += 1;
            }
            if taken == 0 {
                lo = 1.0;
                hi = 1.0;
            }
            CwInvarianceRow {
                pair,
                min_ratio: lo,
                max_ratio: hi,
                max_deviation: (hi - 1.0).abs().max((1.0 - lo).abs()),
                samples: taken,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng_from_seed;

    fn tv(a: &[f64], b: &[f64]) -> TangentVector {
        TangentVector::new(a.to_vec(), b.to_vec())
    }

    #[test]
    fn q_form_examples() {
        assert_eq!(q_form(&tv(&[1.0, 0.0], &[1.0, 0.0])), 1.0);
        assert_eq!(q_form(&tv(&[1.0, 2.0], &[2.0, -1.0])), 0.0);
        assert_eq!(q_form(&tv(&[1.0, 1.0], &[-1.0, 0.0])), -1.0);
    }

    #[test]
    fn membership() {
        assert_eq!(cone_membership(&tv(&[1.0, 0.0], &[1.0, 0.0]), 1e-12), ConeClass::CInterior);
        assert_eq!(cone_membership(&tv(&[1.0, 2.0], &[2.0, -1.0]), 1e-12), ConeClass::Boundary);
        assert_eq!(cone_membership(&tv(&[1.0, 1.0], &[-1.0, 0.0]), 1e-12), ConeClass::CPrimeInterior);
        assert_eq!(cone_membership(&TangentVector::zeros(2), 1e-12), ConeClass::Zero);
    }

    #[test]
    fn cw_examples() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 1.0).unwrap();
        assert_eq!(cw_norm(&cfg, &[1.0, 1.0]), 0.0);
        let cfg1 = MassConfig::new(&[1.0, 0.5, 0.25], 1.0).unwrap();
        assert_eq!(cw_norm(&cfg1, &[0.0, 1.0]), 1.0);

        let cfg2 = MassConfig::new(&[2.0, 1.0], 1.0).unwrap();
        let u = tv(&[3.0], &[4.0]);
        assert_eq!(cw_norm(&cfg2, &u.deta), 0.0);
        assert_eq!(ht_norm(&cfg2, &u), 5.0);
    }

    #[test]
    fn sampled_vectors_are_in_the_closed_cone() {
        let mut rng = rng_from_seed(5);
        for dim in 1..5 {
            for _ in 0..2000 {
                let u = sample_cone_vector(&mut rng, dim, ConePart::Interior);
                assert!((u.norm2() - 1.0).abs() < 1e-12);
                assert!(q_form(&u) > 0.0);
                let b = sample_cone_vector(&mut rng, dim, ConePart::Boundary);
                assert!(q_form(&b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn euclidean_norm_dominates_q() {
        // ||u||_2 >= sqrt(2) sqrt(Q(u)) on the cone
        let mut rng = rng_from_seed(9);
        for _ in 0..10_000 {
            let u = sample_cone_vector(&mut rng, 3, ConePart::Interior);
            assert!(u.norm2() + 1e-15 >= 2f64.sqrt() * q_form(&u).sqrt());
        }
    }

    #[test]
    fn cw_invariance_is_measured_not_assumed() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 1.0).unwrap();
        let mut rng = rng_from_seed(1);
        let rows = cw_invariance_report(&cfg, &mut rng, 500);
        assert_eq!(rows.len(), 2);
        // with N = 3 the reduced D_i^T do not preserve the seminorm
        assert!(rows.iter().any(|r| r.max_deviation > 1e-3));
        assert!(rows.iter().all(|r| r.samples > 0));
    }
}
