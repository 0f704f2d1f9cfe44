//! The three-ball system as a particle in a wedge.
//!
//! With `x_i = sqrt(m_i) q_i` and `u_i = sqrt(m_i) v_i` the kinetic energy is
//! `|u|^2 / 2` and the ordered configurations form the wedge spanned by
//! `e_1, e_2, e_3`, where `sqrt(M_i) e_i = (0, .., 0, sqrt(m_i), .., sqrt(m_3))`
//! and `M_i = m_i + .. + m_3`. Ball collisions are specular reflections in the
//! faces.

mod billiard;
mod equivalence;
mod unfold;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{BallState, CollisionKind, MassConfig};

pub use billiard::{simulate_wedge, write_wedge_jsonl, WedgeEvent, WedgeLog, WedgeSim};
pub use equivalence::{wedge_equivalence, EquivalenceReport};
pub use unfold::{continuation_test, fold, unfold, ContinuationReport, ContinuationRow, WedgeFan};

/// Faces `W(e_i, e_j)` of the wedge, named by the generators they contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    /// `W(e_1, e_2)`: balls 2 and 3 together.
    #[serde(rename = "face12")]
    E12,
    /// `W(e_1, e_3)`: balls 1 and 2 together.
    #[serde(rename = "face13")]
    E13,
    /// `W(e_2, e_3)`: ball 1 on the floor.
    #[serde(rename = "face23")]
    E23,
}

impl Face {
    pub const ALL: [Face; 3] = [Face::E12, Face::E13, Face::E23];

    pub fn label(self) -> &'static str {
        match self {
            Face::E12 => "face12",
            Face::E13 => "face13",
            Face::E23 => "face23",
        }
    }

    pub fn collision(self) -> CollisionKind {
        match self {
            Face::E12 => CollisionKind::Pair(2),
            Face::E13 => CollisionKind::Pair(1),
            Face::E23 => CollisionKind::Floor,
        }
    }

    pub fn of_collision(kind: CollisionKind) -> Face {
        match kind {
            CollisionKind::Pair(1) => Face::E13,
            CollisionKind::Pair(_) => Face::E12,
            CollisionKind::Floor => Face::E23,
        }
    }

    fn idx(self) -> usize {
        self as usize
    }

    /// The generator not contained in the face.
    fn opposite(self) -> usize {
        match self {
            Face::E12 => 2,
            Face::E13 => 1,
            Face::E23 => 0,
        }
    }
}

impl std::fmt::Display for Face {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

fn check3(cfg: &MassConfig) -> Result<[f64; 3]> {
    match cfg.masses() {
        &[a, b, c] => Ok([a, b, c]),
        m => Err(Error::WrongDimension(m.len())),
    }
}

/// Wedge coordinates `(x, u)` of a three-ball state.
pub fn to_wedge(cfg: &MassConfig, s: &BallState) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let m = check3(cfg)?;
    if s.q.len() != 3 || s.v.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: s.q.len() });
    }
    let r = Vector3::from_fn(|i, _| m[i].sqrt());
    Ok((
        Vector3::from_fn(|i, _| r[i] * s.q[i]),
        Vector3::from_fn(|i, _| r[i] * s.v[i]),
    ))
}

pub fn from_wedge(cfg: &MassConfig, t: f64, x: &Vector3<f64>, u: &Vector3<f64>) -> Result<BallState> {
    let m = check3(cfg)?;
    let r: Vec<f64> = m.iter().map(|m| m.sqrt()).collect();
    Ok(BallState::new(
        t,
        (0..3).map(|i| x[i] / r[i]).collect(),
        (0..3).map(|i| u[i] / r[i]).collect(),
    ))
}

/// Geometry of the configuration wedge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeModel {
    pub masses: [f64; 3],
    /// Unit generators as columns.
    pub generators: Matrix3<f64>,
    pub gram: Matrix3<f64>,
    /// `(-sqrt(m_1), -sqrt(m_2), -sqrt(m_3))`.
    pub gravity: Vector3<f64>,
    /// Inward unit normals, indexed like [`Face::ALL`].
    pub normals: [Vector3<f64>; 3],
    /// Interior angle between the two faces containing `e_1`.
    pub dihedral_e1: f64,
}

impl WedgeModel {
    pub fn e(&self, i: usize) -> Vector3<f64> {
        self.generators.column(i - 1).into_owned()
    }

    pub fn normal(&self, face: Face) -> Vector3<f64> {
        self.normals[face.idx()]
    }

    /// Coefficients `c` with `x = sum c_i e_i`.
    pub fn coefficients(&self, x: &Vector3<f64>) -> Vector3<f64> {
        // e_i . n_F vanishes except for the generator opposite F
        let mut c = Vector3::zeros();
        for f in Face::ALL {
            let k = f.opposite();
            c[k] = self.normal(f).dot(x) / self.normal(f).dot(&self.e(k + 1));
        }
        c
    }

    /// Mirror image of `u` in the plane of `face`.
    pub fn reflect(&self, face: Face, u: &Vector3<f64>) -> Vector3<f64> {
        let n = self.normal(face);
        u - n * (2.0 * n.dot(u))
    }

    /// Householder matrix of the reflection in `face`.
    pub fn reflection(&self, face: Face) -> Matrix3<f64> {
        let n = self.normal(face);
        Matrix3::identity() - n * n.transpose() * 2.0
    }

    /// `|u|^2 / 2 - <gravity, x>`.
    pub fn energy(&self, x: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
        0.5 * u.norm_squared() - self.gravity.dot(x)
    }

    /// `max |<e_i, e_j> - sqrt(M_j / M_i)|` and `|<e_1, e_3> - <e_1, e_2><e_2, e_3>|`.
    pub fn gram_defects(&self) -> (f64, f64) {
        let tails = tail_sums(&self.masses);
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in i..3 {
                let want = (tails[j] / tails[i]).sqrt();
                d = d.max((self.gram[(i, j)] - want).abs()).max((self.gram[(j, i)] - want).abs());
            }
        }
        let chain = (self.gram[(0, 2)] - self.gram[(0, 1)] * self.gram[(1, 2)]).abs();
        (d, chain)
    }
}

fn tail_sums(m: &[f64; 3]) -> [f64; 3] {
    [m[0] + m[1] + m[2], m[1] + m[2], m[2]]
}

pub fn build_wedge(cfg: &MassConfig) -> Result<WedgeModel> {
    let m = check3(cfg)?;
    let tails = tail_sums(&m);
    let r = m.map(f64::sqrt);
    let generators = Matrix3::from_fn(|row, col| if row >= col { r[row] / tails[col].sqrt() } else { 0.0 });
    let gram = generators.transpose() * generators;
    let unit = |v: Vector3<f64>| v.normalize();
    // balls 2, 3 apart; balls 1, 2 apart; ball 1 above the floor
    let normals = [
        unit(Vector3::new(0.0, -1.0 / r[1], 1.0 / r[2])),
        unit(Vector3::new(-1.0 / r[0], 1.0 / r[1], 0.0)),
        Vector3::new(1.0, 0.0, 0.0),
    ];
    let e1 = generators.column(0).into_owned();
    let perp = |v: Vector3<f64>| {
        let p = v - e1 * e1.dot(&v);
        p.normalize()
    };
    let a = perp(generators.column(1).into_owned());
    let b = perp(generators.column(2).into_owned());
    let dihedral_e1 = a.dot(&b).clamp(-1.0, 1.0).acos();
    Ok(WedgeModel {
        masses: m,
        generators,
        gram,
        gravity: -Vector3::from(r),
        normals,
        dihedral_e1,
    })
}

/// `|4 m_1 m_3 - (m_1 + m_2 + m_3)| <= tol * (m_1 + m_2 + m_3)`.
pub fn special_mass_check(cfg: &MassConfig, tol: f64) -> Result<bool> {
    let [a, b, c] = check3(cfg)?;
    Ok(special_residual(a, b, c).abs() <= tol)
}

/// Relative residual of `4 m_1 m_3 = m_1 + m_2 + m_3`.
pub fn special_residual(m1: f64, m2: f64, m3: f64) -> f64 {
    let total = m1 + m2 + m3;
    (4.0 * m1 * m3 - total) / total
}

/// `m_1 = (m_2 + m_3) / (4 m_3 - 1)`, the heaviest mass completing a special triple.
pub fn solve_special_mass(m2: f64, m3: f64) -> Result<f64> {
    if !(m3 > 0.25) {
        return Err(Error::Infeasible(format!("m3 = {m3} must exceed 1/4")));
    }
    let m1 = (m2 + m3) / (4.0 * m3 - 1.0);
    if !(m1 > m2 && m2 > m3) {
        return Err(Error::Infeasible(format!("ordering m1 > m2 > m3 fails for ({m1}, {m2}, {m3})")));
    }
    Ok(m1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{apply_collision, sample_state, simulate, BranchPolicy, Horizon};

    fn special() -> MassConfig {
        MassConfig::new(&[2.0, 1.0, 3.0 / 7.0], 1.0).unwrap()
    }

    #[test]
    fn coordinates() {
        let cfg = MassConfig::new(&[4.0, 2.0, 1.0], 1.0).unwrap();
        let s = BallState::new(0.0, vec![1.0; 3], vec![0.0; 3]);
        let (x, u) = to_wedge(&cfg, &s).unwrap();
        assert_eq!(x, Vector3::new(2.0, 2f64.sqrt(), 1.0));
        assert_eq!(u, Vector3::zeros());
        let (z, w) = to_wedge(&cfg, &BallState::at_rest(3)).unwrap();
        assert_eq!((z, w), (Vector3::zeros(), Vector3::zeros()));
        let s = sample_state(&cfg, 3).unwrap();
        let (x, u) = to_wedge(&cfg, &s).unwrap();
        let back = from_wedge(&cfg, s.t, &x, &u).unwrap();
        for (a, b) in back.q.iter().chain(&back.v).zip(s.q.iter().chain(&s.v)) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        let ke: f64 = (0..3).map(|i| 0.5 * cfg.mass(i) * s.v[i] * s.v[i]).sum();
        assert!((0.5 * u.norm_squared() - ke).abs() < 1e-14 * ke);
        assert!(matches!(to_wedge(&MassConfig::new(&[2.0, 1.0], 1.0).unwrap(), &BallState::at_rest(2)), Err(Error::WrongDimension(2))));
    }

    #[test]
    fn gram_and_gravity() {
        for m in [[2.0, 1.0, 3.0 / 7.0], [3.0, 2.0, 1.0], [10.0, 0.3, 0.01]] {
            let w = build_wedge(&MassConfig::new(&m, 1.0).unwrap()).unwrap();
            let (d, chain) = w.gram_defects();
            assert!(d < 1e-14 && chain < 1e-14, "{d} {chain}");
            let g = w.gravity.normalize() + w.e(1);
            assert!(g.amax() < 1e-14);
            for i in 1..=3 {
                assert!((w.e(i).norm() - 1.0).abs() < 1e-15);
            }
            // sqrt(M_i) e_i = (0, .., sqrt(m_i), .., sqrt(m_3))
            let tails = tail_sums(&m);
            for i in 0..3 {
                for r in 0..3 {
                    let want = if r >= i { m[r].sqrt() } else { 0.0 };
                    assert!((tails[i].sqrt() * w.generators[(r, i)] - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn dihedral_of_special_masses() {
        let w = build_wedge(&special()).unwrap();
        assert!((w.dihedral_e1.cos() - (0.2f64).sqrt()).abs() < 1e-14);
        let m = w.masses;
        let closed = (m[0] * m[2] / ((m[1] + m[2]) * (m[0] + m[1]))).sqrt();
        for masses in [[3.0, 2.0, 1.0], [5.0, 1.5, 0.7]] {
            let v = build_wedge(&MassConfig::new(&masses, 1.0).unwrap()).unwrap();
            let c = (masses[0] * masses[2] / ((masses[1] + masses[2]) * (masses[0] + masses[1]))).sqrt();
            assert!((v.dihedral_e1.cos() - c).abs() < 1e-14);
        }
        assert!((closed - (0.2f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn special_masses() {
        assert!(special_mass_check(&special(), 0.0).unwrap());
        assert!(!special_mass_check(&MassConfig::new(&[3.0, 2.0, 1.0], 1.0).unwrap(), 1e-9).unwrap());
        assert!((solve_special_mass(1.0, 3.0 / 7.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(solve_special_mass(1.0, 0.2), Err(Error::Infeasible(_))));
        assert!(matches!(solve_special_mass(1.0, 0.9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn reflections_reproduce_collision_laws() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let w = build_wedge(&cfg).unwrap();
        let log = simulate(&cfg, &sample_state(&cfg, 2).unwrap(), Horizon::Events(2000), BranchPolicy::Stop)
            .unwrap()
            .remove(0);
        for ev in &log.events {
            let pre = BallState::new(ev.t, ev.q_at.clone(), ev.v_pre.clone());
            let post = apply_collision(&cfg, &pre, ev.kind).unwrap();
            let (x, u) = to_wedge(&cfg, &pre).unwrap();
            let (_, u_post) = to_wedge(&cfg, &post).unwrap();
            let face = Face::of_collision(ev.kind);
            assert!((w.reflect(face, &u) - u_post).amax() < 1e-12);
            // the collision point lies on the face
            assert!(w.normal(face).dot(&x).abs() < 1e-12 * (1.0 + x.norm()));
            let c = w.coefficients(&x);
            assert!(c[face.opposite()].abs() < 1e-12 * (1.0 + x.norm()));
            assert!(c.iter().all(|&c| c > -1e-12));
        }
    }

    #[test]
    fn face_reflections_fixing_e1_preserve_gravity() {
        let w = build_wedge(&special()).unwrap();
        for f in [Face::E12, Face::E13] {
            let r = w.reflection(f);
            assert!((r * w.gravity - w.gravity).amax() < 1e-15);
            assert!((r * w.e(1) - w.e(1)).amax() < 1e-15);
        }
        let r = w.reflection(Face::E23);
        assert!((r * w.gravity - w.gravity).amax() > 0.1);
    }
}
