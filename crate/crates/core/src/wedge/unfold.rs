use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{special_mass_check, Face, WedgeModel, WedgeSim};
use crate::error::{Error, Result};
use crate::sim::MassConfig;

/// Special-mass tolerance used by the unfolding.
const SPECIAL_TOL: f64 = 1e-12;

/// Copies of the wedge around the edge `e_1`, obtained by reflecting
/// alternately in the two faces that contain it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeFan {
    /// `g_k`; copy `k` is `g_k W`, and `g_{k+1} = g_k R_{F_k}`.
    pub maps: Vec<Matrix3<f64>>,
    /// Reflection words, `""` for copy 0, faces as `a` = `W(e_1,e_3)`, `b` = `W(e_1,e_2)`.
    pub words: Vec<String>,
    pub dihedral: f64,
    /// `copies * dihedral`.
    pub total_angle: f64,
    /// The last copy coincides with copy 0 (the fan tiles the full turn).
    pub closes: bool,
    /// Smallest number of copies whose angles add up to a full turn.
    pub copies_to_cover: usize,
}

impl WedgeFan {
    pub fn copies(&self) -> usize {
        self.maps.len()
    }

    /// Rows `copy, word, r11, .., r33`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("copy,word,r11,r12,r13,r21,r22,r23,r31,r32,r33\n");
        for (k, (g, w)) in self.maps.iter().zip(&self.words).enumerate() {
            s += &format!("{k},{w}");
            for r in 0..3 {
                for c in 0..3 {
                    s += &format!(",{:.17e}", g[(r, c)]);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Generates copies until `max_copies`, or until the fan closes up on itself.
pub fn unfold(model: &WedgeModel, max_copies: usize) -> Result<WedgeFan> {
    let cfg = MassConfig::new(&model.masses, 1.0)?;
    if !special_mass_check(&cfg, SPECIAL_TOL)? {
        let m = model.masses;
        return Err(Error::NotSpecialMasses(super::special_residual(m[0], m[1], m[2])));
    }
    let faces = [(Face::E13, 'a'), (Face::E12, 'b')];
    let mut maps = vec![Matrix3::identity()];
    let mut words = vec![String::new()];
    let mut closes = false;
    while maps.len() < max_copies.max(1) {
        let k = maps.len() - 1;
        let (face, letter) = faces[k % 2];
        let g: Matrix3<f64> = maps[k] * model.reflection(face);
        if (g - Matrix3::identity()).amax() < 1e-12 {
            closes = true;
            break;
        }
        let mut w = words[k].clone();
        w.push(letter);
        maps.push(g);
        words.push(w);
    }
    let copies = maps.len();
    Ok(WedgeFan {
        maps,
        words,
        dihedral: model.dihedral_e1,
        total_angle: copies as f64 * model.dihedral_e1,
        closes,
        copies_to_cover: (2.0 * PI / model.dihedral_e1 - 1e-12).ceil() as usize,
    })
}

/// Copy index containing `p` and its image in the original wedge.
pub fn fold(model: &WedgeModel, fan: &WedgeFan, p: &Vector3<f64>) -> Option<(usize, Vector3<f64>)> {
    let tol = 1e-12 * (1.0 + p.norm());
    fan.maps.iter().enumerate().find_map(|(k, g)| {
        let back = g.transpose() * p;
        (model.coefficients(&back).min() >= -tol).then_some((k, back))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRow {
    pub delta: f64,
    /// Distance between the unfolded images of the two branches after passage.
    pub unfolded: f64,
    /// Distance between the two branches in the wedge itself.
    pub folded: f64,
    /// Largest distance between an unfolded branch and the ballistic line.
    pub straightness: f64,
    pub reflections: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub rows: Vec<ContinuationRow>,
    /// Least-squares slope of `ln unfolded` against `ln delta`.
    pub slope: f64,
    pub folded_slope: f64,
    pub dihedral: f64,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Orbits aimed at the point `height * e_1` of the triple-collision edge,
/// shifted sideways by `+-delta` so that they pass it on either side.
///
/// Both branches are run in the wedge with reflections; each reflection in a
/// face containing `e_1` is accumulated into the unfolding map, and the
/// unfolded positions are compared a fixed time after the passage.
pub fn continuation_test(model: &WedgeModel, height: f64, deltas: &[f64]) -> Result<ContinuationReport> {
    let cfg = MassConfig::new(&model.masses, 1.0)?;
    if !special_mass_check(&cfg, SPECIAL_TOL)? {
        let m = model.masses;
        return Err(Error::NotSpecialMasses(super::special_residual(m[0], m[1], m[2])));
    }
    let e1 = model.e(1);
    let perp = |v: Vector3<f64>| (v - e1 * e1.dot(&v)).normalize();
    // inward direction in the cross-section, bisecting the faces through e_1
    let inward = (perp(model.e(2)) + perp(model.e(3))).normalize();
    let side = e1.cross(&inward).normalize();
    let g = model.gravity.norm();
    let (dist, speed) = (0.25 * height, 1.0);
    let t_star = dist / speed;
    let x0 = e1 * height + inward * dist;
    let u0 = -inward * speed + e1 * (0.5 * g * t_star);
    let t_end = 2.0 * t_star;
    let ballistic = |x: Vector3<f64>, s: f64| x + u0 * s + model.gravity * (0.5 * s * s);

    let run = |x: Vector3<f64>| -> Result<(Vector3<f64>, Vector3<f64>, usize, f64)> {
        let mut sim = WedgeSim::new(model, 0.0, x, u0)?;
        let mut map = Matrix3::identity();
        let mut n = 0;
        let mut worst: f64 = 0.0;
        loop {
            let before = sim.clone();
            let hits = sim.step()?;
            if hits[0].t > t_end {
                let p = before.position_at(t_end - before.t);
                worst = worst.max((map * p - ballistic(x, t_end)).norm());
                return Ok((p, map * p, n, worst));
            }
            for h in &hits {
                match h.face {
                    Face::E12 | Face::E13 => map *= model.reflection(h.face),
                    Face::E23 => return Err(Error::InvalidArgument("floor reached during the passage".into())),
                }
                n += 1;
            }
            worst = worst.max((map * sim.x - ballistic(x, sim.t)).norm());
        }
    };

    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (fp, up, np, sp) = run(x0 + side * delta)?;
        let (fm, um, nm, sm) = run(x0 - side * delta)?;
        rows.push(ContinuationRow {
            delta,
            unfolded: (up - um).norm(),
            folded: (fp - fm).norm(),
            straightness: sp.max(sm),
            reflections: (np, nm),
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.delta.ln()).collect();
    let lu: Vec<f64> = rows.iter().map(|r| r.unfolded.ln()).collect();
    let lf: Vec<f64> = rows.iter().map(|r| r.folded.ln()).collect();
    Ok(ContinuationReport {
        slope: slope(&lx, &lu),
        folded_slope: slope(&lx, &lf),
        rows,
        dihedral: model.dihedral_e1,
    })
}
