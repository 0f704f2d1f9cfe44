use serde::{Deserialize, Serialize};

use super::cone::{ht_norm_parts, sample_cone_vector, ConePart, TangentVector};
use super::jacobian::TangentMap;
use super::orbit::JacobianStream;
use crate::error::{Error, Result};
use crate::sim::{rng_from_seed, sample_state, MassConfig};

/// Where the smallest image norm was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionWitness {
    pub orbit_seed: u64,
    pub n: usize,
    /// The initial unit-HT-norm vector.
    pub v: TangentVector,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoncontractionReport {
    pub zeta_est: f64,
    pub witness: ContractionWitness,
    /// Minimum of `|d T^n v|_HT` over orbits and vectors, for `n = 0..=n_max`.
    pub min_by_n: Vec<f64>,
    /// Prefix minima of `min_by_n`.
    pub running_min: Vec<f64>,
    pub orbits: usize,
    /// Orbits stopped early by a singular collision, with the event count reached.
    pub truncated: Vec<(u64, usize)>,
    pub vectors_per_orbit: usize,
    pub n_max: usize,
    pub seed: u64,
}

impl NoncontractionReport {
    /// `(min over n < split, min over n >= split)` of `min_by_n`.
    pub fn split_minima(&self, split: usize) -> (f64, f64) {
        let lo = self.min_by_n[..split.min(self.min_by_n.len())].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.min_by_n[split.min(self.min_by_n.len())..].iter().copied().fold(f64::INFINITY, f64::min);
        (lo, hi)
    }
}

/// Per-orbit vector seed, decorrelated from the orbit seed.
pub(crate) fn vector_seed(seed: u64, orbit_seed: u64) -> u64 {
    seed ^ orbit_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

/// Unit vectors of the closed cone in the HT norm, alternating interior and
/// boundary (`Q = 0`) samples.
pub fn sample_ht_unit_vectors(cfg: &MassConfig, count: usize, seed: u64) -> Vec<TangentVector> {
    let mut rng = rng_from_seed(seed);
    let dim = cfg.n() - 1;
    (0..count)
        .map(|k| {
            let part = if k % 2 == 0 { ConePart::Interior } else { ConePart::Boundary };
            let mut u = sample_cone_vector(&mut rng, dim, part);
            let norm = ht_norm_parts(cfg, &u.dxi, &u.deta);
            u.scale(1.0 / norm);
            u
        })
        .collect()
}

/// Rescale vectors whose entries exceed this (their log-scale is tracked).
const RESCALE_AT: f64 = 1e150;

struct Tracked {
    u: TangentVector,
    log_scale: f64,
}

/// Smallest HT norm of `d T^n v` over sampled orbits, `n <= n_max` and
/// unit-HT-norm closed-cone vectors `v`.
pub fn noncontraction_estimate(
    cfg: &MassConfig,
    orbit_seeds: &[u64],
    n_max: usize,
    vectors: usize,
    seed: u64,
) -> Result<NoncontractionReport> {
    if orbit_seeds.is_empty() || vectors == 0 {
        return Err(Error::InvalidArgument("need at least one orbit and one vector".into()));
    }
    let mut min_by_n = vec![f64::INFINITY; n_max + 1];
    let mut best: Option<ContractionWitness> = None;
    let mut truncated = Vec::new();
    for &os in orbit_seeds {
        let start = sample_state(cfg, os)?;
        let initial = sample_ht_unit_vectors(cfg, vectors, vector_seed(seed, os));
        let mut tracked: Vec<Tracked> = initial
            .iter()
            .map(|u| Tracked {
                u: u.clone(),
                log_scale: 0.0,
            })
            .collect();
        let mut record = |n: usize, k: usize, value: f64, min_by_n: &mut Vec<f64>| {
            if value < min_by_n[n] {
                min_by_n[n] = value;
            }
            if best.as_ref().map_or(true, |b| value < b.value) {
                best = Some(ContractionWitness {
                    orbit_seed: os,
                    n,
                    v: initial[k].clone(),
                    value,
                });
            }
        };
        for (k, t) in tracked.iter().enumerate() {
            record(0, k, ht_norm_parts(cfg, &t.u.dxi, &t.u.deta), &mut min_by_n);
        }
        let mut stream = JacobianStream::new(cfg, start)?;
        for n in 1..=n_max {
            let jac = match stream.next_event() {
                Ok((_, j)) => j,
                Err(Error::SingularOrbit(_)) => {
                    truncated.push((os, n - 1));
                    break;
                }
                Err(e) => return Err(e),
            };
            for (k, t) in tracked.iter_mut().enumerate() {
                jac.apply(&mut t.u);
                let norm = ht_norm_parts(cfg, &t.u.dxi, &t.u.deta);
                if norm > RESCALE_AT {
                    t.u.scale(1.0 / norm);
                    t.log_scale += norm.ln();
                }
                let value = if t.log_scale > 0.0 { (norm.ln().min(0.0) + t.log_scale).exp() } else { norm };
                record(n, k, value, &mut min_by_n);
            }
        }
    }
    let mut running_min = min_by_n.clone();
    for k in 1..running_min.len() {
        running_min[k] = running_min[k].min(running_min[k - 1]);
    }
    let witness = best.expect("at least one vector was evaluated");
    Ok(NoncontractionReport {
        zeta_est: witness.value,
        witness,
        min_by_n,
        running_min,
        orbits: orbit_seeds.len(),
        truncated,
        vectors_per_orbit: vectors,
        n_max,
        seed,
    })
}
