use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::jacobian::TangentMap;
use super::orbit::JacobianStream;
use crate::error::{Error, Result};
use crate::sim::{collision::collide_velocities, rng_from_seed, BallState, CollisionKind, MassConfig, Simulator};

/// Growth rates of the reduced cocycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// Exponents per collision, sorted descending (`2N - 2` values).
    pub per_event: Vec<f64>,
    /// Exponents per unit time; empty when no time elapsed.
    pub per_time: Vec<f64>,
    pub events: usize,
    pub time: f64,
    pub reorthonormalize_every: usize,
}

impl LyapunovSpectrum {
    /// `max_i |lambda_i + lambda_{2N-1-i}|` over the per-event exponents.
    pub fn pairing_defect(&self) -> f64 {
        let l = &self.per_event;
        (0..l.len() / 2).map(|i| (l[i] + l[l.len() - 1 - i]).abs()).fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.per_event[0]
    }
}

struct Benettin {
    basis: DMatrix<f64>,
    sums: Vec<f64>,
    every: usize,
    since: usize,
    steps: usize,
}

impl Benettin {
    fn new(dim: usize, every: usize) -> Self {
        Benettin {
            basis: DMatrix::identity(2 * dim, 2 * dim),
            sums: vec![0.0; 2 * dim],
            every: every.max(1),
            since: 0,
            steps: 0,
        }
    }

    fn push<M: TangentMap + ?Sized>(&mut self, m: &M) {
        let rows = self.basis.nrows();
        let d = rows / 2;
        for col in self.basis.as_mut_slice().chunks_mut(rows) {
            let (dxi, deta) = col.split_at_mut(d);
            m.apply_parts(dxi, deta);
        }
        self.steps += 1;
        self.since += 1;
        if self.since >= self.every {
            self.orthonormalize();
        }
    }

    fn orthonormalize(&mut self) {
        self.since = 0;
        let qr = self.basis.clone().qr();
        let r = qr.r();
        for (k, s) in self.sums.iter_mut().enumerate() {
            *s += r[(k, k)].abs().ln();
        }
        let mut q = qr.q();
        // keep the orientation of the previous frame
        for k in 0..q.ncols() {
            if r[(k, k)] < 0.0 {
                q.column_mut(k).neg_mut();
            }
        }
        self.basis = q;
    }

    fn finish(mut self, time: f64) -> LyapunovSpectrum {
        if self.since > 0 {
            self.orthonormalize();
        }
        let n = self.steps.max(1) as f64;
        let mut per_event: Vec<f64> = self.sums.iter().map(|s| s / n).collect();
        per_event.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let per_time = if time > 0.0 {
            per_event.iter().map(|l| l * n / time).collect()
        } else {
            Vec::new()
        };
        LyapunovSpectrum {
            per_event,
            per_time,
            events: self.steps,
            time,
            reorthonormalize_every: self.every,
        }
    }
}

/// Spectrum of an explicit sequence of factors acting on `R^{2 dim}`.
pub fn lyapunov_of_factors<M: TangentMap, I: IntoIterator<Item = M>>(dim: usize, factors: I, every: usize) -> LyapunovSpectrum {
    let mut b = Benettin::new(dim, every);
    for m in factors {
        b.push(&m);
    }
    b.finish(0.0)
}

/// Benettin estimate over `steps` collisions of the orbit of `state`, with
/// QR re-orthonormalization every `every` collisions.
pub fn lyapunov_spectrum(cfg: &MassConfig, state: &BallState, steps: usize, every: usize) -> Result<LyapunovSpectrum> {
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    let mut stream = JacobianStream::new(cfg, state.clone())?;
    let mut b = Benettin::new(cfg.n() - 1, every);
    let mut t_end = state.t;
    for _ in 0..steps {
        let (ev, jac) = stream.next_event()?;
        b.push(&jac);
        t_end = ev.t;
    }
    Ok(b.finish(t_end - state.t))
}

/// Time until `kind` happens from `(q, v)` under free flight.
fn time_to_surface(q: &[f64], v: &[f64], kind: CollisionKind) -> f64 {
    match kind {
        CollisionKind::Floor => v[0] + (v[0] * v[0] + 2.0 * q[0]).max(0.0).sqrt(),
        CollisionKind::Pair(i) => (q[i] - q[i - 1]) / (v[i - 1] - v[i]),
    }
}

/// The section map continued smoothly to a neighbourhood: fly to the
/// surface of `kind` and apply that collision.
fn section_map(cfg: &MassConfig, x: &[f64], kind: CollisionKind) -> Vec<f64> {
    let n = x.len() / 2;
    let (q, v) = x.split_at(n);
    let dt = time_to_surface(q, v, kind);
    let mut out = Vec::with_capacity(2 * n);
    out.extend(q.iter().zip(v).map(|(q, v)| q + v * dt - 0.5 * dt * dt));
    let mut vel: Vec<f64> = v.iter().map(|v| v - dt).collect();
    collide_velocities(cfg, &mut vel, kind);
    out.extend(vel);
    out
}

/// Largest exponent per collision from central finite differences of the
/// section map in `(q, v)` coordinates, restricted to the energy surface.
///
/// Independent of the reduced cocycle: it uses only the positions and
/// velocities along the orbit and the collision law.
pub fn lyapunov_max_fd(cfg: &MassConfig, state: &BallState, steps: usize, h: f64, seed: u64) -> Result<f64> {
    let n = cfg.n();
    let mut sim = Simulator::new(cfg, state.clone())?;
    let mut x: Vec<f64> = state.q.iter().chain(&state.v).copied().collect();
    let mut rng = rng_from_seed(seed);
    let mut u = DVector::from_fn(2 * n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut sum = 0.0;
    let mut done = 0;
    while done < steps {
        let events = sim.step_regular()?;
        for ev in events {
            if done == steps {
                break;
            }
            // project onto the tangent space of the energy surface at x
            let grad = DVector::from_fn(2 * n, |k, _| if k < n { cfg.mass(k) } else { cfg.mass(k - n) * x[k] });
            u -= &grad * (grad.dot(&u) / grad.norm_squared());
            u.normalize_mut();
            let plus: Vec<f64> = x.iter().zip(u.iter()).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x.iter().zip(u.iter()).map(|(a, b)| a - h * b).collect();
            let gp = section_map(cfg, &plus, ev.kind);
            let gm = section_map(cfg, &minus, ev.kind);
            let image = DVector::from_fn(2 * n, |k, _| (gp[k] - gm[k]) / (2.0 * h));
            let norm = image.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidArgument(format!("finite-difference derivative degenerate at event {}", ev.n)));
            }
            sum += norm.ln();
            u = image / norm;
            x = ev.q_at.iter().chain(&ev.v_post).copied().collect();
            done += 1;
        }
    }
    Ok(sum / steps as f64)
}
