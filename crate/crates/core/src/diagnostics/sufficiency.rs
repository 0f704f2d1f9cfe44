use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{BallState, MassConfig};
use crate::sim::{Simulator, Step};
use crate::tangent::{collision_jacobian, sigma_of_cocycle, Cocycle, PreciseCocycle};

/// Which clause of the sufficiency definition is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `sigma(d_x T^n)` with the cone form.
    #[default]
    Forward,
    /// `sigma'(d_x T^n)` of the inverse with the complementary form.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub n: usize,
    pub sigma: f64,
    /// `sigma` after `n - 1` iterates.
    pub sigma_prev: f64,
    pub direction: Direction,
}

fn log_sigma(c: &Cocycle, precise: &PreciseCocycle, direction: Direction) -> Result<f64> {
    match direction {
        Direction::Forward if c.dim() == 1 => Ok(sigma_of_cocycle(c, 0, 1e-13, 0)?.log_value),
        Direction::Forward => precise.log_sigma(1e-10),
        Direction::Backward => precise.log_sigma_prime(1e-10),
    }
}

/// Smallest `n <= n_cap` with `sigma(d_x T^n) > threshold`, checking that
/// none of the first `n` collisions is singular.
///
/// The backward clause is evaluated at `y = T^n x` on `d_y T^{-n} = (d_x T^n)^{-1}`,
/// so the same forward product serves both directions.
pub fn sufficiency_search(
    cfg: &MassConfig,
    state: &BallState,
    threshold: f64,
    n_cap: usize,
    direction: Direction,
) -> Result<Sufficiency> {
    let mut sim = Simulator::new(cfg, state.clone())?;
    let mut jacs = Vec::new();
    while jacs.len() < n_cap {
        match sim.step()? {
            Step::Regular(evs) => {
                for ev in evs {
                    jacs.push(collision_jacobian(cfg, &ev)?);
                }
            }
            Step::Singular(_) => break,
        }
    }
    jacs.truncate(n_cap);
    let mut probe = Cocycle::identity(cfg.n() - 1);
    for j in &jacs {
        probe.push(j);
    }
    let prec = PreciseCocycle::precision_for(probe.log_scale() + probe.normalized().amax().ln());
    let mut c = Cocycle::identity(cfg.n() - 1);
    let mut p = PreciseCocycle::identity(cfg.n() - 1, prec);
    let ln_thr = threshold.ln();
    let mut prev = 1.0;
    for (k, j) in jacs.iter().enumerate() {
        c.push(j);
        p.push(j);
        let ls = log_sigma(&c, &p, direction)?;
        if ls > ln_thr {
            return Ok(Sufficiency {
                n: k + 1,
                sigma: ls.exp(),
                sigma_prev: prev,
                direction,
            });
        }
        prev = ls.exp();
    }
    if jacs.len() < n_cap {
        return Err(Error::SingularEncountered(jacs.len()));
    }
    Err(Error::Exceeded(n_cap))
}
