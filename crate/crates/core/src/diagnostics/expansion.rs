use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{rng_from_seed, CollisionKind, EventLog};

/// Weight of the floor-return sum in the lowest-pair expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorWeight {
    /// `2 sum_j 2j v_1^+(r_j)`.
    Printed,
    /// `2 sum_j v_1^+(r_j)`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionVariant {
    /// Pair `(i, i+1)` with no floor collision in between.
    General(usize),
    /// Pair `(1, 2)` with at least one floor collision in between.
    Lowest(FloorWeight),
}

impl std::fmt::Display for ExpansionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExpansionVariant::General(i) => write!(f, "general-{i}"),
            ExpansionVariant::Lowest(FloorWeight::Printed) => f.write_str("lowest-printed"),
            ExpansionVariant::Lowest(FloorWeight::Unit) => f.write_str("lowest-unit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResidual {
    pub variant: ExpansionVariant,
    pub t1: usize,
    pub t2: usize,
    /// `v_i^-(t2) - v_{i+1}^-(t2)`.
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Collisions of the lower neighbour `(i-1, i)` (floor hits for the lowest pair).
    pub lower: usize,
    /// Collisions of the upper neighbour `(i+1, i+2)`.
    pub upper: usize,
    /// Full floor returns after the first floor hit (lowest pair only).
    pub returns: usize,
}

/// `RHS - LHS` of the backward expansion of the gap of one pair between two
/// consecutive collisions of that pair (event indices `t1 < t2`).
pub fn expansion_residual(log: &EventLog, variant: ExpansionVariant, t1: usize, t2: usize) -> Result<ExpansionResidual> {
    let cfg = &log.config;
    let pair = match variant {
        ExpansionVariant::General(i) => i,
        ExpansionVariant::Lowest(_) => 1,
    };
    if pair == 0 || pair >= cfg.n() {
        return Err(Error::InvalidArgument(format!("no pair {pair} for {} balls", cfg.n())));
    }
    let kind = CollisionKind::Pair(pair);
    if !(t1 < t2) || t2 >= log.events.len() || log.events[t1].kind != kind || log.events[t2].kind != kind {
        return Err(Error::WrongVariant(format!("events {t1}, {t2} are not two {kind} collisions")));
    }
    let inner = &log.events[t1 + 1..t2];
    if inner.iter().any(|e| e.kind == kind) {
        return Err(Error::WrongVariant(format!("events {t1} and {t2} are not consecutive {kind} collisions")));
    }
    let floors: Vec<_> = inner.iter().filter(|e| e.kind == CollisionKind::Floor).collect();
    let (a, b) = (pair - 1, pair);
    let first = &log.events[t1];
    let last = &log.events[t2];
    let lhs = last.v_pre[a] - last.v_pre[b];
    let mut rhs = first.v_post[a] - first.v_post[b];

    let mut upper = 0;
    if pair + 1 < cfg.n() {
        let coef = 1.0 - cfg.gamma(pair + 1);
        for e in inner.iter().filter(|e| e.kind == CollisionKind::Pair(pair + 1)) {
            rhs += coef * (e.v_pre[pair] - e.v_pre[pair + 1]);
            upper += 1;
        }
    }
    let mut lower = 0;
    let mut returns = 0;
    match variant {
        ExpansionVariant::General(_) => {
            if pair == 1 {
                if !floors.is_empty() {
                    return Err(Error::WrongVariant("floor collisions between (1,2) collisions".into()));
                }
            } else {
                let coef = 1.0 + cfg.gamma(pair - 1);
                for e in inner.iter().filter(|e| e.kind == CollisionKind::Pair(pair - 1)) {
                    rhs += coef * (e.v_pre[pair - 2] - e.v_pre[pair - 1]);
                    lower += 1;
                }
            }
        }
        ExpansionVariant::Lowest(weight) => {
            if floors.is_empty() {
                return Err(Error::WrongVariant("no floor collision between the (1,2) collisions".into()));
            }
            let (v1, q1) = (first.v_post[0], first.q_at[0]);
            rhs += 2.0 * (v1 * v1 + 2.0 * q1).max(0.0).sqrt();
            lower = floors.len();
            returns = floors.len() - 1;
            for (j, e) in floors.iter().skip(1).enumerate() {
                let w = match weight {
                    FloorWeight::Printed => 2.0 * (j + 1) as f64,
                    FloorWeight::Unit => 1.0,
                };
                rhs += 2.0 * w * e.v_post[0];
            }
        }
    }
    Ok(ExpansionResidual {
        variant,
        t1,
        t2,
        lhs,
        rhs,
        residual: rhs - lhs,
        lower,
        upper,
        returns,
    })
}

/// Consecutive collision pairs `(t1, t2)` of pair `i` in the log.
pub fn consecutive_intervals(log: &EventLog, pair: usize) -> Vec<(usize, usize)> {
    let idx: Vec<usize> = log
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == CollisionKind::Pair(pair))
        .map(|(k, _)| k)
        .collect();
    idx.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Residual statistics of one expansion variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub variant: ExpansionVariant,
    pub intervals: usize,
    pub max_abs_residual: f64,
    /// Intervals with at least one full floor return (lowest pair only).
    pub with_returns: usize,
}

fn variants_for(pair: usize) -> Vec<ExpansionVariant> {
    if pair == 1 {
        vec![
            ExpansionVariant::General(1),
            ExpansionVariant::Lowest(FloorWeight::Printed),
            ExpansionVariant::Lowest(FloorWeight::Unit),
        ]
    } else {
        vec![ExpansionVariant::General(pair)]
    }
}

/// Residuals on up to `count` randomly chosen intervals per applicable
/// variant. Lowest-pair intervals with floor collisions are scored under both
/// floor weights.
pub fn sample_residuals(log: &EventLog, count: usize, seed: u64) -> Vec<ExpansionResidual> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    for pair in 1..log.config.n() {
        let mut iv = consecutive_intervals(log, pair);
        iv.shuffle(&mut rng);
        for variant in variants_for(pair) {
            out.extend(
                iv.iter()
                    .filter_map(|&(a, b)| expansion_residual(log, variant, a, b).ok())
                    .take(count),
            );
        }
    }
    out
}

/// Largest residual per variant over [`sample_residuals`].
pub fn expansion_report(log: &EventLog, count: usize, seed: u64) -> Vec<VariantStats> {
    let rows = sample_residuals(log, count, seed);
    let mut out = Vec::new();
    for pair in 1..log.config.n() {
        for variant in variants_for(pair) {
            let mine = rows.iter().filter(|r| r.variant == variant);
            out.push(mine.fold(
                VariantStats {
                    variant,
                    intervals: 0,
                    max_abs_residual: 0.0,
                    with_returns: 0,
                },
                |mut st, r| {
                    st.intervals += 1;
                    st.max_abs_residual = st.max_abs_residual.max(r.residual.abs());
                    st.with_returns += (r.returns > 0) as usize;
                    st
                },
            ));
        }
    }
    out
}

/// Outcome of testing both floor weights on lowest-pair intervals that
/// contain at least one full floor return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorWeightAdjudication {
    pub intervals: usize,
    pub printed_max_residual: f64,
    pub unit_max_residual: f64,
    /// Variants whose residual stays below the tolerance on every interval.
    pub zeroing: Vec<FloorWeight>,
    pub tol: f64,
}

pub fn adjudicate_floor_weight(logs: &[EventLog], tol: f64) -> FloorWeightAdjudication {
    let mut printed: f64 = 0.0;
    let mut unit: f64 = 0.0;
    let mut intervals = 0;
    for log in logs {
        for (a, b) in consecutive_intervals(log, 1) {
            let (Ok(p), Ok(u)) = (
                expansion_residual(log, ExpansionVariant::Lowest(FloorWeight::Printed), a, b),
                expansion_residual(log, ExpansionVariant::Lowest(FloorWeight::Unit), a, b),
            ) else {
                continue;
            };
            if p.returns == 0 {
                continue;
            }
            intervals += 1;
            printed = printed.max(p.residual.abs());
            unit = unit.max(u.residual.abs());
        }
    }
    let mut zeroing = Vec::new();
    if intervals > 0 {
        if printed < tol {
            zeroing.push(FloorWeight::Printed);
        }
        if unit < tol {
            zeroing.push(FloorWeight::Unit);
        }
    }
    FloorWeightAdjudication {
        intervals,
        printed_max_residual: printed,
        unit_max_residual: unit,
        zeroing,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{sample_state, simulate, BranchPolicy, Horizon, MassConfig};

    fn log(masses: &[f64], c: f64, seed: u64, n: u64) -> EventLog {
        let cfg = MassConfig::new(masses, c).unwrap();
        simulate(&cfg, &sample_state(&cfg, seed).unwrap(), Horizon::Events(n), BranchPolicy::Stop)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn free_flight_preserves_the_gap() {
        // two (2,3) collisions joined by pure free flight (not realizable on
        // an orbit, where the pair separates, but the base case of the sum)
        let mut l = log(&[3.0, 2.0, 1.0], 6.0, 1, 200);
        let k = l.events.iter().position(|e| e.kind == CollisionKind::Pair(2)).unwrap();
        let first = l.events[k].clone();
        let mut second = first.clone();
        let dt = 0.37;
        second.n += 1;
        second.t += dt;
        second.v_pre = first.v_post.iter().map(|v| v - dt).collect();
        l.events.truncate(k + 1);
        l.events.push(second);
        let r = expansion_residual(&l, ExpansionVariant::General(2), k, k + 1).unwrap();
        assert!(r.residual.abs() <= 4.0 * f64::EPSILON * first.v_post[1].abs().max(1.0), "{r:?}");
        assert_eq!((r.lower, r.upper), (0, 0));
    }

    #[test]
    fn general_identity_on_orbits() {
        let l = log(&[5.0, 4.0, 3.0, 2.0, 1.0], 5.0, 2, 20_000);
        for pair in 2..5 {
            for (a, b) in consecutive_intervals(&l, pair) {
                let r = expansion_residual(&l, ExpansionVariant::General(pair), a, b).unwrap();
                assert!(r.residual.abs() < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn unit_weight_is_the_kinematic_one() {
        let logs: Vec<EventLog> = (0..4).map(|s| log(&[2.0, 1.0], 1.0, s, 20_000)).collect();
        let adj = adjudicate_floor_weight(&logs, 1e-9);
        assert!(adj.intervals > 0);
        assert_eq!(adj.zeroing, vec![FloorWeight::Unit]);
    }

    #[test]
    fn hypotheses_are_checked() {
        let l = log(&[3.0, 2.0, 1.0], 6.0, 3, 2000);
        let iv = consecutive_intervals(&l, 1);
        let with_floor = iv
            .iter()
            .find(|&&(a, b)| l.events[a + 1..b].iter().any(|e| e.kind == CollisionKind::Floor))
            .unwrap();
        assert!(matches!(
            expansion_residual(&l, ExpansionVariant::General(1), with_floor.0, with_floor.1),
            Err(Error::WrongVariant(_))
        ));
        let (a, _) = iv[0];
        let (_, c) = iv[1];
        assert!(matches!(
            expansion_residual(&l, ExpansionVariant::General(1), a, c),
            Err(Error::WrongVariant(_))
        ));
    }
}
