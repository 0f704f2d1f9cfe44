use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bracket::all_brackets;
use crate::error::{Error, Result};
use crate::sim::{sample_state, simulate, BranchPolicy, CollisionKind, EventLog, Horizon, MassConfig};

/// Pre-collision velocity gaps along one log, with per-bracket maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrace {
    /// `gaps[i-1]` holds `(t, v_i^- - v_{i+1}^-)` for every `(i, i+1)` collision.
    pub gaps: Vec<Vec<(f64, f64)>>,
    /// `bracket_max[b][i-1]`: largest gap of pair `i` inside bracket `b`.
    pub bracket_max: Vec<Vec<f64>>,
    /// Event index at which each bracket closes.
    pub bracket_end: Vec<usize>,
    /// `running_min[b][i-1]`: minimum of `bracket_max[..=b][i-1]`.
    pub running_min: Vec<Vec<f64>>,
}

impl GapTrace {
    /// Empirical `C_i` over all brackets, `None` without brackets.
    pub fn c(&self) -> Option<Vec<f64>> {
        self.running_min.last().cloned()
    }

    /// `C_i` over the brackets closing before event index `end`.
    pub fn c_before(&self, end: usize) -> Option<Vec<f64>> {
        let k = self.bracket_end.iter().take_while(|&&e| e < end).count();
        k.checked_sub(1).map(|k| self.running_min[k].clone())
    }
}

pub fn gap_trace(log: &EventLog) -> GapTrace {
    let pairs = log.config.n() - 1;
    let mut gaps = vec![Vec::new(); pairs];
    for ev in &log.events {
        if let CollisionKind::Pair(i) = ev.kind {
            gaps[i - 1].push((ev.t, ev.v_pre[i - 1] - ev.v_pre[i]));
        }
    }
    let mut bracket_max = Vec::new();
    let mut bracket_end = Vec::new();
    let mut running_min: Vec<Vec<f64>> = Vec::new();
    for b in all_brackets(log) {
        let (s, e) = (b.start().index, b.end().index);
        let mut mx = vec![f64::NEG_INFINITY; pairs];
        for ev in &log.events[s..=e] {
            if let CollisionKind::Pair(i) = ev.kind {
                mx[i - 1] = mx[i - 1].max(ev.v_pre[i - 1] - ev.v_pre[i]);
            }
        }
        let run = match running_min.last() {
            Some(prev) => prev.iter().zip(&mx).map(|(a, b)| a.min(*b)).collect(),
            None => mx.clone(),
        };
        running_min.push(run);
        bracket_max.push(mx);
        bracket_end.push(e);
    }
    GapTrace {
        gaps,
        bracket_max,
        bracket_end,
        running_min,
    }
}

/// Empirical gap bounds over an ensemble, at the full horizon and at half of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartReport {
    /// `C_i` over all seeds at the full horizon.
    pub c: Vec<f64>,
    /// `C_i` using only brackets closed within the first half of every orbit.
    pub c_half: Vec<f64>,
    /// `|C_i - C_i(half)| / C_i(half)`.
    pub stability: Vec<f64>,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    pub brackets: usize,
    pub min_gap: f64,
    /// Orbits stopped early by a singular collision.
    pub truncated: usize,
    /// `(seed, bracket, pair, max_gap)` rows.
    #[serde(skip)]
    pub rows: Vec<(u64, usize, usize, f64)>,
}

impl HeartReport {
    pub fn all_positive(&self) -> bool {
        self.c.iter().chain(&self.c_half).all(|&c| c > 0.0)
    }

    pub fn max_instability(&self) -> f64 {
        self.stability.iter().copied().fold(0.0, f64::max)
    }
}

/// Orbit of `horizon` events, or its regular prefix if it turns singular.
pub(crate) fn run_orbit(cfg: &MassConfig, seed: u64, horizon: u64) -> Result<(EventLog, bool)> {
    let s0 = sample_state(cfg, seed)?;
    let log = simulate(cfg, &s0, Horizon::Events(horizon), BranchPolicy::Truncate)?
        .remove(0)
        .with_seed(seed);
    let truncated = log.terminated.is_some();
    Ok((log, truncated))
}

/// Per-pair empirical `C_i` over `seeds` orbits of `horizon` events each.
pub fn heart_probe(cfg: &MassConfig, seeds: &[u64], horizon: u64) -> Result<HeartReport> {
    let pairs = cfg.n() - 1;
    let per_seed: Vec<(u64, GapTrace, usize, bool)> = seeds
        .par_iter()
        .map(|&seed| {
            let (log, truncated) = run_orbit(cfg, seed, horizon)?;
            Ok((seed, gap_trace(&log), log.len(), truncated))
        })
        .collect::<Result<_>>()?;
    let mut c = vec![f64::INFINITY; pairs];
    let mut c_half = vec![f64::INFINITY; pairs];
    let mut brackets = 0;
    let mut min_gap = f64::INFINITY;
    let mut truncated = 0;
    let mut rows = Vec::new();
    for (seed, trace, _, trunc) in &per_seed {
        truncated += *trunc as usize;
        let (full, half) = match (trace.c(), trace.c_before((horizon / 2) as usize)) {
            (Some(f), Some(h)) => (f, h),
            _ => return Err(Error::Incomplete(0)),
        };
        for i in 0..pairs {
            c[i] = c[i].min(full[i]);
            c_half[i] = c_half[i].min(half[i]);
        }
        brackets += trace.bracket_max.len();
        for g in trace.gaps.iter().flatten() {
            min_gap = min_gap.min(g.1);
        }
        for (b, mx) in trace.bracket_max.iter().enumerate() {
            for (i, &m) in mx.iter().enumerate() {
                rows.push((*seed, b, i + 1, m));
            }
        }
    }
    let stability = c.iter().zip(&c_half).map(|(a, b)| (a - b).abs() / b).collect();
    Ok(HeartReport {
        c,
        c_half,
        stability,
        seeds: seeds.to_vec(),
        horizon,
        brackets,
        min_gap,
        truncated,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_are_nonnegative_and_c_is_a_minimum() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let (log, _) = run_orbit(&cfg, 5, 20_000).unwrap();
        let tr = gap_trace(&log);
        assert!(tr.gaps.iter().flatten().all(|g| g.1 >= 0.0));
        assert!(!tr.bracket_max.is_empty());
        let c = tr.c().unwrap();
        for mx in &tr.bracket_max {
            for i in 0..2 {
                assert!(c[i] <= mx[i]);
                assert!(mx[i] > 0.0);
            }
        }
    }

    #[test]
    fn probe_reports_positive_bounds() {
        let cfg = MassConfig::new(&[2.0, 1.0, 3.0 / 7.0], 6.0).unwrap();
        let r = heart_probe(&cfg, &[1, 2], 4000).unwrap();
        assert!(r.all_positive());
        assert!(r.c.iter().zip(&r.c_half).all(|(a, b)| a <= b));
    }
}
