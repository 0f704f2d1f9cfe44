use serde::{Deserialize, Serialize};

use crate::sim::{CollisionKind, EventLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// Disjoint windows `[k T, (k+1) T)` from the log's start time.
    #[default]
    Tiled,
    /// All windows `[s, s + T)`, `s` ranging over event times.
    Sliding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window_start: f64,
    pub pair_count: usize,
    pub floor_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub window: f64,
    pub mode: WindowMode,
    pub max_pair: usize,
    /// Start of the first window attaining `max_pair`.
    pub max_pair_at: f64,
    pub max_floor: usize,
    pub events: usize,
    /// Tiled windows (empty in sliding mode).
    #[serde(skip)]
    pub rows: Vec<WindowRow>,
}

/// Maximum number of ball-to-ball collisions per time window of length
/// `window`; floor collisions are counted separately.
pub fn collision_count_probe(log: &EventLog, window: f64, mode: WindowMode) -> CountReport {
    assert!(window > 0.0, "window must be positive");
    let mut r = CountReport {
        window,
        mode,
        max_pair: 0,
        max_pair_at: log.initial.t,
        max_floor: 0,
        events: log.len(),
        rows: Vec::new(),
    };
    let ev = &log.events;
    match mode {
        WindowMode::Tiled => {
            let t0 = log.initial.t;
            for e in ev {
                let k = ((e.t - t0) / window).floor() as usize;
                while r.rows.len() <= k {
                    let start = t0 + r.rows.len() as f64 * window;
                    r.rows.push(WindowRow {
                        window_start: start,
                        pair_count: 0,
                        floor_count: 0,
                    });
                }
                match e.kind {
                    CollisionKind::Floor => r.rows[k].floor_count += 1,
                    CollisionKind::Pair(_) => r.rows[k].pair_count += 1,
                }
            }
            for row in &r.rows {
                if row.pair_count > r.max_pair {
                    r.max_pair = row.pair_count;
                    r.max_pair_at = row.window_start;
                }
                r.max_floor = r.max_floor.max(row.floor_count);
            }
        }
        WindowMode::Sliding => {
            // two pointers: window [ev[a].t, ev[a].t + T) with counts of its content
            let (mut pairs, mut floors, mut b) = (0usize, 0usize, 0usize);
            for a in 0..ev.len() {
                while b < ev.len() && ev[b].t < ev[a].t + window {
                    match ev[b].kind {
                        CollisionKind::Floor => floors += 1,
                        CollisionKind::Pair(_) => pairs += 1,
                    }
                    b += 1;
                }
                if pairs > r.max_pair {
                    r.max_pair = pairs;
                    r.max_pair_at = ev[a].t;
                }
                r.max_floor = r.max_floor.max(floors);
                match ev[a].kind {
                    CollisionKind::Floor => floors -= 1,
                    CollisionKind::Pair(_) => pairs -= 1,
                }
            }
        }
    }
    r
}

/// Tiled window maxima over the first `events` collisions of a log.
pub fn prefix_count_probe(log: &EventLog, events: usize, window: f64) -> CountReport {
    let mut prefix = log.clone();
    prefix.events.truncate(events);
    collision_count_probe(&prefix, window, WindowMode::Tiled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::bracket::tests::synthetic;
    use crate::sim::{sample_state, simulate, BranchPolicy, Horizon, MassConfig};
    use CollisionKind::{Floor, Pair};

    #[test]
    fn empty_log_counts_nothing() {
        let log = synthetic(3, &[]);
        for mode in [WindowMode::Tiled, WindowMode::Sliding] {
            let r = collision_count_probe(&log, 1.0, mode);
            assert_eq!((r.max_pair, r.max_floor), (0, 0));
        }
    }

    #[test]
    fn hand_built_counts() {
        // t = 0, 1, 2, ...
        let log = synthetic(3, &[Pair(1), Pair(2), Floor, Pair(2), Floor, Floor, Pair(1)]);
        let r = collision_count_probe(&log, 2.0, WindowMode::Tiled);
        let got: Vec<(usize, usize)> = r.rows.iter().map(|w| (w.pair_count, w.floor_count)).collect();
        assert_eq!(got, vec![(2, 0), (1, 1), (0, 2), (1, 0)]);
        let s = collision_count_probe(&log, 2.0, WindowMode::Sliding);
        assert_eq!((s.max_pair, s.max_floor), (2, 2));
    }

    #[test]
    fn window_maximum_is_monotone_in_length() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let log = simulate(&cfg, &sample_state(&cfg, 1).unwrap(), Horizon::Events(20_000), BranchPolicy::Stop)
            .unwrap()
            .remove(0);
        let mut last = 0;
        for w in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let r = collision_count_probe(&log, w, WindowMode::Sliding);
            assert!(r.max_pair >= last);
            last = r.max_pair;
        }
    }
}
