use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{CollisionEvent, CollisionKind, EventLog};

/// One marked collision of a pattern bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub kind: CollisionKind,
    pub index: usize,
    pub t: f64,
}

/// Collision pattern `(1,2), (2,3), ..., (N-1,N), floor, (N-1,N), ..., (1,2)`,
/// each mark being the first collision of its kind after the previous mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternBracket {
    pub marks: Vec<Mark>,
}

impl PatternBracket {
    pub fn start(&self) -> Mark {
        self.marks[0]
    }

    pub fn end(&self) -> Mark {
        *self.marks.last().unwrap()
    }

    pub fn t_start(&self) -> f64 {
        self.start().t
    }

    pub fn t_end(&self) -> f64 {
        self.end().t
    }

    /// The floor mark `t_0`.
    pub fn floor_mark(&self) -> Mark {
        self.marks[self.marks.len() / 2]
    }
}

fn pattern(n_balls: usize) -> Vec<CollisionKind> {
    let mut p: Vec<CollisionKind> = (1..n_balls).map(CollisionKind::Pair).collect();
    p.push(CollisionKind::Floor);
    p.extend((1..n_balls).rev().map(CollisionKind::Pair));
    p
}

/// First complete bracket whose opening `(1,2)` collision has index `>= from`.
pub fn find_pattern_bracket(log: &EventLog, from: usize) -> Result<PatternBracket> {
    find_in(&log.events, log.config.n(), from)
}

pub(crate) fn find_in(events: &[CollisionEvent], n_balls: usize, from: usize) -> Result<PatternBracket> {
    let mut marks = Vec::with_capacity(2 * n_balls - 1);
    let mut k = from;
    for want in pattern(n_balls) {
        while k < events.len() && events[k].kind != want {
            k += 1;
        }
        if k == events.len() {
            return Err(Error::Incomplete(from));
        }
        marks.push(Mark {
            kind: want,
            index: k,
            t: events[k].t,
        });
        k += 1;
    }
    Ok(PatternBracket { marks })
}

/// Brackets opened greedily at every `(1,2)` collision (overlaps allowed).
pub fn all_brackets(log: &EventLog) -> Vec<PatternBracket> {
    let n = log.config.n();
    let mut out = Vec::new();
    for (k, ev) in log.events.iter().enumerate() {
        if ev.kind == CollisionKind::Pair(1) {
            match find_in(&log.events, n, k) {
                Ok(b) => out.push(b),
                Err(_) => break,
            }
        }
    }
    out
}

/// Collision times of one kind inside a bracket, augmented by the bracket ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPartition {
    /// `0` for the floor, `i` for the pair `(i, i+1)`.
    pub pair: usize,
    /// `s_0 = t_start, s_1, ..., s_n, s_{n+1} = t_end`.
    pub times: Vec<f64>,
    /// Event indices of the interior times.
    pub indices: Vec<usize>,
}

impl PairPartition {
    /// Number of subintervals `[s_k, s_{k+1}]`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }
}

fn kind_of(pair: usize) -> CollisionKind {
    if pair == 0 {
        CollisionKind::Floor
    } else {
        CollisionKind::Pair(pair)
    }
}

/// Partition of `[t_start, t_end]` by the collisions of `pair` strictly between the ends.
pub fn build_partition(log: &EventLog, bracket: &PatternBracket, pair: usize) -> PairPartition {
    let (a, b) = (bracket.start().index, bracket.end().index);
    let kind = kind_of(pair);
    let indices: Vec<usize> = (a + 1..b).filter(|&k| log.events[k].kind == kind).collect();
    let mut times = vec![bracket.t_start()];
    times.extend(indices.iter().map(|&k| log.events[k].t));
    times.push(bracket.t_end());
    PairPartition { pair, times, indices }
}

/// Number of `pair` collisions with event index strictly between `from` and
/// `to` (`c_{i,j,k}` when the ends are consecutive marks of a partition).
pub fn count_between(log: &EventLog, pair: usize, from: usize, to: usize) -> usize {
    let kind = kind_of(pair);
    log.events
        .get(from + 1..to.min(log.events.len()))
        .map_or(0, |s| s.iter().filter(|e| e.kind == kind).count())
}
