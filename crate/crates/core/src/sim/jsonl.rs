//! JSON-lines persistence of event logs.
//!
//! The first line is a header `{config, seed, version, branch, initial,
//! final_state, terminated}`; every following line is one event
//! `{n, t, kind, i, q, v_pre, v_post, singular, branch}`. Reals are written in
//! the shortest representation that parses back to the identical `f64`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::collision::{CollisionKind, Singularity};
use super::engine::{CollisionEvent, EventLog};
use super::{BallState, MassConfig};
use crate::error::{Error, Result};

pub const VERSION: &str = concat!("nballs ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: MassConfig,
    seed: Option<u64>,
    version: String,
    branch: String,
    initial: BallState,
    final_state: BallState,
    terminated: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventLine {
    n: u64,
    t: f64,
    kind: String,
    i: usize,
    q: Vec<f64>,
    v_pre: Vec<f64>,
    v_post: Vec<f64>,
    singular: Singularity,
    branch: String,
}

pub fn write_jsonl<W: Write>(log: &EventLog, w: W) -> Result<()> {
    write_jsonl_tagged(log, None, w)
}

/// As [`write_jsonl`], with the hash of the producing configuration in the header.
pub fn write_jsonl_tagged<W: Write>(log: &EventLog, config_hash: Option<&str>, mut w: W) -> Result<()> {
    let header = Header {
        config: log.config.clone(),
        seed: log.seed,
        version: VERSION.to_string(),
        branch: log.branch.clone(),
        initial: log.initial.clone(),
        final_state: log.final_state.clone(),
        terminated: log.terminated.clone(),
        config_hash: config_hash.map(str::to_string),
    };
    let io = |e| Error::io("<event log>", e);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for ev in &log.events {
        let (kind, i) = match ev.kind {
            CollisionKind::Floor => ("floor", 0),
            CollisionKind::Pair(i) => ("pair", i),
        };
        let line = EventLine {
            n: ev.n,
            t: ev.t,
            kind: kind.to_string(),
            i,
            q: ev.q_at.clone(),
            v_pre: ev.v_pre.clone(),
            v_post: ev.v_post.clone(),
            singular: ev.singular,
            branch: log.branch.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<EventLog> {
    let mut lines = r.lines();
    let io = |e| Error::io("<event log>", e);
    let first = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty event log".into()))?
        .map_err(io)?;
    let header: Header = serde_json::from_str(&first)?;
    let mut events = Vec::new();
    for line in lines {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: EventLine = serde_json::from_str(&line)?;
        let kind = match ev.kind.as_str() {
            "floor" => CollisionKind::Floor,
            "pair" => CollisionKind::Pair(ev.i),
            other => return Err(Error::InvalidArgument(format!("unknown event kind `{other}`"))),
        };
        events.push(CollisionEvent {
            n: ev.n,
            t: ev.t,
            kind,
            q_at: ev.q,
            v_pre: ev.v_pre,
            v_post: ev.v_post,
            singular: ev.singular,
            section_label: kind.section_label(),
        });
    }
    Ok(EventLog {
        config: header.config,
        initial: header.initial,
        events,
        final_state: header.final_state,
        branch: header.branch,
        seed: header.seed,
        terminated: header.terminated,
    })
}
