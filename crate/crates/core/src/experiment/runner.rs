use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{real, Artifacts};
use crate::diagnostics::{
    adjudicate_floor_weight, collision_count_probe, heart_probe, sample_residuals, sufficiency_search,
};
use crate::error::{Error, Result};
use crate::sim::jsonl::{write_jsonl_tagged, VERSION};
use crate::sim::{hamiltonian, sample_state, simulate, BranchPolicy, EventLog, Horizon, MassConfig};
use crate::tangent::{lyapunov_max_fd, lyapunov_spectrum, noncontraction_estimate, tau_e0, TauOutcome};
use crate::wedge::{build_wedge, continuation_test, unfold, wedge_equivalence};

/// A finding that contradicts what the probe expects to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedFlag {
    pub code: String,
    pub message: String,
    pub witness: Json,
}

fn flag(code: &str, message: String, witness: Json) -> RedFlag {
    RedFlag { code: code.into(), message, witness }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub red_flags: Vec<RedFlag>,
    /// The `result` section of `report.json`.
    pub result: Json,
}

impl RunOutcome {
    /// 0 when clean, 1 when red flags were raised.
    pub fn exit_code(&self) -> i32 {
        if self.red_flags.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Runs the configured experiment and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let out = Artifacts::new(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let (result, red_flags) = pool.install(|| run_kind(cfg, &out))?;
    let report = json!({
        "version": VERSION,
        "config_hash": out.hash,
        "config": cfg.source,
        "kind": cfg.kind.name(),
        "masses": cfg.masses,
        "energy": cfg.energy,
        "seeds": cfg.seeds,
        "status": if red_flags.is_empty() { "ok" } else { "red-flag" },
        "red_flags": red_flags,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    out.write("report.json", text.as_bytes())?;
    Ok(RunOutcome { dir: out.dir, red_flags, result })
}

type KindResult = Result<(Json, Vec<RedFlag>)>;

fn run_kind(cfg: &ExperimentConfig, out: &Artifacts) -> KindResult {
    let mc = cfg.mass_config()?;
    match cfg.kind {
        ExperimentKind::Simulate => run_simulate(cfg, &mc, out),
        ExperimentKind::Lyapunov => run_lyapunov(cfg, &mc, out),
        ExperimentKind::Noncontraction => run_noncontraction(cfg, &mc, out),
        ExperimentKind::Tau => run_tau(cfg, &mc, out),
        ExperimentKind::Heart => run_heart(cfg, &mc, out),
        ExperimentKind::Counts => run_counts(cfg, &mc, out),
        ExperimentKind::Sufficiency => run_sufficiency(cfg, &mc, out),
        ExperimentKind::WedgeEquivalence => run_wedge_equivalence(cfg, &mc, out),
        ExperimentKind::WedgeUnfold => run_wedge_unfold(cfg, &mc, out),
        ExperimentKind::IdentityCheck => run_identity(cfg, &mc, out),
    }
}

/// One orbit per seed, cut before a singular collision.
fn orbits(mc: &MassConfig, seeds: &[u64], horizon: u64) -> Result<Vec<EventLog>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s0 = sample_state(mc, seed)?;
            Ok(simulate(mc, &s0, Horizon::Events(horizon), BranchPolicy::Truncate)?.remove(0).with_seed(seed))
        })
        .collect()
}

fn run_simulate(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let horizon = cfg.horizon.expect("validated");
    let depth = cfg.int("simulate.branch_depth");
    let policy = if depth > 0 { BranchPolicy::Branch { max_depth: depth } } else { BranchPolicy::Truncate };
    let per_seed: Vec<Vec<EventLog>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s0 = sample_state(mc, seed)?;
            Ok(simulate(mc, &s0, horizon, policy)?.into_iter().map(|l| l.with_seed(seed)).collect())
        })
        .collect::<Result<_>>()?;
    let logs: Vec<EventLog> = per_seed.into_iter().flatten().collect();
    let single = logs.len() == 1;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for log in &logs {
        let seed = log.seed.unwrap_or_default();
        let name = if single {
            "events.jsonl".to_string()
        } else if log.branch.is_empty() {
            format!("events/seed-{seed}.jsonl")
        } else {
            format!("events/seed-{seed}-{}.jsonl", log.branch)
        };
        let mut buf = Vec::new();
        write_jsonl_tagged(log, Some(&out.hash), &mut buf)?;
        out.write(&name, &buf)?;
        files.push(name);
        let h0 = hamiltonian(mc, &log.initial);
        let drift = (hamiltonian(mc, &log.final_state) - h0).abs() / h0.abs().max(f64::MIN_POSITIVE);
        rows.push(vec![
            seed.to_string(),
            log.branch.clone(),
            log.len().to_string(),
            real(log.final_state.t),
            real(drift),
            (log.terminated.is_some() as u8).to_string(),
        ]);
    }
    out.table("orbits", &["seed", "branch", "events", "t_end", "energy_drift", "terminated"], &rows)?;
    let summary: Vec<Json> = logs
        .iter()
        .zip(&files)
        .map(|(l, f)| {
            json!({
                "seed": l.seed, "branch": l.branch, "events": l.len(), "t_end": l.final_state.t,
                "terminated": l.terminated, "file": f,
            })
        })
        .collect();
    Ok((json!({ "logs": summary }), Vec::new()))
}

fn run_lyapunov(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let steps = cfg.horizon_events()? as usize;
    let every = cfg.int("lyapunov.every");
    let fd_steps = cfg.int("lyapunov.fd_steps");
    let h = cfg.float("lyapunov.fd_h");
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s0 = sample_state(mc, seed)?;
            let spec = lyapunov_spectrum(mc, &s0, steps.max(1), every)?;
            let fd = if fd_steps > 0 {
                let fd = lyapunov_max_fd(mc, &s0, fd_steps, h, seed)?;
                let same = lyapunov_spectrum(mc, &s0, fd_steps, every)?.max();
                Some((fd, same))
            } else {
                None
            };
            Ok((seed, spec, fd))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = 2 * (mc.n() - 1);
    let mut columns: Vec<String> = vec!["seed".into(), "events".into(), "time".into()];
    columns.extend((1..=dim).map(|k| format!("lambda_{k}")));
    columns.extend(["pairing_defect", "fd_max", "cocycle_max_fd_window", "fd_relative_difference"].map(String::from));
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    let mut seeds_json = Vec::new();
    for (seed, spec, fd) in &per_seed {
        let mut r = vec![seed.to_string(), spec.events.to_string(), real(spec.time)];
        r.extend(spec.per_event.iter().map(|&l| real(l)));
        r.push(real(spec.pairing_defect()));
        let rel = fd.map(|(a, b)| (a - b).abs() / b.abs());
        match fd {
            Some((a, b)) => r.extend([real(*a), real(*b), real(rel.unwrap())]),
            None => r.extend(["".into(), "".into(), "".into()]),
        }
        rows.push(r);
        if !(spec.max() > 0.0) {
            flags.push(flag(
                "lyapunov-nonpositive",
                format!("largest exponent {} <= 0 for seed {seed}", spec.max()),
                json!({ "seed": seed, "spectrum": spec.per_event }),
            ));
        }
        seeds_json.push(json!({
            "seed": seed, "spectrum": spec, "pairing_defect": spec.pairing_defect(),
            "fd_max": fd.map(|f| f.0), "cocycle_max_fd_window": fd.map(|f| f.1), "fd_relative_difference": rel,
        }));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    out.table("lyapunov", &cols, &rows)?;
    let lmax = per_seed.iter().map(|p| p.1.max()).fold(f64::INFINITY, f64::min);
    Ok((json!({ "min_lambda_max": lmax, "seeds": seeds_json }), flags))
}

fn run_noncontraction(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let n_max = cfg.int("noncontraction.n_max");
    let r = noncontraction_estimate(
        mc,
        &cfg.seeds,
        n_max,
        cfg.int("noncontraction.vectors"),
        cfg.int("noncontraction.vector_seed") as u64,
    )?;
    let rows: Vec<Vec<String>> = r
        .min_by_n
        .iter()
        .zip(&r.running_min)
        .enumerate()
        .map(|(n, (m, rm))| vec![n.to_string(), real(*m), real(*rm)])
        .collect();
    out.table("noncontraction", &["n", "min_norm", "running_min"], &rows)?;
    let split = n_max / 2;
    let (early, late) = r.split_minima(split);
    let mut flags = Vec::new();
    if !(r.zeta_est > 0.0) {
        flags.push(flag("zeta-nonpositive", format!("zeta estimate {} <= 0", r.zeta_est), json!(r.witness)));
    }
    if n_max >= 2 && !(late >= 0.5 * early) {
        flags.push(flag(
            "running-min-vanishing",
            format!("min over n >= {split} is {late}, below half of min over n < {split} ({early})"),
            json!(r.witness),
        ));
    }
    Ok((
        json!({ "zeta_est": r.zeta_est, "witness": r.witness, "split": split, "min_before_split": early,
                "min_after_split": late, "truncated": r.truncated, "orbits": r.orbits,
                "vectors_per_orbit": r.vectors_per_orbit, "n_max": r.n_max }),
        flags,
    ))
}

fn run_tau(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let e0 = cfg.float("tau.e0");
    let (interior, boundary, cutoff) = (cfg.int("tau.interior"), cfg.int("tau.boundary"), cfg.int("tau.cutoff"));
    let reports = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s0 = sample_state(mc, seed)?;
            Ok((seed, tau_e0(mc, &s0, e0, interior, boundary, cutoff, seed)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    let mut max_tau: f64 = 0.0;
    for (seed, r) in &reports {
        match r.outcome {
            TauOutcome::Finite { tau, events } => {
                max_tau = max_tau.max(tau);
                rows.push(vec![seed.to_string(), "finite".into(), real(tau), events.to_string()]);
            }
            TauOutcome::Exceeded { cutoff } => {
                rows.push(vec![seed.to_string(), "exceeded".into(), "".into(), cutoff.to_string()]);
                flags.push(flag(
                    "tau-exceeded",
                    format!("seed {seed}: some cone vector still has Q <= {e0} after {cutoff} collisions"),
                    json!({ "seed": seed, "slowest": r.slowest }),
                ));
            }
        }
    }
    out.table("tau", &["seed", "outcome", "tau", "events"], &rows)?;
    let finite = reports.iter().filter(|r| r.1.outcome.tau().is_some()).count();
    let per_seed: Vec<Json> = reports.iter().map(|(s, r)| json!({ "seed": s, "report": r })).collect();
    Ok((json!({ "e0": e0, "finite": finite, "orbits": reports.len(), "max_tau": max_tau, "seeds": per_seed }), flags))
}

fn run_heart(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let horizon = cfg.horizon_events()?;
    let r = heart_probe(mc, &cfg.seeds, horizon)?;
    let rows: Vec<Vec<String>> = (0..r.c.len())
        .map(|i| vec![(i + 1).to_string(), real(r.c[i]), real(r.c_half[i]), real(r.stability[i])])
        .collect();
    out.table("heart", &["pair", "c", "c_half_horizon", "relative_change"], &rows)?;
    let cap = cfg.int("heart.bracket_rows");
    let mut gap_rows = Vec::new();
    let mut last = None;
    let mut taken = 0;
    for &(seed, bracket, pair, gap) in &r.rows {
        if last != Some(seed) {
            last = Some(seed);
            taken = 0;
        }
        if taken < cap {
            gap_rows.push(vec![seed.to_string(), bracket.to_string(), pair.to_string(), real(gap)]);
        }
        taken += 1;
    }
    out.table("bracket_gaps", &["seed", "bracket", "pair", "max_gap"], &gap_rows)?;
    let mut flags = Vec::new();
    for (i, &c) in r.c.iter().enumerate() {
        if !(c > 0.0) {
            let witness = r
                .rows
                .iter()
                .filter(|row| row.2 == i + 1)
                .min_by(|a, b| a.3.total_cmp(&b.3))
                .map(|row| json!({ "seed": row.0, "bracket": row.1, "pair": row.2, "max_gap": row.3 }));
            flags.push(flag("heart-bound-vanishing", format!("C_{} = {c}", i + 1), json!(witness)));
        }
    }
    Ok((serde_json::to_value(&r)?, flags))
}

fn run_counts(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let horizon = cfg.horizon_events()?;
    let window = cfg.float("counts.window");
    if !(window > 0.0) {
        return Err(Error::InvalidArgument("counts.window must be positive".into()));
    }
    let mode = cfg.window_mode();
    let logs = orbits(mc, &cfg.seeds, horizon)?;
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    let (mut half_max, mut full_max, mut floor_max) = (0, 0, 0);
    for log in &logs {
        let full = collision_count_probe(log, window, mode);
        let mut prefix = log.clone();
        prefix.events.truncate((horizon / 2) as usize);
        let half = collision_count_probe(&prefix, window, mode);
        for w in &full.rows {
            rows.push(vec![
                log.seed.unwrap_or_default().to_string(),
                real(w.window_start),
                w.pair_count.to_string(),
                w.floor_count.to_string(),
            ]);
        }
        half_max = half_max.max(half.max_pair);
        full_max = full_max.max(full.max_pair);
        floor_max = floor_max.max(full.max_floor);
        per_seed.push(json!({ "seed": log.seed, "half": half, "full": full, "terminated": log.terminated }));
    }
    out.table("counts", &["seed", "window_start", "pair_count", "floor_count"], &rows)?;
    let growth = if half_max > 0 { (full_max as f64 - half_max as f64) / half_max as f64 } else { 0.0 };
    Ok((
        json!({ "window": window, "mode": mode, "max_pair_half_horizon": half_max, "max_pair": full_max,
                "relative_growth": growth, "max_floor": floor_max, "seeds": per_seed }),
        Vec::new(),
    ))
}

fn run_sufficiency(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let threshold = cfg.float("sufficiency.threshold");
    let n_cap = cfg.int("sufficiency.n_cap");
    let direction = cfg.direction();
    let results = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s0 = sample_state(mc, seed)?;
            let r = match sufficiency_search(mc, &s0, threshold, n_cap, direction) {
                Ok(s) => json!({ "seed": seed, "outcome": "found", "n": s.n, "sigma": s.sigma, "sigma_prev": s.sigma_prev }),
                Err(Error::SingularEncountered(n)) => json!({ "seed": seed, "outcome": "singular", "n": n }),
                Err(Error::Exceeded(n)) => json!({ "seed": seed, "outcome": "exceeded", "n": n }),
                Err(e) => return Err(e),
            };
            Ok(r)
        })
        .collect::<Result<Vec<Json>>>()?;
    let mut flags = Vec::new();
    let mut rows = Vec::new();
    let cell = |v: &Json| v.as_f64().map(real).unwrap_or_default();
    for r in &results {
        rows.push(vec![
            r["seed"].to_string(),
            r["outcome"].as_str().unwrap_or_default().to_string(),
            r["n"].to_string(),
            cell(&r["sigma"]),
            cell(&r["sigma_prev"]),
        ]);
        if let (Some(s), Some(p)) = (r["sigma"].as_f64(), r["sigma_prev"].as_f64()) {
            if s < p * (1.0 - 1e-9) {
                flags.push(flag("sigma-decreasing", format!("sigma dropped from {p} to {s}"), r.clone()));
            }
        }
    }
    out.table("sufficiency", &["seed", "outcome", "n", "sigma", "sigma_prev"], &rows)?;
    Ok((json!({ "threshold": threshold, "n_cap": n_cap, "direction": direction, "seeds": results }), flags))
}

fn run_wedge_equivalence(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let events = cfg.horizon_events()? as usize;
    let tol = cfg.float("wedge.tol");
    let reports = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s0 = sample_state(mc, seed)?;
            Ok((seed, wedge_equivalence(mc, &s0, events, tol)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    for (seed, r) in &reports {
        rows.push(vec![
            seed.to_string(),
            r.events.to_string(),
            real(r.max_time_error),
            real(r.max_position_error),
            real(r.max_velocity_error),
            r.face_mismatches.to_string(),
            real(r.max_energy_drift),
            r.free_run_agreement.to_string(),
        ]);
        if !r.passes() {
            flags.push(flag("wedge-mismatch", format!("seed {seed}: wedge billiard disagrees beyond {tol}"), json!(r)));
        }
    }
    out.table(
        "wedge_equivalence",
        &["seed", "events", "max_time_error", "max_position_error", "max_velocity_error", "face_mismatches", "max_energy_drift", "free_run_agreement"],
        &rows,
    )?;
    let per_seed: Vec<Json> = reports.iter().map(|(s, r)| json!({ "seed": s, "report": r })).collect();
    Ok((json!({ "tol": tol, "seeds": per_seed }), flags))
}

fn run_wedge_unfold(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let model = build_wedge(mc)?;
    let fan = unfold(&model, cfg.int("wedge.max_copies"))?;
    let delta = cfg.float("wedge.delta");
    let deltas: Vec<f64> = (0..=cfg.int("wedge.halvings")).map(|k| delta / 2f64.powi(k as i32)).collect();
    let cont = continuation_test(&model, cfg.float("wedge.height"), &deltas)?;
    let fan_lines = fan.to_csv();
    let columns: Vec<String> = fan_lines.lines().next().unwrap_or("").split(',').map(String::from).collect();
    let fan_rows: Vec<Vec<String>> = fan_lines.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    out.table("fan", &cols, &fan_rows)?;
    let rows: Vec<Vec<String>> = cont
        .rows
        .iter()
        .map(|r| {
            vec![
                real(r.delta),
                real(r.unfolded),
                real(r.folded),
                real(r.straightness),
                r.reflections.0.to_string(),
                r.reflections.1.to_string(),
            ]
        })
        .collect();
    out.table("continuation", &["delta", "unfolded_divergence", "folded_divergence", "straightness", "reflections_a", "reflections_b"], &rows)?;
    let mut flags = Vec::new();
    if !((cont.slope - 1.0).abs() <= 0.2) {
        flags.push(flag("continuation-slope", format!("divergence slope {} outside 1 +- 0.2", cont.slope), json!(cont.rows)));
    }
    Ok((
        json!({ "dihedral": fan.dihedral, "copies": fan.copies(), "copies_to_cover": fan.copies_to_cover,
                "closes": fan.closes, "total_angle": fan.total_angle, "words": fan.words, "continuation": cont }),
        flags,
    ))
}

fn run_identity(cfg: &ExperimentConfig, mc: &MassConfig, out: &Artifacts) -> KindResult {
    let horizon = cfg.horizon_events()?;
    let count = cfg.int("identity.intervals");
    let tol = cfg.float("identity.tol");
    let logs = orbits(mc, &cfg.seeds, horizon)?;
    let samples: Vec<(u64, Vec<_>)> = logs
        .par_iter()
        .map(|log| {
            let seed = log.seed.unwrap_or_default();
            (seed, sample_residuals(log, count, seed))
        })
        .collect();
    let mut rows = Vec::new();
    let mut stats: Vec<(String, usize, f64, Json)> = Vec::new();
    for (seed, rs) in &samples {
        for r in rs {
            rows.push(vec![
                seed.to_string(),
                r.variant.to_string(),
                r.t1.to_string(),
                r.t2.to_string(),
                real(r.lhs),
                real(r.rhs),
                real(r.residual),
                r.lower.to_string(),
                r.upper.to_string(),
                r.returns.to_string(),
            ]);
            let name = r.variant.to_string();
            let witness = json!({ "seed": seed, "interval": r });
            match stats.iter_mut().find(|s| s.0 == name) {
                Some(s) => {
                    s.1 += 1;
                    if r.residual.abs() > s.2 {
                        s.2 = r.residual.abs();
                        s.3 = witness;
                    }
                }
                None => stats.push((name, 1, r.residual.abs(), witness)),
            }
        }
    }
    stats.sort_by(|a, b| a.0.cmp(&b.0));
    out.table(
        "residuals",
        &["seed", "variant", "t1", "t2", "lhs", "rhs", "residual", "lower", "upper", "returns"],
        &rows,
    )?;
    let adjudication = adjudicate_floor_weight(&logs, tol);
    let mut flags = Vec::new();
    for (name, _, max, witness) in &stats {
        let general = name.starts_with("general");
        if general && !(*max < tol) {
            flags.push(flag("identity-residual", format!("{name}: residual {max:e} exceeds {tol:e}"), witness.clone()));
        }
    }
    if adjudication.zeroing.len() != 1 {
        flags.push(flag(
            "identity-adjudication",
            format!("{} floor-weight variants zero the residual, expected exactly one", adjudication.zeroing.len()),
            json!(adjudication),
        ));
    }
    let variants: Vec<Json> = stats
        .iter()
        .map(|(name, n, max, w)| json!({ "variant": name, "intervals": n, "max_abs_residual": max, "worst": w }))
        .collect();
    Ok((json!({ "tol": tol, "variants": variants, "adjudication": adjudication }), flags))
}
