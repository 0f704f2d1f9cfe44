//! Line-based `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{Direction, WindowMode};
use crate::error::{Error, Result};
use crate::sim::{Horizon, MassConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Lyapunov,
    Noncontraction,
    Tau,
    Heart,
    Counts,
    Sufficiency,
    WedgeEquivalence,
    WedgeUnfold,
    IdentityCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::Simulate,
        ExperimentKind::Lyapunov,
        ExperimentKind::Noncontraction,
        ExperimentKind::Tau,
        ExperimentKind::Heart,
        ExperimentKind::Counts,
        ExperimentKind::Sufficiency,
        ExperimentKind::WedgeEquivalence,
        ExperimentKind::WedgeUnfold,
        ExperimentKind::IdentityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Noncontraction => "noncontraction",
            ExperimentKind::Tau => "tau",
            ExperimentKind::Heart => "heart",
            ExperimentKind::Counts => "counts",
            ExperimentKind::Sufficiency => "sufficiency",
            ExperimentKind::WedgeEquivalence => "wedge-equivalence",
            ExperimentKind::WedgeUnfold => "wedge-unfold",
            ExperimentKind::IdentityCheck => "identity-check",
        }
    }

    fn needs_energy(self) -> bool {
        self != ExperimentKind::WedgeUnfold
    }

    fn needs_horizon(self) -> bool {
        matches!(
            self,
            ExperimentKind::Simulate
                | ExperimentKind::Lyapunov
                | ExperimentKind::Heart
                | ExperimentKind::Counts
                | ExperimentKind::IdentityCheck
                | ExperimentKind::WedgeEquivalence
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Float,
    Int,
    FloatList,
    IntList,
    Text,
    Choice(&'static [&'static str]),
}

impl Ty {
    fn describe(self) -> String {
        match self {
            Ty::Float => "real".into(),
            Ty::Int => "integer".into(),
            Ty::FloatList => "list of reals".into(),
            Ty::IntList => "list of integers".into(),
            Ty::Text => "text".into(),
            Ty::Choice(c) => c.join(" | "),
        }
    }
}

struct KeySpec {
    key: &'static str,
    ty: Ty,
    default: &'static str,
    /// Kinds the key applies to; empty for all.
    kinds: &'static [&'static str],
    help: &'static str,
}

const KIND_NAMES: &[&str] = &[
    "simulate",
    "lyapunov",
    "noncontraction",
    "tau",
    "heart",
    "counts",
    "sufficiency",
    "wedge-equivalence",
    "wedge-unfold",
    "identity-check",
];

const KEYS: &[KeySpec] = &[
    KeySpec { key: "kind", ty: Ty::Choice(KIND_NAMES), default: "", kinds: &[], help: "experiment to run (required)" },
    KeySpec { key: "masses", ty: Ty::FloatList, default: "", kinds: &[], help: "strictly decreasing masses, bottom ball first; `a/b` fractions allowed (required)" },
    KeySpec { key: "energy", ty: Ty::Float, default: "", kinds: &[], help: "total energy (required except for wedge-unfold)" },
    KeySpec { key: "seeds", ty: Ty::IntList, default: "", kinds: &[], help: "explicit seed list; overrides seeds.count/seeds.base" },
    KeySpec { key: "seeds.count", ty: Ty::Int, default: "1", kinds: &[], help: "number of consecutive seeds" },
    KeySpec { key: "seeds.base", ty: Ty::Int, default: "0", kinds: &[], help: "first seed" },
    KeySpec { key: "horizon", ty: Ty::Int, default: "", kinds: &[], help: "horizon in collisions (same as horizon.events)" },
    KeySpec { key: "horizon.events", ty: Ty::Int, default: "", kinds: &[], help: "horizon in collisions" },
    KeySpec { key: "horizon.time", ty: Ty::Float, default: "", kinds: &["simulate"], help: "horizon in time units" },
    KeySpec { key: "output", ty: Ty::Text, default: "out", kinds: &[], help: "output directory (overridden by NBALLS_OUTPUT)" },
    KeySpec { key: "jobs", ty: Ty::Int, default: "0", kinds: &[], help: "worker threads; 0 uses all cores" },
    KeySpec { key: "simulate.branch_depth", ty: Ty::Int, default: "0", kinds: &["simulate"], help: "follow both branches at singular collisions up to this depth; 0 truncates the orbit there" },
    KeySpec { key: "lyapunov.every", ty: Ty::Int, default: "10", kinds: &["lyapunov"], help: "collisions between QR re-orthonormalizations" },
    KeySpec { key: "lyapunov.fd_steps", ty: Ty::Int, default: "2000", kinds: &["lyapunov"], help: "collisions for the finite-difference cross-check (0 disables it)" },
    KeySpec { key: "lyapunov.fd_h", ty: Ty::Float, default: "1e-7", kinds: &["lyapunov"], help: "finite-difference step" },
    KeySpec { key: "noncontraction.n_max", ty: Ty::Int, default: "1000", kinds: &["noncontraction"], help: "largest iterate" },
    KeySpec { key: "noncontraction.vectors", ty: Ty::Int, default: "1000", kinds: &["noncontraction"], help: "cone vectors per orbit" },
    KeySpec { key: "noncontraction.vector_seed", ty: Ty::Int, default: "0", kinds: &["noncontraction"], help: "seed of the vector sampler" },
    KeySpec { key: "tau.e0", ty: Ty::Float, default: "1", kinds: &["tau"], help: "Q level to exceed" },
    KeySpec { key: "tau.interior", ty: Ty::Int, default: "100", kinds: &["tau"], help: "interior cone vectors per orbit" },
    KeySpec { key: "tau.boundary", ty: Ty::Int, default: "100", kinds: &["tau"], help: "boundary (Q = 0) vectors per orbit" },
    KeySpec { key: "tau.cutoff", ty: Ty::Int, default: "10000", kinds: &["tau"], help: "collisions before giving up" },
    KeySpec { key: "heart.bracket_rows", ty: Ty::Int, default: "2000", kinds: &["heart"], help: "per-seed bracket rows written to tables/bracket_gaps.csv" },
    KeySpec { key: "counts.window", ty: Ty::Float, default: "1", kinds: &["counts"], help: "window length T" },
    KeySpec { key: "counts.mode", ty: Ty::Choice(&["tiled", "sliding"]), default: "tiled", kinds: &["counts"], help: "window placement" },
    KeySpec { key: "sufficiency.threshold", ty: Ty::Float, default: "3", kinds: &["sufficiency"], help: "sigma threshold" },
    KeySpec { key: "sufficiency.n_cap", ty: Ty::Int, default: "1000", kinds: &["sufficiency"], help: "largest iterate searched" },
    KeySpec { key: "sufficiency.direction", ty: Ty::Choice(&["forward", "backward"]), default: "forward", kinds: &["sufficiency"], help: "forward sigma or backward sigma'" },
    KeySpec { key: "identity.intervals", ty: Ty::Int, default: "1000", kinds: &["identity-check"], help: "sampled intervals per variant and orbit" },
    KeySpec { key: "identity.tol", ty: Ty::Float, default: "1e-9", kinds: &["identity-check"], help: "residual tolerance" },
    KeySpec { key: "wedge.tol", ty: Ty::Float, default: "1e-9", kinds: &["wedge-equivalence"], help: "time/position agreement tolerance" },
    KeySpec { key: "wedge.max_copies", ty: Ty::Int, default: "12", kinds: &["wedge-unfold"], help: "largest number of fan copies" },
    KeySpec { key: "wedge.height", ty: Ty::Float, default: "5", kinds: &["wedge-unfold"], help: "edge point (along e1) aimed at by the continuation family" },
    KeySpec { key: "wedge.delta", ty: Ty::Float, default: "1e-3", kinds: &["wedge-unfold"], help: "largest side offset of the continuation family" },
    KeySpec { key: "wedge.halvings", ty: Ty::Int, default: "6", kinds: &["wedge-unfold"], help: "number of halvings of the offset" },
];

fn spec_of(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

/// Key reference printed by `nballs schema`.
pub fn schema() -> String {
    let mut s = String::from("# nballs experiment configuration: one `key = value` per line, `#` starts a comment\n");
    for k in KEYS {
        s += &format!("\n{} ({})\n    {}\n", k.key, k.ty.describe(), k.help);
        if !k.default.is_empty() {
            s += &format!("    default: {}\n", k.default);
        }
        if !k.kinds.is_empty() {
            s += &format!("    used by: {}\n", k.kinds.join(", "));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Value {
    Float(f64),
    Int(u64),
    FloatList(Vec<f64>),
    IntList(Vec<u64>),
    Text(String),
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_int(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    s.replace('_', "").parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn list<T>(s: &str, f: fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(f).collect()
}

fn parse_value(ty: Ty, raw: &str) -> std::result::Result<Value, String> {
    Ok(match ty {
        Ty::Float => Value::Float(parse_real(raw)?),
        // accept 1e5-style integers as long as they are exact
        Ty::Int => Value::Int(parse_int(raw).or_else(|e| {
            let x = parse_real(raw).map_err(|_| e.clone())?;
            if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
                Ok(x as u64)
            } else {
                Err(e)
            }
        })?),
        Ty::FloatList => Value::FloatList(list(raw, parse_real)?),
        Ty::IntList => Value::IntList(list(raw, parse_int)?),
        Ty::Text => Value::Text(raw.trim().to_string()),
        Ty::Choice(options) => {
            let v = raw.trim();
            if !options.contains(&v) {
                return Err(format!("expected one of {}, got `{v}`", options.join(", ")));
            }
            Value::Text(v.to_string())
        }
    })
}

/// Parsed, validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub masses: Vec<f64>,
    pub energy: Option<f64>,
    pub seeds: Vec<u64>,
    pub horizon: Option<Horizon>,
    pub output: PathBuf,
    pub jobs: usize,
    /// Every key given in the file, typed.
    pub values: BTreeMap<String, Value>,
    /// The configuration text as given.
    pub source: String,
}

struct Raw {
    line: usize,
    value: String,
}

impl ExperimentConfig {
    pub fn mass_config(&self) -> Result<MassConfig> {
        MassConfig::new(&self.masses, self.energy.unwrap_or(1.0))
    }

    /// SHA-256 of the configuration text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.source.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn horizon_events(&self) -> Result<u64> {
        match self.horizon {
            Some(Horizon::Events(n)) => Ok(n),
            Some(Horizon::Time(_)) => Err(Error::InvalidArgument(format!("{} needs horizon.events", self.kind))),
            None => Err(Error::MissingRequired("horizon".into())),
        }
    }

    fn get(&self, key: &str) -> Value {
        match self.values.get(key) {
            Some(v) => v.clone(),
            None => {
                let spec = spec_of(key).expect("known key");
                parse_value(spec.ty, spec.default).expect("valid default")
            }
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(x) => x,
            v => panic!("{key} is not a real: {v:?}"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(x) => x as usize,
            v => panic!("{key} is not an integer: {v:?}"),
        }
    }

    pub fn text(&self, key: &str) -> String {
        match self.get(key) {
            Value::Text(x) => x,
            v => panic!("{key} is not text: {v:?}"),
        }
    }

    pub fn window_mode(&self) -> WindowMode {
        if self.text("counts.mode") == "sliding" {
            WindowMode::Sliding
        } else {
            WindowMode::Tiled
        }
    }

    pub fn direction(&self) -> Direction {
        if self.text("sufficiency.direction") == "backward" {
            Direction::Backward
        } else {
            Direction::Forward
        }
    }
}

/// Parses and validates a configuration; the first problem is reported with its line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw: BTreeMap<String, Raw> = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Syntax { line: line_no, message: format!("expected `key = value`, got `{body}`") });
        };
        let key = key.trim().to_string();
        if spec_of(&key).is_none() {
            return Err(Error::UnknownKey { line: line_no, key });
        }
        if let Some(prev) = raw.get(&key) {
            return Err(Error::Syntax { line: line_no, message: format!("`{key}` already set on line {}", prev.line) });
        }
        raw.insert(key, Raw { line: line_no, value: value.trim().to_string() });
    }

    let mut values = BTreeMap::new();
    for (key, r) in &raw {
        let spec = spec_of(key).expect("checked above");
        let v = parse_value(spec.ty, &r.value).map_err(|message| Error::TypeMismatch { line: r.line, key: key.clone(), message })?;
        values.insert(key.clone(), v);
    }

    let kind: ExperimentKind = match values.get("kind") {
        Some(Value::Text(k)) => k.parse().map_err(|message| Error::TypeMismatch { line: raw["kind"].line, key: "kind".into(), message })?,
        _ => return Err(Error::MissingRequired("kind".into())),
    };
    for (key, r) in &raw {
        let spec = spec_of(key).expect("checked above");
        if !spec.kinds.is_empty() && !spec.kinds.contains(&kind.name()) {
            return Err(Error::TypeMismatch {
                line: r.line,
                key: key.clone(),
                message: format!("not used by `{kind}` (used by {})", spec.kinds.join(", ")),
            });
        }
    }
    let masses = match values.get("masses") {
        Some(Value::FloatList(m)) => m.clone(),
        _ => return Err(Error::MissingRequired("masses".into())),
    };
    let energy = match values.get("energy") {
        Some(Value::Float(e)) => Some(*e),
        _ if kind.needs_energy() => return Err(Error::MissingRequired("energy".into())),
        _ => None,
    };
    // masses and energy must form a valid configuration
    MassConfig::new(&masses, energy.unwrap_or(1.0))?;

    let seeds = match values.get("seeds") {
        Some(Value::IntList(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(Error::TypeMismatch { line: raw["seeds"].line, key: "seeds".into(), message: "empty seed list".into() }),
        None => {
            let count = match values.get("seeds.count") {
                Some(Value::Int(c)) => *c,
                _ => 1,
            };
            let base = match values.get("seeds.base") {
                Some(Value::Int(b)) => *b,
                _ => 0,
            };
            (base..base + count).collect()
        }
    };

    let events = [values.get("horizon"), values.get("horizon.events")];
    let horizon = match (events, values.get("horizon.time")) {
        ([Some(_), Some(_)], _) => {
            return Err(Error::Syntax { line: raw["horizon.events"].line, message: "both `horizon` and `horizon.events` given".into() })
        }
        ([Some(Value::Int(n)), None] | [None, Some(Value::Int(n))], None) => Some(Horizon::Events(*n)),
        ([None, None], Some(Value::Float(t))) => Some(Horizon::Time(*t)),
        ([None, None], None) => None,
        _ => return Err(Error::Syntax { line: raw["horizon.time"].line, message: "give the horizon either in events or in time".into() }),
    };
    if horizon.is_none() && kind.needs_horizon() {
        return Err(Error::MissingRequired("horizon".into()));
    }
    let output = match values.get("output") {
        Some(Value::Text(p)) => PathBuf::from(p),
        _ => PathBuf::from("out"),
    };
    let jobs = match values.get("jobs") {
        Some(Value::Int(j)) => *j as usize,
        _ => 0,
    };
    Ok(ExperimentConfig {
        kind,
        masses,
        energy,
        seeds,
        horizon,
        output,
        jobs,
        values,
        source: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let c = parse_config(
            "# heart probe\nkind = heart\nmasses = 2, 1, 3/7\nenergy = 6\nseeds.count = 16\nhorizon = 1e5  # events\n",
        )
        .unwrap();
        assert_eq!(c.kind, ExperimentKind::Heart);
        assert_eq!(c.masses, vec![2.0, 1.0, 3.0 / 7.0]);
        assert_eq!(c.seeds, (0..16).collect::<Vec<_>>());
        assert_eq!(c.horizon, Some(Horizon::Events(100_000)));
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn defaults_apply() {
        let c = parse_config("kind = tau\nmasses = 2,1\nenergy = 1\nseeds = 4, 9").unwrap();
        assert_eq!(c.seeds, vec![4, 9]);
        assert_eq!(c.float("tau.e0"), 1.0);
        assert_eq!(c.int("tau.cutoff"), 10_000);
        assert_eq!(c.output, PathBuf::from("out"));
    }

    #[test]
    fn errors_carry_lines() {
        assert!(matches!(parse_config("kind = simulate\nmass = 1"), Err(Error::UnknownKey { line: 2, .. })));
        assert!(matches!(
            parse_config("kind = simulate\nmasses = 3,2,1\nenergy = lots"),
            Err(Error::TypeMismatch { line: 3, .. })
        ));
        assert!(matches!(parse_config("kind = simulate\nmasses = 3,2,1\nhorizon = 10"), Err(Error::MissingRequired(k)) if k == "energy"));
        assert!(matches!(parse_config("masses = 3,2,1"), Err(Error::MissingRequired(k)) if k == "kind"));
        assert!(matches!(parse_config("kind = simulate\nmasses = 1,2\nenergy = 1\nhorizon = 5"), Err(Error::NonDecreasingMasses { .. })));
        assert!(matches!(parse_config("kind = simulate\nmasses 3,2"), Err(Error::Syntax { line: 2, .. })));
        assert!(matches!(
            parse_config("kind = heart\nmasses = 3,2,1\nenergy = 6\nhorizon = 10\ntau.e0 = 2"),
            Err(Error::TypeMismatch { line: 5, .. })
        ));
    }

    #[test]
    fn schema_lists_every_key() {
        let s = schema();
        for k in KEYS {
            assert!(s.contains(k.key));
        }
    }
}
