use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nballs(dir: &Path, args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nballs"));
    cmd.current_dir(dir).args(args).env_remove("NBALLS_OUTPUT");
    if let Some(p) = env_out {
        cmd.env("NBALLS_OUTPUT", p);
    }
    cmd.output().expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn schema_lists_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = nballs(dir.path(), &["schema"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["kind", "masses", "energy", "seeds.count", "horizon.events", "tau.e0", "counts.window", "jobs"] {
        assert!(text.contains(key), "schema lacks {key}");
    }
}

#[test]
fn validate_reports_errors_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_cfg(dir.path(), "good.cfg", "kind = simulate\nmasses = 3,2,1\nenergy = 6\nhorizon = 10\n");
    assert_eq!(nballs(dir.path(), &["validate", &good], None).status.code(), Some(0));

    let bad = write_cfg(dir.path(), "bad.cfg", "kind = simulate\nmasses = 3,2,1\nenergy = 6\nhorizon = 10\nwindow = 2\n");
    let o = nballs(dir.path(), &["validate", &bad], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 5") && err.contains("window"), "{err}");

    let order = write_cfg(dir.path(), "order.cfg", "kind = simulate\nmasses = 1,2\nenergy = 6\nhorizon = 10\n");
    assert_eq!(nballs(dir.path(), &["validate", &order], None).status.code(), Some(2));
    let missing = write_cfg(dir.path(), "missing.cfg", "kind = simulate\nmasses = 3,2,1\nhorizon = 10\n");
    let o = nballs(dir.path(), &["run", &missing], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("energy"));
    assert_eq!(nballs(dir.path(), &["run", "nope.cfg"], None).status.code(), Some(2));
    assert_eq!(nballs(dir.path(), &["frobnicate"], None).status.code(), Some(2));
}

#[test]
fn zero_horizon_gives_an_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "sim.cfg", "kind = simulate\nmasses = 3,2,1\nenergy = 6\nhorizon = 0\noutput = res\n");
    let o = nballs(dir.path(), &["run", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    let events = fs::read_to_string(dir.path().join("res/events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 1, "header only");
    let header: serde_json::Value = serde_json::from_str(events.lines().next().unwrap()).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("res/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    assert_eq!(header["config_hash"], report["config_hash"]);
    assert_eq!(report["config"], fs::read_to_string(dir.path().join("sim.cfg")).unwrap());
    assert!(header["version"].as_str().unwrap().starts_with("nballs"));
}

#[test]
fn output_root_can_be_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let alt = dir.path().join("elsewhere");
    let cfg = write_cfg(dir.path(), "sim.cfg", "kind = simulate\nmasses = 2,1\nenergy = 1\nhorizon = 5\nseeds.count = 2\n");
    assert_eq!(nballs(dir.path(), &["run", &cfg], Some(&alt)).status.code(), Some(0));
    assert!(alt.join("report.json").exists());
    assert!(alt.join("events/seed-1.jsonl").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn red_flag_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tau.cfg", "kind = tau\nmasses = 2,1\nenergy = 1\ntau.e0 = 1e300\ntau.cutoff = 20\nseeds = 3\n");
    let o = nballs(dir.path(), &["run", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "red-flag");
    assert_eq!(report["red_flags"][0]["code"], "tau-exceeded");
    assert_eq!(report["red_flags"][0]["witness"]["seed"], 3);
}

#[test]
fn identity_check_writes_residuals_per_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "id.cfg",
        "kind = identity-check\nmasses = 3,2,1\nenergy = 6\nhorizon = 5000\nidentity.intervals = 20\n",
    );
    assert_eq!(nballs(dir.path(), &["run", &cfg], None).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/tables/residuals.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# nballs"));
    assert_eq!(lines.next().unwrap(), "seed,variant,t1,t2,lhs,rhs,residual,lower,upper,returns");
    assert!(lines.count() >= 40);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let body = "kind = heart\nmasses = 3,2,1\nenergy = 6\nseeds.count = 3\nhorizon = 3000\n";
    let mut snaps = Vec::new();
    for (k, jobs) in [1, 3, 1].into_iter().enumerate() {
        // `jobs` is part of the hashed text, so different thread counts are compared on results only
        let cfg = write_cfg(dir.path(), "h.cfg", &format!("{body}jobs = {jobs}\n"));
        let out = dir.path().join(format!("run{k}"));
        assert_eq!(nballs(dir.path(), &["run", &cfg], Some(&out)).status.code(), Some(0));
        snaps.push(snapshot(&out));
    }
    assert_eq!(snaps[0], snaps[2], "identical config must give identical bytes");
    let report = |s: &BTreeMap<String, Vec<u8>>| {
        let mut v: serde_json::Value = serde_json::from_slice(&s["report.json"]).unwrap();
        v.as_object_mut().unwrap().retain(|k, _| k == "result" || k == "red_flags");
        v
    };
    assert_eq!(report(&snaps[0]), report(&snaps[1]), "thread count must not change results");
}
