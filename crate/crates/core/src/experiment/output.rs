use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::jsonl::VERSION;

use super::config::ExperimentConfig;

/// Overrides the `output` key when set.
pub const OUTPUT_ENV: &str = "NBALLS_OUTPUT";

pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => cfg.output.clone(),
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Real in CSV cells.
pub(crate) fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) struct Artifacts {
    pub dir: PathBuf,
    pub hash: String,
    seeds: String,
}

impl Artifacts {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let seeds = cfg.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
        Artifacts { dir: output_dir(cfg), hash: cfg.hash(), seeds }
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    /// `tables/<name>.csv` with a `#` provenance line, a column line and rows.
    pub fn table(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut s = format!("# {VERSION} config={} seeds={}\n", self.hash, self.seeds);
        s += &columns.join(",");
        s.push('\n');
        for r in rows {
            s += &r.join(",");
            s.push('\n');
        }
        self.write(&format!("tables/{name}.csv"), s.as_bytes()).map(|_| ())
    }
}
