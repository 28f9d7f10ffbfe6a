//! Provenance stamping and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The fields every artifact carries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Self {
        Self { tool_version: TOOL_VERSION.to_string(), seed: cfg.seed, config_hash: cfg.hash() }
    }

    /// Leading `#` line for CSV artifacts; the readers skip it.
    pub fn csv_comment(&self) -> String {
        format!("# tool_version={} seed={} config_hash={}\n", self.tool_version, self.seed, self.config_hash)
    }

    /// `payload` as a JSON object with the provenance fields merged in.
    pub fn stamp<T: Serialize>(&self, kind: &str, payload: &T) -> CliResult<Map<String, Value>> {
        let mut obj = match serde_json::to_value(payload)? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        obj.insert("kind".into(), Value::from(kind));
        obj.insert("tool_version".into(), Value::from(self.tool_version.clone()));
        obj.insert("seed".into(), Value::from(self.seed));
        obj.insert("config_hash".into(), Value::from(self.config_hash.clone()));
        Ok(obj)
    }

    pub fn json_document<T: Serialize>(&self, kind: &str, payload: &T) -> CliResult<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(&self.stamp(kind, payload)?)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn jsonl_line<T: Serialize>(&self, kind: &str, payload: &T) -> CliResult<String> {
        Ok(serde_json::to_string(&self.stamp(kind, payload)?)? + "\n")
    }

    /// CSV artifact: the provenance comment then header and rows.
    pub fn csv_document(&self, header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
        let mut out = self.csv_comment().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.partial", std::process::id()))
}

/// Write every file to a temporary sibling first and rename only once all
/// of them are on disk, so a failure leaves no partial output behind.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> CliResult<()> {
    let mut staged: Vec<(PathBuf, &Path)> = Vec::with_capacity(files.len());
    let result = (|| -> CliResult<()> {
        for (path, bytes) in files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).context(parent.display().to_string())?;
            }
            let tmp = temp_path(path);
            let mut f = fs::File::create(&tmp).context(tmp.display().to_string())?;
            f.write_all(bytes).context(tmp.display().to_string())?;
            f.sync_all().context(tmp.display().to_string())?;
            staged.push((tmp, path.as_path()));
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    for (tmp, path) in &staged {
        fs::rename(tmp, path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: Vec<u8>) -> CliResult<()> {
    write_all_atomic(&[(path.to_path_buf(), bytes)])
}

/// Round to 9 significant digits so JSON diffs stay stable across
/// platforms with different last-bit float behaviour.
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}
