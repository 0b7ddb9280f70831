//! Output files and where they land.
//!
//! Numbers are written with Rust's shortest round-trip `Display`, lines end
//! in `\n`, and nothing run-dependent (timestamps, worker counts, paths) goes
//! into a file, so equal configs give byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::{CliError, Result};

/// Files produced by one command, plus an error to report once they are
/// written (a failed certificate is still worth keeping on disk).
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub failure: Option<CliError>,
}

impl Outputs {
    pub fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

/// Settings that affect results; the `output` section does not.
fn embedded(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    cfg.resolved()
        .into_iter()
        .filter(|(k, _)| !k.starts_with("output."))
        .collect()
}

/// Resolved config as a JSON object keyed `section.key`.
pub fn config_json(cfg: &ExperimentConfig) -> Value {
    Value::Object(
        embedded(cfg)
            .into_iter()
            .map(|(k, v)| (k, Value::String(v)))
            .collect(),
    )
}

pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values always serialize");
    bytes.push(b'\n');
    bytes
}

/// CSV with the resolved config as leading `# key = value` comment lines.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(cfg: &ExperimentConfig, header: &[String]) -> Self {
        let mut text = String::new();
        for (k, v) in embedded(cfg) {
            text.push_str(&format!("# {k} = {v}\n"));
        }
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn comment(&mut self, key: &str, value: impl std::fmt::Display) {
        self.text.push_str(&format!("# {key} = {value}\n"));
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Where a run writes: `base` itself with `overwrite`, otherwise a fresh
/// `base/run-<UTC timestamp>` directory (suffixed `-2`, `-3`, ... if taken).
pub fn run_directory(base: &Path, overwrite: bool) -> Result<PathBuf> {
    if overwrite {
        fs::create_dir_all(base)?;
        return Ok(base.to_path_buf());
    }
    fs::create_dir_all(base)?;
    let stamp = chrono::Utc::now().format("run-%Y%m%dT%H%M%SZ").to_string();
    for k in 1u32.. {
        let dir = if k == 1 {
            base.join(&stamp)
        } else {
            base.join(format!("{stamp}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Io(e)),
        }
    }
    unreachable!("u32 suffixes exhausted")
}

/// Writes every file into `dir`.
pub fn write_files(dir: &Path, outputs: &Outputs) -> Result<()> {
    for (name, bytes) in &outputs.files {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}
