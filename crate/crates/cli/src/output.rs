//! Atomic file output, CSV formatting and run manifests.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| {
        CliError::Io(format!(
            "cannot create temporary file in {}: {e}",
            dir.display()
        ))
    })?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot move output to {}: {e}", path.display())))?;
    Ok(())
}

/// CSV text with a single header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Shortest representation that reads back to the same value, in
/// scientific notation for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && !(1e-4..1e6).contains(&m) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Time in seconds with femtosecond resolution over the simulated span.
pub fn seconds(t: f64) -> String {
    format!("{t:.15e}")
}

pub fn flag(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_digest: String,
    seed: u64,
    tool_version: &'a str,
    outputs: Vec<OutputEntry>,
    wall_clock_s: f64,
}

/// Collects outputs of one command and writes its manifest.
pub struct Run {
    command: &'static str,
    config_digest: String,
    seed: u64,
    started: std::time::Instant,
    outputs: Vec<OutputEntry>,
}

impl Run {
    pub fn new(command: &'static str, canonical_config: &str, seed: u64) -> Self {
        Run {
            command,
            config_digest: sha256_hex(canonical_config.as_bytes()),
            seed,
            started: std::time::Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.outputs.push(OutputEntry {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    pub fn finish(self, manifest_path: &Path) -> Result<(), CliError> {
        let manifest = Manifest {
            command: self.command,
            config_digest: self.config_digest,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            outputs: self.outputs,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        write_atomic(manifest_path, text.as_bytes())
    }
}

/// Manifest path for a single-file output: `out.csv` → `out.manifest.json`.
pub fn manifest_beside(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}
