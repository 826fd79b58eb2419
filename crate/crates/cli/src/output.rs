//! Output encoding and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Version of the JSON report and metadata layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance record written next to every output file.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub wall_seconds: f64,
    pub finished_unix_seconds: u64,
    /// Command-specific summary such as a fitted rate.
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, config: Value, wall_seconds: f64, summary: Value) -> Self {
        let finished_unix_seconds = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            wall_seconds,
            finished_unix_seconds,
            summary,
        }
    }
}

/// Sidecar path `<output>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `bytes` to a temporary file in the target directory and renames
/// it over `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e| CliError::io(path.display().to_string(), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Emits `bytes` to `path` plus its sidecar, or to standard output.
pub fn emit(path: Option<&Path>, bytes: &[u8], meta: &Metadata) -> CliResult<()> {
    match path {
        Some(path) => {
            write_atomic(path, bytes)?;
            let mut sidecar = serde_json::to_vec_pretty(meta)?;
            sidecar.push(b'\n');
            write_atomic(&sidecar_path(path), &sidecar)
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

/// CSV with the given header; floats use the shortest representation that
/// parses back to the same value.
pub fn csv_table<R>(header: &[String], rows: R) -> CliResult<Vec<u8>>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))
}

/// JSON report `{schema_version, command, config, ...body}`.
pub fn json_report(command: &str, config: &Value, body: impl Serialize) -> CliResult<Vec<u8>> {
    let mut report = serde_json::Map::new();
    report.insert("schema_version".into(), SCHEMA_VERSION.into());
    report.insert("command".into(), command.into());
    report.insert("config".into(), config.clone());
    match serde_json::to_value(body)? {
        Value::Object(fields) => report.extend(fields),
        other => {
            report.insert("result".into(), other);
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(report))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn float(v: f64) -> String {
    // `Display` for f64 is the shortest round-trip representation
    format!("{v}")
}
