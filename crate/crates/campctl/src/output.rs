//! Output helpers: atomic writes and provenance blocks.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use camp_core::report::{format_sig17, sha256_hex, to_canonical_json, Provenance};
use serde_json::Value;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{Classify, CmdResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes through a temp file in the same directory, then renames, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .internal()?;
    let mut tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("temp file in {}", dir.display()))
        .internal()?;
    tmp.write_all(bytes).internal()?;
    tmp.as_file().sync_all().internal()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))
        .internal()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = to_canonical_json(value).internal()?;
    write_atomic(path, text.as_bytes())
}

/// Reads an input file, failing as a validation error.
pub fn read_input(path: &Path) -> CmdResult<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .invalid()
}

pub struct ProvenanceBuilder {
    inner: Provenance,
}

impl ProvenanceBuilder {
    pub fn new() -> Self {
        Self {
            inner: Provenance {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                ..Default::default()
            },
        }
    }

    pub fn input(&mut self, label: impl Into<String>, bytes: &[u8]) -> &mut Self {
        self.inner.inputs.insert(label.into(), sha256_hex(bytes));
        self
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.inner.config.insert(key.to_string(), v);
        self
    }

    pub fn build(&self) -> Provenance {
        self.inner.clone()
    }
}

/// Provenance as `#` comment lines for CSV and Markdown outputs.
pub fn provenance_lines(p: &Provenance, prefix: &str) -> String {
    let mut out = format!("{prefix}tool={} version={}\n", p.tool, p.version);
    for (k, v) in &p.inputs {
        out.push_str(&format!("{prefix}input {k} sha256={v}\n"));
    }
    let config: BTreeMap<&String, String> =
        p.config.iter().map(|(k, v)| (k, compact(v))).collect();
    for (k, v) in config {
        out.push_str(&format!("{prefix}config {k}={v}\n"));
    }
    out
}

/// One-line JSON with numbers in the same 17-digit form as the reports.
fn compact(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_sig17(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => format!("[{}]", a.iter().map(compact).collect::<Vec<_>>().join(",")),
        Value::Object(o) => format!(
            "{{{}}}",
            o.iter()
                .map(|(k, v)| format!("{}:{}", Value::String(k.clone()), compact(v)))
                .collect::<Vec<_>>()
                .join(",")
        ),
        other => other.to_string(),
    }
}

/// Subdirectories of `dir` in name order.
pub fn sorted_subdirs(dir: &Path) -> CmdResult<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir)
        .with_context(|| format!("reading runs directory {}", dir.display()))
        .invalid()?
    {
        let entry = entry.invalid()?;
        if entry.file_type().invalid()?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}
