use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use camp_core::codesign::{sweep_grid, DesignPoint, ParamValue};
use camp_core::report::{to_canonical_json, Provenance};
use clap::Args;
use serde::Serialize;
use serde_json::Value;

use crate::config::load_space;
use crate::error::{Classify, CmdResult};
use crate::output::{read_input, sorted_subdirs, write_atomic, ProvenanceBuilder, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Parameter space (TOML with a [params] table of value lists).
    #[arg(long)]
    pub space: PathBuf,
    /// Runs directory checked for results; a missing directory counts as empty.
    #[arg(long)]
    pub runs: PathBuf,
    /// Also write the sweep manifest to this file.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PointEntry {
    id: String,
    params: BTreeMap<String, ParamValue>,
    present: bool,
    /// Run directory holding this point's results, relative to the runs dir.
    run_dir: Option<String>,
}

#[derive(Serialize)]
struct SweepManifest {
    schema_version: u32,
    n_points: usize,
    n_present: usize,
    complete: bool,
    checklist: String,
    points: Vec<PointEntry>,
    provenance: Provenance,
}

/// A finished run as seen from its metrics.json.
struct RunInfo {
    dir_name: String,
    run_id: Option<String>,
    config: serde_json::Map<String, Value>,
}

fn scan_runs(runs: &Path) -> CmdResult<Vec<RunInfo>> {
    if !runs.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for dir in sorted_subdirs(runs)? {
        let mpath = dir.join("metrics.json");
        if !mpath.is_file() {
            continue;
        }
        let v: Value = serde_json::from_slice(&read_input(&mpath)?)
            .map_err(|e| anyhow::anyhow!("{}: {e}", mpath.display()))
            .invalid()?;
        out.push(RunInfo {
            dir_name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            run_id: v.get("run_id").and_then(Value::as_str).map(str::to_string),
            config: match v.get("config") {
                Some(Value::Object(m)) => m.clone(),
                _ => Default::default(),
            },
        });
    }
    Ok(out)
}

fn same_value(p: &ParamValue, v: &Value) -> bool {
    match (p, v) {
        (ParamValue::Text(s), Value::String(t)) => s == t,
        (ParamValue::Text(_), _) | (_, Value::String(_)) => false,
        (p, Value::Number(n)) => p.as_f64() == n.as_f64(),
        _ => false,
    }
}

fn matches(p: &DesignPoint, run: &RunInfo) -> bool {
    if run.dir_name == p.id || run.run_id.as_deref() == Some(p.id.as_str()) {
        return true;
    }
    let coords = p.coordinates();
    !coords.is_empty()
        && coords
            .iter()
            .all(|(k, v)| run.config.get(k).is_some_and(|c| same_value(v, c)))
}

pub fn run(args: &SweepArgs) -> CmdResult {
    let bytes = read_input(&args.space)?;
    let space = load_space(&args.space, &String::from_utf8_lossy(&bytes)).invalid()?;
    let points = sweep_grid(&space).invalid()?;
    let runs = scan_runs(&args.runs)?;

    let entries: Vec<PointEntry> = points
        .iter()
        .map(|p| {
            let hit = runs.iter().find(|r| matches(p, r));
            PointEntry {
                id: p.id.clone(),
                params: p
                    .coordinates()
                    .into_iter()
                    .map(|(k, v)| (k, v.clone()))
                    .collect(),
                present: hit.is_some(),
                run_dir: hit.map(|r| r.dir_name.clone()),
            }
        })
        .collect();
    let n_present = entries.iter().filter(|e| e.present).count();
    let mut prov = ProvenanceBuilder::new();
    prov.input("space", &bytes);
    let manifest = SweepManifest {
        schema_version: SCHEMA_VERSION,
        n_points: entries.len(),
        n_present,
        complete: n_present == entries.len(),
        checklist: format!("{n_present}/{} complete", entries.len()),
        points: entries,
        provenance: prov.build(),
    };
    let text = to_canonical_json(&manifest).internal()?;
    if let Some(out) = &args.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    eprintln!("{}", manifest.checklist);
    Ok(())
}
