use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use camp_core::codesign::{
    canonical_path, feasibility_filter, pareto_front, ConstraintSet, DesignPoint, Objective,
    ObjectiveSpec, ParamValue,
};
use camp_core::report::{format_sig17, Provenance};
use clap::Args;
use serde::Serialize;
use serde_json::Value;

use crate::config::load_constraints;
use crate::error::{Classify, CmdResult, Failure};
use crate::output::{
    provenance_lines, read_input, sorted_subdirs, write_atomic, write_json, ProvenanceBuilder,
    SCHEMA_VERSION,
};
use crate::svg::{Plot, Series, Style, PALETTE};

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Directory with one subdirectory per run, each holding metrics.json and
    /// optionally quality.json.
    #[arg(long)]
    pub runs: PathBuf,
    /// Comma-separated objectives; `name:max` maximises.
    #[arg(long, default_value = "tc,ec,cc,dq")]
    pub objectives: String,
    /// Constraints (TOML). Without it every point is feasible.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Output directory.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

/// Quality record keys and the value names they are stored under.
const QUALITY_KEYS: &[(&str, &str)] = &[
    ("B1_rms_dirty", "rms_dirty"),
    ("B2_psnr_db", "psnr"),
    ("B2_ssim", "ssim"),
    ("B3_dynamic_range", "dynamic_range"),
    ("B4_astrometric_error", "astrometric_error"),
];

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if s == "+inf" => Some(f64::INFINITY),
        _ => None,
    }
}

fn param(v: &Value) -> Option<ParamValue> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(ParamValue::Int)
            .or_else(|| n.as_f64().map(ParamValue::Float)),
        Value::String(s) => Some(ParamValue::Text(s.clone())),
        Value::Bool(b) => Some(ParamValue::Text(b.to_string())),
        _ => None,
    }
}

fn parse_json(path: &Path, bytes: &[u8]) -> CmdResult<Value> {
    serde_json::from_slice(bytes)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .invalid()
}

/// Builds a design point from a run directory's reports.
fn load_point(dir: &Path, prov: &mut ProvenanceBuilder) -> CmdResult<DesignPoint> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mpath = dir.join("metrics.json");
    let bytes = read_input(&mpath)?;
    prov.input(format!("run:{name}/metrics.json"), &bytes);
    let m = parse_json(&mpath, &bytes)?;

    let id = m
        .get("run_id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .unwrap_or(&name);
    let mut p = DesignPoint::new(id);
    if let Some(Value::Object(cfg)) = m.get("config") {
        for (k, v) in cfg {
            let Some(pv) = param(v) else { continue };
            match k.split_once('.') {
                Some(("hw", n)) => p.hw_params.insert(n.to_string(), pv),
                Some(("sys", n)) => p.sys_params.insert(n.to_string(), pv),
                Some(("algo", n)) => p.algo_params.insert(n.to_string(), pv),
                _ => p.algo_params.insert(k.clone(), pv),
            };
        }
    }
    for section in ["metrics", "carbon", "econ"] {
        if let Some(Value::Object(obj)) = m.get(section) {
            for (k, v) in obj {
                if let Some(x) = number(v) {
                    p.values.insert(k.clone(), x);
                }
            }
        }
    }

    let qpath = dir.join("quality.json");
    if qpath.is_file() {
        let bytes = read_input(&qpath)?;
        prov.input(format!("run:{name}/quality.json"), &bytes);
        let q = parse_json(&qpath, &bytes)?;
        if let Some(Value::Object(rec)) = q.get("quality") {
            for (key, value_name) in QUALITY_KEYS {
                if let Some(x) = rec.get(*key).and_then(number) {
                    p.values.insert(value_name.to_string(), x);
                }
            }
        }
        if let Some(x) = q.get("delta_q").and_then(number) {
            p.values.insert("delta_q".into(), x);
        }
    }
    Ok(p)
}

#[derive(Serialize)]
struct Reason {
    id: String,
    reasons: Vec<String>,
}

#[derive(Serialize)]
struct FeasibilityReport<'a> {
    schema_version: u32,
    status: &'static str,
    objectives: &'a [Objective],
    constraints: &'a ConstraintSet,
    n_points: usize,
    feasible: Vec<String>,
    rejected: Vec<Reason>,
    /// Feasible points lacking a selected objective value.
    excluded: Vec<Reason>,
    provenance: &'a Provenance,
}

#[derive(Serialize)]
struct Member {
    id: String,
    values: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Pair {
    id: String,
    by: String,
}

#[derive(Serialize)]
struct FrontReport<'a> {
    schema_version: u32,
    objectives: &'a [Objective],
    members: Vec<Member>,
    dominated: Vec<Pair>,
    duplicates: Vec<Pair>,
    provenance: &'a Provenance,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run(args: &ParetoArgs) -> CmdResult {
    let spec = ObjectiveSpec::parse_list(&args.objectives).invalid()?;
    let mut prov = ProvenanceBuilder::new();
    let constraints = match &args.constraints {
        Some(path) => {
            let bytes = read_input(path)?;
            prov.input("constraints", &bytes);
            load_constraints(path, &String::from_utf8_lossy(&bytes)).invalid()?
        }
        None => ConstraintSet::default(),
    };

    let dirs = sorted_subdirs(&args.runs)?;
    if dirs.is_empty() {
        return crate::error::invalid(format!("{}: no run directories", args.runs.display()));
    }
    let points = dirs
        .iter()
        .map(|d| load_point(d, &mut prov))
        .collect::<CmdResult<Vec<_>>>()?;
    prov.config("objectives", &spec.objectives);

    let (feasible, rejected) = feasibility_filter(&points, &constraints);
    let mut ranked: Vec<DesignPoint> = Vec::new();
    let mut excluded = Vec::new();
    for p in feasible {
        match spec.cost_vector(p) {
            Ok(_) => ranked.push(p.clone()),
            Err(e) => excluded.push(Reason {
                id: p.id.clone(),
                reasons: vec![e.to_string()],
            }),
        }
    }
    let provenance = prov.build();
    let empty = ranked.is_empty();
    let feas = FeasibilityReport {
        schema_version: SCHEMA_VERSION,
        status: if empty { "empty feasible set" } else { "ok" },
        objectives: &spec.objectives,
        constraints: &constraints,
        n_points: points.len(),
        feasible: ranked.iter().map(|p| p.id.clone()).collect(),
        rejected: rejected
            .iter()
            .map(|r| Reason {
                id: r.id.clone(),
                reasons: r.reasons.clone(),
            })
            .collect(),
        excluded,
        provenance: &provenance,
    };
    write_json(&args.out.join("feasibility.json"), &feas)?;
    if empty {
        return Err(Failure::EmptyFeasible {
            rejected: feas.rejected.len(),
            excluded: feas.excluded.len(),
        });
    }

    let front = pareto_front(&ranked, &spec).invalid()?;
    let by_id: BTreeMap<&str, &DesignPoint> = ranked.iter().map(|p| (p.id.as_str(), p)).collect();
    let paths: Vec<&str> = spec.objectives.iter().map(|o| o.path.as_str()).collect();
    let raw = |p: &DesignPoint, path: &str| p.value(path).unwrap_or(f64::NAN);

    let members: Vec<Member> = front
        .members
        .iter()
        .map(|id| Member {
            id: id.clone(),
            values: paths
                .iter()
                .map(|&k| (k.to_string(), raw(by_id[id.as_str()], k)))
                .collect(),
        })
        .collect();
    let pairs = |v: &[(String, String)]| {
        v.iter()
            .map(|(id, by)| Pair {
                id: id.clone(),
                by: by.clone(),
            })
            .collect()
    };
    write_json(
        &args.out.join("front.json"),
        &FrontReport {
            schema_version: SCHEMA_VERSION,
            objectives: &spec.objectives,
            members,
            dominated: pairs(&front.dominated),
            duplicates: pairs(&front.duplicates),
            provenance: &provenance,
        },
    )?;

    let mut csv = provenance_lines(&provenance, "# ");
    csv.push_str("id");
    for k in &paths {
        csv.push(',');
        csv.push_str(&csv_field(k));
    }
    csv.push('\n');
    for id in &front.members {
        csv.push_str(&csv_field(id));
        for k in &paths {
            csv.push(',');
            csv.push_str(&format_sig17(raw(by_id[id.as_str()], k)));
        }
        csv.push('\n');
    }
    write_atomic(&args.out.join("front.csv"), csv.as_bytes())?;

    let on_front: std::collections::HashSet<&str> =
        front.members.iter().map(String::as_str).collect();
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            let (a, b) = (paths[i], paths[j]);
            let xy = |p: &DesignPoint| (raw(p, a), raw(p, b));
            let mut front_pts: Vec<(f64, f64)> = ranked
                .iter()
                .filter(|p| on_front.contains(p.id.as_str()))
                .map(xy)
                .collect();
            front_pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
            let plot = Plot {
                title: format!("Pareto front projection: {a} vs {b}"),
                x_label: canonical_path(a).to_string(),
                y_label: canonical_path(b).to_string(),
                series: vec![
                    Series {
                        label: "feasible".into(),
                        points: ranked.iter().map(xy).collect(),
                        style: Style::Markers,
                        color: PALETTE[5],
                    },
                    Series {
                        label: "front".into(),
                        points: front_pts,
                        style: Style::LineMarkers,
                        color: PALETTE[1],
                    },
                ],
                hlines: vec![],
                vlines: vec![],
                metadata: provenance_lines(&provenance, ""),
            };
            let name = format!("front_{}_{}.svg", file_safe(a), file_safe(b));
            write_atomic(&args.out.join(name), plot.render().as_bytes())?;
        }
    }
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}
