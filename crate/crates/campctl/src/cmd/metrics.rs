use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use camp_core::econ::{
    carbon_efficiency, carbon_to_solution, carbon_to_solution_traced, econ_vector,
    embodied_share, AssetModel, CarbonIntensity, SiteProfile,
};
use camp_core::metrics::{compute_metric_vector, MetricVector};
use camp_core::report::{CarbonRecord, EconRecord, Maybe, MetricRecord, Provenance};
use camp_core::trace::{PowerSource, RunManifest, GAP_FACTOR};
use clap::Args;
use serde::Serialize;

use crate::error::{Classify, CmdResult};
use crate::output::{
    provenance_lines, read_input, write_atomic, write_json, ProvenanceBuilder, SCHEMA_VERSION,
};
use crate::svg::{Plot, RefLine, Series, Style, PALETTE};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Run manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Site profile JSON (carbon intensity, electricity price, power cap).
    #[arg(long)]
    pub site: PathBuf,
    /// Asset model JSON (CAPEX, embodied carbon, lifetime).
    #[arg(long)]
    pub asset: PathBuf,
    /// Output directory.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

/// Contents of `metrics.json`.
#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub run_id: String,
    pub platform: String,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub metrics: MetricRecord,
    pub carbon: CarbonRecord,
    pub econ: EconRecord,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

pub fn strict_mode() -> bool {
    std::env::var("CAMPCTL_STRICT").is_ok_and(|v| v == "1")
}

pub fn run(args: &MetricsArgs) -> CmdResult {
    let strict = strict_mode();
    let mut prov = ProvenanceBuilder::new();

    let manifest_bytes = read_input(&args.manifest)?;
    let manifest = RunManifest::from_json(
        &args.manifest.display().to_string(),
        &String::from_utf8_lossy(&manifest_bytes),
    )
    .invalid()?;
    prov.input("manifest", &manifest_bytes);
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    for r in &manifest.traces {
        let bytes = read_input(&base.join(&r.path))?;
        prov.input(format!("trace:{}", r.path.display()), &bytes);
    }
    let traces = manifest.load_traces(base).invalid()?;
    let gaps = traces.check_gaps(strict).invalid()?;

    let site_bytes = read_input(&args.site)?;
    prov.input("site", &site_bytes);
    let site = SiteProfile::load(&args.site).invalid()?;
    if let Some(series) = series_path(&site_bytes) {
        let p = args.site.parent().unwrap_or(Path::new(".")).join(series);
        prov.input("carbon_series", &read_input(&p)?);
    }
    let asset_bytes = read_input(&args.asset)?;
    prov.input("asset", &asset_bytes);
    let asset = AssetModel::load(&args.asset).invalid()?;

    let mv = compute_metric_vector(&manifest, &traces).invalid()?;
    let window = manifest.window().invalid()?;
    let frac = manifest.resource_fraction;

    // operational carbon: segment-wise from the PDU traces when the intensity
    // varies in time, otherwise uniform over the window
    let pdu: Vec<_> = traces
        .power
        .iter()
        .filter(|(_, t)| *t.source() == PowerSource::Pdu)
        .collect();
    let c_c = match (&site.carbon, pdu.is_empty()) {
        (CarbonIntensity::Series(_), false) => {
            let mut sum = 0.0;
            for (_, tr) in &pdu {
                sum += carbon_to_solution_traced(tr, frac, &site.carbon, window).invalid()?;
            }
            sum
        }
        _ => carbon_to_solution(mv.e_c, &site.carbon, window).invalid()?,
    };
    let eta_c = carbon_efficiency(mv.n_items, c_c).ok();
    let embodied = embodied_share(&asset, mv.t_c, frac);
    let carbon = CarbonRecord {
        region: site.region.clone(),
        kg_per_kwh_mean: site.carbon.mean_over(window).invalid()?,
        C1_cc_kg: c_c,
        C2_eta_c_items_kg: eta_c.into(),
        C2_eta_c_items_g: eta_c.map(|e| e / 1e3).into(),
        embodied_kg: embodied,
        total_kg: c_c + embodied,
    };
    let econ = econ_vector(mv.e_c, &site, &asset, mv.t_c, frac, mv.n_items).invalid()?;

    let mut warnings = Vec::new();
    for (path, g) in &gaps {
        let rel = path.strip_prefix(base).unwrap_or(path);
        warnings.push(format!(
            "trace {}: gap of {} s at t={} exceeds {}x the median interval {} s",
            rel.display(),
            g.width,
            g.at,
            GAP_FACTOR,
            g.median
        ));
    }
    if mv.b_mem.is_none() {
        warnings.push("bytes_moved absent: A6 reported as n/a".into());
    }
    if mv.decomposition.is_none() {
        warnings.push(
            "static/dynamic split needs a PDU trace, a CPU or GPU trace and an idle spec".into(),
        );
    }

    prov.config("strict", strict)
        .config("site_label", &site.label)
        .config("gap_factor", GAP_FACTOR);
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        run_id: manifest.run_id.clone(),
        platform: manifest.platform.clone(),
        config: manifest.config.clone(),
        metrics: MetricRecord::from(&mv),
        carbon,
        econ: EconRecord::new(&econ, site.price_per_kwh),
        warnings,
        provenance: prov.build(),
    };

    write_json(&args.out.join("metrics.json"), &report)?;
    write_atomic(
        &args.out.join("report.md"),
        markdown(&report, &mv, &site).as_bytes(),
    )?;
    for (i, (path, tr)) in traces.power.iter().enumerate() {
        let rel = path.strip_prefix(base).unwrap_or(path).display().to_string();
        let t0 = manifest.t_start_s;
        let plot = Plot {
            title: format!("{} power: {}", tr.source(), manifest.run_id),
            x_label: format!("time since run start (s) [{rel}]"),
            y_label: "power (W)".into(),
            series: vec![Series {
                label: tr.source().to_string(),
                points: tr.samples().iter().map(|s| (s.t - t0, s.value)).collect(),
                style: Style::Line,
                color: PALETTE[i % PALETTE.len()],
            }],
            hlines: vec![],
            vlines: vec![
                RefLine {
                    label: "run start".into(),
                    at: 0.0,
                    color: PALETTE[5],
                },
                RefLine {
                    label: "run end".into(),
                    at: manifest.t_end_s - t0,
                    color: PALETTE[5],
                },
            ],
            metadata: provenance_lines(&report.provenance, ""),
        };
        let name = format!("power_{i:02}_{}.svg", file_safe(&tr.source().to_string()));
        write_atomic(&args.out.join(name), plot.render().as_bytes())?;
    }
    Ok(())
}

fn series_path(site_json: &[u8]) -> Option<String> {
    let v: serde_json::Value = serde_json::from_slice(site_json).ok()?;
    v.get("carbon")?
        .get("series_csv_path")?
        .as_str()
        .map(str::to_string)
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn opt<T: std::fmt::Display>(m: &Maybe<T>) -> String {
    match &m.0 {
        Some(v) => v.to_string(),
        None => "n/a".into(),
    }
}

fn markdown(r: &MetricsReport, mv: &MetricVector, site: &SiteProfile) -> String {
    let m = &r.metrics;
    let mut s = String::new();
    let _ = writeln!(s, "# Run {}\n", r.run_id);
    if !r.platform.is_empty() {
        let _ = writeln!(s, "Platform: {}\n", r.platform);
    }
    let _ = writeln!(s, "## Performance and energy\n");
    let _ = writeln!(s, "| metric | value |\n|---|---|");
    let rows = [
        ("A1 time-to-solution (s)", m.A1_tc_s.to_string()),
        ("A2 energy-to-solution (J)", m.A2_ec_j.to_string()),
        (
            "A3 throughput (items/s)",
            format!("{} ({} {}/h x 1e6)", m.A3_theta_items_s, mv.theta * 3600.0 / 1e6, mv.unit),
        ),
        ("A4 energy efficiency (items/J)", opt(&m.A4_eta_e_items_j)),
        ("A5 utilisation", opt(&m.A5_u)),
        ("A6 memory bandwidth (B/s)", opt(&m.A6_bmem_bytes_s)),
        ("A7 peak memory (B)", opt(&m.A7_mpeak_bytes)),
        ("average power (W)", m.p_avg_w.to_string()),
        ("static energy (J)", opt(&m.e_static_j)),
        ("dynamic energy (J)", opt(&m.e_dynamic_j)),
        ("residual energy (J)", opt(&m.e_residual_j)),
        ("static share of static+dynamic", opt(&m.static_share)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "| {k} | {v} |");
    }
    let c = &r.carbon;
    let e = &r.econ;
    let _ = writeln!(s, "\n## Carbon and cost ({}, {})\n", site.label, c.region);
    let _ = writeln!(s, "| metric | value |\n|---|---|");
    let rows = [
        ("mean intensity (kg CO2e/kWh)", c.kg_per_kwh_mean.to_string()),
        ("C1 operational carbon (kg)", c.C1_cc_kg.to_string()),
        ("C2 carbon efficiency (items/g)", opt(&c.C2_eta_c_items_g)),
        ("embodied share (kg)", c.embodied_kg.to_string()),
        ("total carbon (kg)", c.total_kg.to_string()),
        (
            "E2 energy cost",
            format!("{} {}", e.E2_c_e_energy, e.currency),
        ),
        ("CAPEX share", format!("{} {}", e.capex_share, e.currency)),
        ("OPEX share", format!("{} {}", e.opex_share, e.currency)),
        ("E1 attributed TCO", format!("{} {}", e.E1_c_tto_share, e.currency)),
        (
            "E3 cost efficiency (items/currency)",
            opt(&e.E3_cost_efficiency_items_per_currency),
        ),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "| {k} | {v} |");
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\n## Warnings\n");
        for w in &r.warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    let _ = writeln!(s, "\n## Provenance\n\n```");
    s.push_str(&provenance_lines(&r.provenance, ""));
    s.push_str("```\n");
    s
}

