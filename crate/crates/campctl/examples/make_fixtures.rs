//! Regenerates the bundled `fixtures/` tree. Everything is closed-form or
//! seeded, so reruns reproduce the same bytes.
//!
//! cargo run -p campctl --example make_fixtures [-- OUT_DIR]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use camp_core::codesign::{sweep_grid, ParamValue};
use camp_core::report::to_canonical_json;
use serde_json::{json, Value};

fn put(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn put_json(path: &Path, v: &Value) {
    put(path, &to_canonical_json(v).unwrap());
}

fn power_csv(samples: &[(f64, f64)]) -> String {
    let mut s = String::from("timestamp_s,power_w\n");
    for (t, p) in samples {
        let _ = writeln!(s, "{t},{p:.3}");
    }
    s
}

fn sites(root: &Path) {
    put_json(
        &root.join("sites/sa.json"),
        &json!({
            "region": "SA",
            "label": "SKA-Mid (SA)",
            "carbon": {"constant_kg_per_kwh": 0.672},
            "price_per_kwh": 0.19,
            "power_cap_w": 2.0e6,
        }),
    );
    put_json(
        &root.join("sites/wa.json"),
        &json!({
            "region": "WA",
            "label": "SKA-Low (WA)",
            "carbon": {"constant_kg_per_kwh": 0.321},
            "price_per_kwh": 0.27,
            "power_cap_w": 2.0e6,
        }),
    );
    // diurnal swing around the SA mean, one sample per 15 minutes
    let mut csv = String::from("timestamp_s,kg_per_kwh\n");
    for k in 0..=24 * 4 {
        let t = k as f64 * 900.0;
        let kappa = 0.672 + 0.15 * (2.0 * std::f64::consts::PI * t / 86400.0).sin();
        let _ = writeln!(csv, "{t},{kappa:.4}");
    }
    put(&root.join("sites/sa_diurnal.csv"), &csv);
    put_json(
        &root.join("sites/sa_diurnal.json"),
        &json!({
            "region": "SA",
            "label": "SKA-Mid (SA), diurnal intensity",
            "carbon": {"series_csv_path": "sa_diurnal.csv"},
            "price_per_kwh": 0.19,
            "power_cap_w": 2.0e6,
        }),
    );
    put_json(
        &root.join("assets/node.json"),
        &json!({
            "capex": 29875.39,
            "currency": "USD",
            "embodied_kg": 512519.0,
            "lifetime_s": 189345600.0,
        }),
    );
}

/// Constant-power demo run whose static/dynamic split is known in closed
/// form: static 0.25*400*600, dynamic 14*600 + 0.25*32*600, total
/// 0.25*492*600.
fn demo(root: &Path) {
    let dir = root.join("demo");
    // PDU alternates 480/504 every 10 s, so each segment averages 492 W
    let pdu: Vec<(f64, f64)> = (0..=60)
        .map(|k| (k as f64 * 10.0, if k % 2 == 0 { 480.0 } else { 504.0 }))
        .collect();
    put(&dir.join("pdu.csv"), &power_csv(&pdu));
    put(&dir.join("cpu.csv"), &power_csv(&[(0.0, 32.0), (600.0, 32.0)]));
    // affine GPU ramp 10 -> 18 W, mean 14 W
    put(&dir.join("gpu.csv"), &power_csv(&[(0.0, 10.0), (600.0, 18.0)]));
    let mut act = String::from("timestamp_s,busy\n");
    for k in 0..=60 {
        let _ = writeln!(act, "{},{}", k * 10, u8::from(k % 4 != 3));
    }
    put(&dir.join("gpu_busy.csv"), &act);
    let mut mem = String::from("timestamp_s,mem_bytes\n");
    for k in 0..=60u64 {
        let _ = writeln!(mem, "{},{}", k * 10, 2_000_000_000 + (k * 37 % 11) * 100_000_000);
    }
    put(&dir.join("gpu_mem.csv"), &mem);

    let manifest = |run_id: &str, bytes: Option<u64>| {
        let mut m = json!({
            "run_id": run_id,
            "t_start_s": 0.0,
            "t_end_s": 600.0,
            "n_items": 1.2e9,
            "n_items_unit": "visibilities",
            "platform": "1x GPU node, quarter share",
            "config": {"n_times": 64, "n_chans": 64, "image_size": 8192},
            "resource_fraction": 0.25,
            "idle": {"power_w": 400.0},
            "traces": [
                {"path": "pdu.csv", "kind": "power", "source": "pdu"},
                {"path": "cpu.csv", "kind": "power", "source": "cpu"},
                {"path": "gpu.csv", "kind": "power", "source": "gpu"},
                {"path": "gpu_busy.csv", "kind": "activity", "source": "gpu0"},
                {"path": "gpu_mem.csv", "kind": "memory", "source": "gpu0"},
            ],
        });
        if let Some(b) = bytes {
            m["bytes_moved"] = json!(b);
        }
        m
    };
    put_json(&dir.join("manifest.json"), &manifest("demo", Some(3_600_000_000_000)));
    put_json(&dir.join("manifest_no_bytes.json"), &manifest("demo-no-bytes", None));
}

/// The published latency/energy points plus one exact duplicate.
const FIG9: [(f64, f64); 12] = [
    (6.89, 1.39),
    (6.77, 1.42),
    (6.89, 1.38),
    (6.48, 1.23),
    (6.54, 1.25),
    (6.50, 1.30),
    (6.46, 1.10),
    (6.54, 1.05),
    (6.54, 1.11),
    (6.57, 1.05),
    (6.53, 1.18),
    (6.46, 1.10),
];

fn fig9(root: &Path) {
    for (i, (lat, en)) in FIG9.iter().enumerate() {
        let id = format!("fig9-{i:02}");
        put_json(
            &root.join(format!("fig9/runs/{id}/metrics.json")),
            &json!({
                "schema_version": 1,
                "run_id": id,
                "platform": "heterogeneous SoC mapping",
                "config": {"mapping": i},
                "metrics": {"A1_tc_s": lat, "A2_ec_j": en},
            }),
        );
    }
}

fn sweep_space() -> BTreeMap<String, Vec<ParamValue>> {
    let ints = |v: &[i64]| v.iter().map(|&x| ParamValue::Int(x)).collect::<Vec<_>>();
    BTreeMap::from([
        ("n_times".to_string(), ints(&[1, 8, 64, 128, 256])),
        ("n_chans".to_string(), ints(&[1, 8, 64, 128, 256])),
        ("image_size".to_string(), ints(&[4096, 8192, 16384, 32768])),
    ])
}

/// One campaign: an idle lead-in, then the 100 runs back to back on one
/// node, all recorded in shared traces sampled every 5 s.
fn sweep(root: &Path) {
    let dir = root.join("sweep");
    put(
        &dir.join("space.toml"),
        "schema_version = 1\n\n[params]\nn_times = [1, 8, 64, 128, 256]\nn_chans = [1, 8, 64, 128, 256]\nimage_size = [4096, 8192, 16384, 32768]\n",
    );
    let points = sweep_grid(&sweep_space()).unwrap();
    let idle_w = 400.0;
    let mut t = 120.0;
    let mut runs = Vec::new();
    for p in &points {
        let get = |k: &str| p.algo_params[k].as_f64().unwrap();
        let (nt, nc, size) = (get("n_times"), get("n_chans"), get("image_size"));
        let runtime = 10.0 + 0.002 * nt * nc + 5.0 * (size / 4096.0).powi(2);
        let power = 440.0 + 30.0 * (size / 4096.0).log2() + 4.0 * nc.log2() - 2.0 * nt.log2();
        runs.push((p, t, t + runtime, power, nt * nc * 130_816.0));
        // runs start on the 5 s grid, with at least 10 s idle between them
        t = ((t + runtime + 10.0) / 5.0).ceil() * 5.0;
    }
    let end = t + 60.0;
    let power_at = |x: f64| {
        runs.iter()
            .find(|r| x >= r.1 && x < r.2)
            .map_or(idle_w, |r| r.3)
    };
    let n = (end / 5.0) as usize;
    let ts: Vec<f64> = (0..=n).map(|k| k as f64 * 5.0).collect();
    let pdu: Vec<(f64, f64)> = ts.iter().map(|&x| (x, power_at(x))).collect();
    let gpu: Vec<(f64, f64)> = pdu.iter().map(|&(x, p)| (x, 0.6 * (p - idle_w))).collect();
    let cpu: Vec<(f64, f64)> = pdu.iter().map(|&(x, p)| (x, 20.0 + 0.3 * (p - idle_w))).collect();
    put(&dir.join("traces/pdu.csv"), &power_csv(&pdu));
    put(&dir.join("traces/gpu.csv"), &power_csv(&gpu));
    put(&dir.join("traces/cpu.csv"), &power_csv(&cpu));
    let mut act = String::from("timestamp_s,busy\n");
    for &x in &ts {
        let _ = writeln!(act, "{x},{}", u8::from(power_at(x) > idle_w));
    }
    put(&dir.join("traces/gpu_busy.csv"), &act);

    for (p, t0, t1, _, vis) in &runs {
        let config: serde_json::Map<String, Value> = p
            .algo_params
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap()))
            .chain([
                ("n_stations".to_string(), json!(512)),
                ("start_freq_hz".to_string(), json!(151e6)),
                ("freq_step_hz".to_string(), json!(1e6)),
                ("integration_s".to_string(), json!(10.0)),
                ("phase_center_deg".to_string(), json!([25.0, -30.0])),
            ])
            .collect();
        put_json(
            &dir.join(format!("manifests/{}.json", p.id)),
            &json!({
                "run_id": p.id,
                "t_start_s": t0,
                "t_end_s": t1,
                "n_items": vis,
                "n_items_unit": "visibilities",
                "platform": "1x GPU node",
                "config": config,
                "resource_fraction": 0.5,
                "idle": {"window_s": [0.0, 120.0]},
                "traces": [
                    {"path": "../traces/pdu.csv", "kind": "power", "source": "pdu"},
                    {"path": "../traces/cpu.csv", "kind": "power", "source": "cpu"},
                    {"path": "../traces/gpu.csv", "kind": "power", "source": "gpu"},
                    {"path": "../traces/gpu_busy.csv", "kind": "activity", "source": "gpu0"},
                ],
            }),
        );
    }
}

fn quality(root: &Path) {
    let dir = root.join("quality");
    let (w, h) = (32usize, 32usize);
    let sources = [(8.0, 9.0, 1.0), (20.0, 12.0, 0.6), (14.0, 24.0, 0.3)];
    let image = |noise: f64| {
        let mut s = String::new();
        for y in 0..h {
            let row: Vec<String> = (0..w)
                .map(|x| {
                    let mut v = 0.0;
                    for (sx, sy, a) in sources {
                        let r2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
                        v += a * (-r2 / 4.0).exp();
                    }
                    // deterministic ripple standing in for residual sidelobes
                    v += noise * ((x * 7 + y * 13) % 17) as f64 / 17.0 - noise / 2.0;
                    format!("{v:.6}")
                })
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    };
    put(&dir.join("reference.csv"), &image(0.0));
    put(&dir.join("candidate.csv"), &image(0.02));
    let small: String = (0..8).map(|_| format!("{}\n", vec!["0.5"; 8].join(","))).collect();
    put(&dir.join("small.csv"), &small);
    let mut r = String::from("# unit=px\nid,x,y,flux\n");
    let mut m = String::from("# unit=px\nid,x,y,flux\n");
    for (i, (sx, sy, a)) in sources.iter().enumerate() {
        let _ = writeln!(r, "r{i},{sx},{sy},{a}");
        let _ = writeln!(m, "m{i},{},{},{a}", sx + 3.0, sy + 4.0);
    }
    put(&dir.join("ref_catalog.csv"), &r);
    put(&dir.join("catalog.csv"), &m);
}

fn configs(root: &Path) {
    put(
        &root.join("configs/constraints.toml"),
        "schema_version = 1\n\n# average node power at most 700 W and throughput at least 1e4 visibilities/s\np_max = 700.0\ntheta_min = 1.0e4\n",
    );
    put(
        &root.join("configs/impossible.toml"),
        "schema_version = 1\n\n# no run draws less than 1 W on average\np_max = 1.0\n",
    );
    put(
        &root.join("configs/weights.toml"),
        "schema_version = 1\n\n[weights]\nrms_dirty = 1.0\nssim = 1.0\n\n[reference]\n# the candidate should not be noisier than this\nrms_dirty = 0.1\n",
    );
}

fn main() {
    let root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    sites(&root);
    demo(&root);
    fig9(&root);
    sweep(&root);
    quality(&root);
    configs(&root);
    println!("fixtures written to {}", root.display());
}
