//! Carbon and cost accounting: operational and embodied carbon per run,
//! annual emissions at constant draw, per-job cost shares, and the facility
//! efficiency model for a power-capped site.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{PowerTrace, TraceError, Window};

pub const JOULES_PER_KWH: f64 = 3.6e6;
/// Hours in a 365.25-day year, the same year the asset lifetimes use.
pub const HOURS_PER_YEAR: f64 = 8766.0;
/// Green500 leader efficiency (KAIROS, November 2025), GFLOP/s/W.
pub const GREEN500_LEADER_GFLOPS_PER_W: f64 = 73.28;
/// Typical Green500 system band, GFLOP/s/W.
pub const GREEN500_TYPICAL_GFLOPS_PER_W: (f64, f64) = (30.0, 40.0);

#[derive(Debug, Error)]
pub enum EconError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("carbon series covers [{start}, {end}] but window is [{t0}, {t1}]")]
    NotCovered {
        t0: f64,
        t1: f64,
        start: f64,
        end: f64,
    },
    #[error("carbon-to-solution is zero; carbon efficiency undefined")]
    ZeroCarbon,
    #[error("attributed cost is zero; cost efficiency undefined")]
    ZeroCost,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Grid carbon intensity (kg CO2e / kWh) sampled over time. Each sample
/// holds until the next; the final sample holds for one median interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CarbonIntensitySeries {
    samples: Vec<(f64, f64)>,
}

impl CarbonIntensitySeries {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, EconError> {
        if samples.is_empty() {
            return Err(EconError::InvalidInput("empty carbon series".into()));
        }
        for (i, &(t, k)) in samples.iter().enumerate() {
            if !(t.is_finite() && k.is_finite() && k > 0.0) {
                return Err(EconError::InvalidInput(format!(
                    "carbon sample {} ({t}, {k}) must have finite time and positive intensity",
                    i + 1
                )));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(EconError::InvalidInput(format!(
                    "carbon sample {} timestamps must increase",
                    i + 1
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// End of the last segment.
    pub fn end(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return self.samples[0].0;
        }
        let mut dts: Vec<f64> = self.samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
        dts.sort_by(f64::total_cmp);
        self.samples[n - 1].0 + dts[dts.len() / 2]
    }

    /// `(start, end, intensity)` of each piecewise-constant segment
    /// intersected with `window`.
    pub fn segments(&self, window: Window) -> Result<Vec<(f64, f64, f64)>, EconError> {
        let (start, end) = (self.samples[0].0, self.end());
        if window.t0 < start || window.t1 > end {
            return Err(EconError::NotCovered {
                t0: window.t0,
                t1: window.t1,
                start,
                end,
            });
        }
        let mut out = Vec::new();
        for (i, &(t, k)) in self.samples.iter().enumerate() {
            let seg_end = self.samples.get(i + 1).map_or(end, |s| s.0);
            let (a, b) = (t.max(window.t0), seg_end.min(window.t1));
            if b > a {
                out.push((a, b, k));
            }
        }
        Ok(out)
    }

    /// Parses a `timestamp_s,kg_per_kwh` CSV.
    pub fn from_csv(file: &str, text: &str) -> Result<Self, EconError> {
        let perr = |message: String| EconError::Parse {
            file: file.to_string(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| perr(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["timestamp_s", "kg_per_kwh"] {
            return Err(perr("expected header timestamp_s,kg_per_kwh".into()));
        }
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| perr(format!("row {}: {e}", i + 1)))?;
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| perr(format!("row {}: bad number {:?}", i + 1, &rec[k])))
            };
            samples.push((num(0)?, num(1)?));
        }
        Self::new(samples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CarbonIntensity {
    Constant(f64),
    Series(CarbonIntensitySeries),
}

impl CarbonIntensity {
    /// Time-weighted mean intensity over `window`.
    pub fn mean_over(&self, window: Window) -> Result<f64, EconError> {
        match self {
            Self::Constant(k) => Ok(*k),
            Self::Series(s) => Ok(s
                .segments(window)?
                .iter()
                .map(|&(a, b, k)| k * (b - a))
                .sum::<f64>()
                / window.duration()),
        }
    }
}

/// Operational carbon (kg CO2e) of `e_c` joules drawn uniformly over `window`.
pub fn carbon_to_solution(
    e_c: f64,
    carbon: &CarbonIntensity,
    window: Window,
) -> Result<f64, EconError> {
    if !(e_c >= 0.0 && e_c.is_finite()) {
        return Err(EconError::InvalidInput(format!("energy {e_c} J")));
    }
    let kwh = e_c / JOULES_PER_KWH;
    match carbon {
        CarbonIntensity::Constant(k) => Ok(kwh * k),
        series => Ok(kwh * series.mean_over(window)?),
    }
}

/// Operational carbon with the energy of each intensity segment taken from
/// the power trace itself, scaled by the job's node share.
pub fn carbon_to_solution_traced(
    trace: &PowerTrace,
    resource_fraction: f64,
    carbon: &CarbonIntensity,
    window: Window,
) -> Result<f64, EconError> {
    match carbon {
        CarbonIntensity::Constant(k) => {
            Ok(resource_fraction * trace.energy_over(window)? / JOULES_PER_KWH * k)
        }
        CarbonIntensity::Series(s) => {
            let mut total = 0.0;
            for (a, b, k) in s.segments(window)? {
                let seg = Window::new(a, b)?;
                total += resource_fraction * trace.energy_over(seg)? / JOULES_PER_KWH * k;
            }
            Ok(total)
        }
    }
}

/// kg CO2e per year of continuous draw at `power_w`.
pub fn annual_emissions(power_w: f64, kg_per_kwh: f64) -> f64 {
    power_w / 1e3 * HOURS_PER_YEAR * kg_per_kwh
}

pub fn kg_to_kt(kg: f64) -> f64 {
    kg / 1e6
}

/// Items per kg CO2e.
pub fn carbon_efficiency(n_items: f64, c_c: f64) -> Result<f64, EconError> {
    if c_c == 0.0 {
        return Err(EconError::ZeroCarbon);
    }
    if !(c_c > 0.0) {
        return Err(EconError::InvalidInput(format!("carbon {c_c} kg")));
    }
    Ok(n_items / c_c)
}

/// Capital and embodied-carbon model of the node a run executes on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetModel {
    pub capex: f64,
    #[serde(default = "default_currency")]
    pub currency: String,
    pub embodied_kg: f64,
    pub lifetime_s: f64,
    #[serde(default)]
    pub opex_rate_per_s: Option<f64>,
}

fn default_currency() -> String {
    "USD".to_string()
}

impl AssetModel {
    pub fn validate(&self) -> Result<(), EconError> {
        let ok = self.capex >= 0.0
            && self.capex.is_finite()
            && self.embodied_kg >= 0.0
            && self.embodied_kg.is_finite()
            && self.lifetime_s > 0.0
            && self.lifetime_s.is_finite()
            && self.opex_rate_per_s.is_none_or(|r| r >= 0.0 && r.is_finite());
        if ok {
            Ok(())
        } else {
            Err(EconError::InvalidInput(format!("asset model {self:?}")))
        }
    }

    pub fn load(path: &Path) -> Result<Self, EconError> {
        let text = read(path)?;
        let asset: Self = serde_json::from_str(&text).map_err(|e| EconError::Parse {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        asset.validate()?;
        Ok(asset)
    }

    fn amortised(&self, total: f64, t_c: f64, resource_fraction: f64) -> f64 {
        total * (t_c / self.lifetime_s) * resource_fraction
    }
}

/// Embodied carbon attributed to a run: linear in runtime and node share.
pub fn embodied_share(asset: &AssetModel, t_c: f64, resource_fraction: f64) -> f64 {
    asset.amortised(asset.embodied_kg, t_c, resource_fraction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteProfile {
    pub region: String,
    pub label: String,
    pub carbon: CarbonIntensity,
    pub price_per_kwh: f64,
    pub power_cap_w: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CarbonSpecJson {
    #[serde(default)]
    constant_kg_per_kwh: Option<f64>,
    #[serde(default)]
    series_csv_path: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SiteJson {
    region: String,
    #[serde(default)]
    label: String,
    carbon: CarbonSpecJson,
    price_per_kwh: f64,
    power_cap_w: f64,
}

impl SiteProfile {
    pub fn validate(&self) -> Result<(), EconError> {
        if !(self.price_per_kwh >= 0.0 && self.price_per_kwh.is_finite()) {
            return Err(EconError::InvalidInput(format!(
                "price_per_kwh {}",
                self.price_per_kwh
            )));
        }
        if !(self.power_cap_w > 0.0 && self.power_cap_w.is_finite()) {
            return Err(EconError::InvalidInput(format!(
                "power_cap_w {}",
                self.power_cap_w
            )));
        }
        if let CarbonIntensity::Constant(k) = self.carbon {
            if !(k > 0.0 && k.is_finite()) {
                return Err(EconError::InvalidInput(format!("carbon intensity {k}")));
            }
        }
        Ok(())
    }

    /// Loads the site JSON; a series CSV path is resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, EconError> {
        let file = path.display().to_string();
        let text = read(path)?;
        let raw: SiteJson = serde_json::from_str(&text).map_err(|e| EconError::Parse {
            file: file.clone(),
            message: e.to_string(),
        })?;
        let carbon = match (raw.carbon.constant_kg_per_kwh, raw.carbon.series_csv_path) {
            (Some(k), None) => CarbonIntensity::Constant(k),
            (None, Some(p)) => {
                let p = path.parent().unwrap_or(Path::new(".")).join(p);
                CarbonIntensity::Series(CarbonIntensitySeries::from_csv(
                    &p.display().to_string(),
                    &read(&p)?,
                )?)
            }
            _ => {
                return Err(EconError::Parse {
                    file,
                    message: "carbon needs exactly one of constant_kg_per_kwh or series_csv_path"
                        .into(),
                })
            }
        };
        let site = Self {
            region: raw.region,
            label: raw.label,
            carbon,
            price_per_kwh: raw.price_per_kwh,
            power_cap_w: raw.power_cap_w,
        };
        site.validate()?;
        Ok(site)
    }
}

fn read(path: &Path) -> Result<String, EconError> {
    std::fs::read_to_string(path).map_err(|source| EconError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-job cost attribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EconVector {
    pub currency: String,
    pub c_e_energy: f64,
    pub capex_share: f64,
    pub opex_share: f64,
    pub c_tto_share: f64,
    /// Items per currency unit; `None` when nothing was processed at zero cost.
    pub cost_efficiency: Option<f64>,
}

impl EconVector {
    /// Fraction of the attributed cost that is capital.
    pub fn capex_fraction(&self) -> f64 {
        self.capex_share / self.c_tto_share
    }
}

pub fn econ_vector(
    e_c: f64,
    site: &SiteProfile,
    asset: &AssetModel,
    t_c: f64,
    resource_fraction: f64,
    n_items: f64,
) -> Result<EconVector, EconError> {
    if !(resource_fraction > 0.0 && resource_fraction <= 1.0) {
        return Err(EconError::InvalidInput(format!(
            "resource fraction {resource_fraction}"
        )));
    }
    if !(e_c >= 0.0 && t_c >= 0.0) {
        return Err(EconError::InvalidInput(format!("e_c {e_c}, t_c {t_c}")));
    }
    let c_e_energy = e_c / JOULES_PER_KWH * site.price_per_kwh;
    let capex_share = asset.amortised(asset.capex, t_c, resource_fraction);
    let opex_share = asset.opex_rate_per_s.unwrap_or(0.0) * t_c;
    let c_tto_share = capex_share + opex_share + c_e_energy;
    let cost_efficiency = if c_tto_share > 0.0 {
        Some(n_items / c_tto_share)
    } else if n_items > 0.0 {
        return Err(EconError::ZeroCost);
    } else {
        None
    };
    Ok(EconVector {
        currency: asset.currency.clone(),
        c_e_energy,
        capex_share,
        opex_share,
        c_tto_share,
        cost_efficiency,
    })
}

/// Sustained-compute requirement of a power-capped facility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacilityScenario {
    /// FLOP/s.
    pub c_sus: f64,
    /// Watts.
    pub p_cap: f64,
    pub f_overhead: f64,
}

/// Required efficiencies in FLOP/s per watt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacilityEfficiency {
    pub eta_facility: f64,
    pub eta_compute: f64,
}

impl FacilityEfficiency {
    pub fn facility_gflops_per_w(&self) -> f64 {
        self.eta_facility / 1e9
    }

    pub fn compute_gflops_per_w(&self) -> f64 {
        self.eta_compute / 1e9
    }
}

pub fn facility_efficiency(scn: &FacilityScenario) -> Result<FacilityEfficiency, EconError> {
    if !(scn.c_sus > 0.0 && scn.p_cap > 0.0 && (0.0..1.0).contains(&scn.f_overhead)) {
        return Err(EconError::InvalidInput(format!("facility scenario {scn:?}")));
    }
    Ok(FacilityEfficiency {
        eta_facility: scn.c_sus / scn.p_cap,
        eta_compute: scn.c_sus / (scn.p_cap * (1.0 - scn.f_overhead)),
    })
}

/// Required compute-node efficiency range at one power cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRow {
    pub p_cap_w: f64,
    pub min_gflops_per_w: f64,
    pub max_gflops_per_w: f64,
}

/// Compute-node efficiency band per power cap over the corners of the
/// sustained-compute and overhead ranges. Rows come back sorted by power cap.
pub fn efficiency_band(
    c_sus: (f64, f64),
    p_caps: &[f64],
    f_overhead: (f64, f64),
) -> Result<Vec<BandRow>, EconError> {
    if !(c_sus.0 <= c_sus.1 && f_overhead.0 <= f_overhead.1) {
        return Err(EconError::InvalidInput(format!(
            "ranges must be ordered lo <= hi: c_sus {c_sus:?}, f_overhead {f_overhead:?}"
        )));
    }
    if p_caps.is_empty() {
        return Err(EconError::InvalidInput("no power caps given".into()));
    }
    let mut caps = p_caps.to_vec();
    caps.sort_by(f64::total_cmp);
    caps.into_iter()
        .map(|p_cap| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for c in [c_sus.0, c_sus.1] {
                for f in [f_overhead.0, f_overhead.1] {
                    let e = facility_efficiency(&FacilityScenario {
                        c_sus: c,
                        p_cap,
                        f_overhead: f,
                    })?
                    .compute_gflops_per_w();
                    lo = lo.min(e);
                    hi = hi.max(e);
                }
            }
            Ok(BandRow {
                p_cap_w: p_cap,
                min_gflops_per_w: lo,
                max_gflops_per_w: hi,
            })
        })
        .collect()
}
