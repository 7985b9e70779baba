//! TOML configuration files. Each carries `schema_version = 1`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use camp_core::codesign::{ConstraintSet, ParamValue};
use camp_core::quality::{QualityComponent, QualityWeights};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::output::SCHEMA_VERSION;

fn parse_versioned<T: DeserializeOwned>(path: &Path, text: &str) -> anyhow::Result<T> {
    #[derive(Deserialize)]
    struct Header {
        schema_version: Option<u32>,
    }
    let file = path.display();
    let header: Header = toml::from_str(text).with_context(|| format!("{file}"))?;
    match header.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => bail!("{file}: unsupported schema_version {v} (expected {SCHEMA_VERSION})"),
        None => bail!("{file}: missing schema_version"),
    }
    toml::from_str(text).with_context(|| format!("{file}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsFile {
    #[allow(dead_code)]
    schema_version: u32,
    delta_q_max: Option<f64>,
    p_max: Option<f64>,
    theta_min: Option<f64>,
    #[serde(default)]
    bounds: Vec<camp_core::codesign::Bound>,
}

/// ```toml
/// schema_version = 1
/// p_max = 2e6
/// theta_min = 10.0
/// delta_q_max = 0.05
/// [[bounds]]
/// path = "n_chans"
/// min = 8
/// ```
pub fn load_constraints(path: &Path, text: &str) -> anyhow::Result<ConstraintSet> {
    let f: ConstraintsFile = parse_versioned(path, text)?;
    let set = ConstraintSet {
        delta_q_max: f.delta_q_max,
        p_max: f.p_max,
        theta_min: f.theta_min,
        bounds: f.bounds,
    };
    set.validate().with_context(|| format!("{}", path.display()))?;
    Ok(set)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    #[allow(dead_code)]
    schema_version: u32,
    weights: BTreeMap<String, f64>,
    #[serde(default)]
    reference: BTreeMap<String, f64>,
}

/// Quality-loss weights plus optional reference component values.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsConfig {
    pub weights: QualityWeights,
    pub reference: BTreeMap<QualityComponent, f64>,
}

fn components(
    path: &Path,
    table: &str,
    raw: BTreeMap<String, f64>,
) -> anyhow::Result<BTreeMap<QualityComponent, f64>> {
    raw.into_iter()
        .map(|(k, v)| {
            let c = k
                .parse::<QualityComponent>()
                .map_err(|e| anyhow!("{}: [{table}] {e}", path.display()))?;
            Ok((c, v))
        })
        .collect()
}

/// ```toml
/// schema_version = 1
/// [weights]
/// rms_dirty = 1.0
/// ssim = 1.0
/// [reference]      # optional; defaults come from the reference image
/// rms_dirty = 0.02
/// ```
pub fn load_weights(path: &Path, text: &str) -> anyhow::Result<WeightsConfig> {
    let f: WeightsFile = parse_versioned(path, text)?;
    let weights = components(path, "weights", f.weights)?;
    if let Some((c, w)) = weights.iter().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
        bail!("{}: weight for {c} must be non-negative, got {w}", path.display());
    }
    Ok(WeightsConfig {
        weights,
        reference: components(path, "reference", f.reference)?,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    #[allow(dead_code)]
    schema_version: u32,
    params: BTreeMap<String, Vec<ParamValue>>,
}

/// ```toml
/// schema_version = 1
/// [params]
/// n_times = [1, 8, 64, 128, 256]
/// ```
pub fn load_space(path: &Path, text: &str) -> anyhow::Result<BTreeMap<String, Vec<ParamValue>>> {
    let f: SpaceFile = parse_versioned(path, text)?;
    Ok(f.params)
}

/// Parses `16P`, `2.5M`, `300k`, `1e6` or plain numbers.
pub fn parse_si(s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    let (num, mult) = match s.chars().last() {
        Some('k') => (&s[..s.len() - 1], 1e3),
        Some('M') => (&s[..s.len() - 1], 1e6),
        Some('G') => (&s[..s.len() - 1], 1e9),
        Some('T') => (&s[..s.len() - 1], 1e12),
        Some('P') => (&s[..s.len() - 1], 1e15),
        Some('E') => (&s[..s.len() - 1], 1e18),
        _ => (s, 1.0),
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| anyhow!("not a number: {s:?}"))?;
    if !v.is_finite() {
        bail!("not finite: {s:?}");
    }
    Ok(v * mult)
}

/// `LO:HI`, or a single value meaning a degenerate range.
pub fn parse_range(s: &str) -> anyhow::Result<(f64, f64)> {
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (parse_si(a)?, parse_si(b)?),
        None => {
            let v = parse_si(s)?;
            (v, v)
        }
    };
    if lo > hi {
        bail!("range {s:?} has lo > hi");
    }
    Ok((lo, hi))
}

pub fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_si)
        .collect::<anyhow::Result<_>>()?;
    if v.is_empty() {
        bail!("empty list {s:?}");
    }
    Ok(v)
}
