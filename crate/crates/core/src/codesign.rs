//! Design points `(algorithm, hardware, system)` with their evaluated metrics,
//! constraint filtering, Pareto-front extraction, scalarisation and sweep-grid
//! generation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::econ::EconVector;
use crate::metrics::MetricVector;
use crate::quality::QualityVector;

#[derive(Debug, Error)]
pub enum CodesignError {
    #[error("point {id}: objective {path} is missing")]
    MissingObjective { id: String, path: String },
    #[error("point {id}: objective {path} is not finite")]
    NonFinite { id: String, path: String },
    #[error("at least one objective is required")]
    NoObjectives,
    #[error("expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid {what}: {value}")]
    InvalidValue { what: String, value: f64 },
    #[error("parameter {0} has no values")]
    EmptyValues(String),
    #[error("parameter space is empty")]
    EmptySpace,
    #[error("duplicate design point id {0}")]
    DuplicateId(String),
    #[error("unknown direction {0:?} (expected min or max)")]
    UnknownDirection(String),
}

/// Scalar coordinate of a design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(i) => Some(*i as f64),
            Self::Float(f) => Some(*f),
            Self::Text(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Int(i) => write!(f, "{i}"),
            Self::Float(x) => write!(f, "{x:?}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

/// Canonical metric paths and their short aliases.
pub const METRIC_ALIASES: &[(&str, &str)] = &[
    ("tc", "A1_tc_s"),
    ("latency", "A1_tc_s"),
    ("ec", "A2_ec_j"),
    ("energy", "A2_ec_j"),
    ("theta", "A3_theta_items_s"),
    ("eta_e", "A4_eta_e_items_j"),
    ("u", "A5_u"),
    ("bmem", "A6_bmem_bytes_s"),
    ("mpeak", "A7_mpeak_bytes"),
    ("p_avg", "p_avg_w"),
    ("cc", "C1_cc_kg"),
    ("eta_c", "C2_eta_c_items_kg"),
    ("tco", "E1_c_tto_share"),
    ("ce", "E2_c_e_energy"),
    ("cost_eff", "E3_cost_efficiency_items_per_currency"),
    ("dq", "delta_q"),
    ("occupancy", "occupancy_pct"),
];

/// Resolves a short alias to its canonical path; unknown names pass through.
pub fn canonical_path(path: &str) -> &str {
    METRIC_ALIASES
        .iter()
        .find(|(alias, _)| *alias == path)
        .map_or(path, |(_, canon)| canon)
}

/// One configuration `x = (a, h, s)` plus whatever has been measured for it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignPoint {
    pub id: String,
    pub algo_params: BTreeMap<String, ParamValue>,
    pub hw_params: BTreeMap<String, ParamValue>,
    pub sys_params: BTreeMap<String, ParamValue>,
    /// Evaluated metrics keyed by canonical path.
    pub values: BTreeMap<String, f64>,
}

impl DesignPoint {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn with_value(mut self, path: &str, v: f64) -> Self {
        self.values.insert(canonical_path(path).to_string(), v);
        self
    }

    pub fn set_metrics(&mut self, m: &MetricVector) {
        let mut put = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                self.values.insert(k.to_string(), v);
            }
        };
        put("A1_tc_s", Some(m.t_c));
        put("A2_ec_j", Some(m.e_c));
        put("A3_theta_items_s", Some(m.theta));
        put("A4_eta_e_items_j", m.eta_e);
        put("A5_u", m.u.as_ref().map(|u| u.aggregate));
        put("A6_bmem_bytes_s", m.b_mem);
        put("A7_mpeak_bytes", m.m_peak.map(|b| b as f64));
        put("p_avg_w", Some(m.p_avg));
    }

    pub fn set_quality(&mut self, q: &QualityVector) {
        for c in crate::quality::QualityComponent::ALL {
            if let Some(v) = q.component(c) {
                self.values.insert(c.name().to_string(), v);
            }
        }
    }

    pub fn set_econ(&mut self, e: &EconVector) {
        self.values
            .insert("E1_c_tto_share".into(), e.c_tto_share);
        self.values.insert("E2_c_e_energy".into(), e.c_e_energy);
        if let Some(ce) = e.cost_efficiency {
            self.values
                .insert("E3_cost_efficiency_items_per_currency".into(), ce);
        }
    }

    /// Looks a path up among evaluated values first, then numeric parameters
    /// (bare name or `algo.`/`hw.`/`sys.` prefixed).
    pub fn value(&self, path: &str) -> Option<f64> {
        let canon = canonical_path(path);
        if let Some(v) = self.values.get(canon) {
            return Some(*v);
        }
        let (maps, name): (Vec<&BTreeMap<String, ParamValue>>, &str) =
            match path.split_once('.') {
                Some(("algo", n)) => (vec![&self.algo_params], n),
                Some(("hw", n)) => (vec![&self.hw_params], n),
                Some(("sys", n)) => (vec![&self.sys_params], n),
                _ => (
                    vec![&self.algo_params, &self.hw_params, &self.sys_params],
                    path,
                ),
            };
        maps.into_iter()
            .find_map(|m| m.get(name))
            .and_then(ParamValue::as_f64)
    }

    /// All coordinates as `name=value` in (algo, hw, sys) then name order.
    pub fn coordinates(&self) -> Vec<(String, &ParamValue)> {
        let mut out = Vec::new();
        for (prefix, m) in [
            ("", &self.algo_params),
            ("hw.", &self.hw_params),
            ("sys.", &self.sys_params),
        ] {
            for (k, v) in m {
                out.push((format!("{prefix}{k}"), v));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl FromStr for Direction {
    type Err = CodesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" | "minimize" => Ok(Self::Minimize),
            "max" | "maximize" => Ok(Self::Maximize),
            other => Err(CodesignError::UnknownDirection(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub path: String,
    pub direction: Direction,
}

impl Objective {
    pub fn minimize(path: &str) -> Self {
        Self {
            path: path.to_string(),
            direction: Direction::Minimize,
        }
    }

    pub fn maximize(path: &str) -> Self {
        Self {
            path: path.to_string(),
            direction: Direction::Maximize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub objectives: Vec<Objective>,
}

impl ObjectiveSpec {
    pub fn new(objectives: Vec<Objective>) -> Result<Self, CodesignError> {
        if objectives.is_empty() {
            return Err(CodesignError::NoObjectives);
        }
        Ok(Self { objectives })
    }

    /// Time, energy, carbon and quality loss, all minimised.
    pub fn default_four() -> Self {
        Self {
            objectives: ["tc", "ec", "cc", "dq"]
                .into_iter()
                .map(Objective::minimize)
                .collect(),
        }
    }

    /// Parses `tc,ec,theta:max`; bare names are minimised.
    pub fn parse_list(s: &str) -> Result<Self, CodesignError> {
        let objectives = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| match p.split_once(':') {
                Some((path, dir)) => Ok(Objective {
                    path: path.to_string(),
                    direction: dir.parse()?,
                }),
                None => Ok(Objective::minimize(p)),
            })
            .collect::<Result<Vec<_>, CodesignError>>()?;
        Self::new(objectives)
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    /// Objective values of `p`, sign-flipped so that every entry is minimised.
    pub fn cost_vector(&self, p: &DesignPoint) -> Result<Vec<f64>, CodesignError> {
        self.objectives
            .iter()
            .map(|o| {
                let v = p.value(&o.path).ok_or_else(|| CodesignError::MissingObjective {
                    id: p.id.clone(),
                    path: o.path.clone(),
                })?;
                if v.is_nan() {
                    return Err(CodesignError::NonFinite {
                        id: p.id.clone(),
                        path: o.path.clone(),
                    });
                }
                Ok(match o.direction {
                    Direction::Minimize => v,
                    Direction::Maximize => -v,
                })
            })
            .collect()
    }
}

/// Inclusive bounds on a metric or numeric parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub path: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default)]
    pub delta_q_max: Option<f64>,
    #[serde(default)]
    pub p_max: Option<f64>,
    #[serde(default)]
    pub theta_min: Option<f64>,
    #[serde(default)]
    pub bounds: Vec<Bound>,
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<(), CodesignError> {
        let check = |what: &str, v: Option<f64>, nonneg: bool| match v {
            Some(x) if !x.is_finite() || (nonneg && x < 0.0) => Err(CodesignError::InvalidValue {
                what: what.to_string(),
                value: x,
            }),
            _ => Ok(()),
        };
        check("delta_q_max", self.delta_q_max, true)?;
        check("p_max", self.p_max, true)?;
        check("theta_min", self.theta_min, true)?;
        for b in &self.bounds {
            check(&format!("{}.min", b.path), b.min, false)?;
            check(&format!("{}.max", b.path), b.max, false)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub id: String,
    pub reasons: Vec<String>,
}

/// Splits points into feasible ones and rejections listing every violated
/// constraint. A constraint on an absent metric is a violation.
pub fn feasibility_filter<'a>(
    points: &'a [DesignPoint],
    c: &ConstraintSet,
) -> (Vec<&'a DesignPoint>, Vec<Rejection>) {
    let mut feasible = Vec::new();
    let mut rejected = Vec::new();
    for p in points {
        let mut reasons = Vec::new();
        let mut upper = |path: &str, label: &str, bound: &str, lim: Option<f64>| {
            if let Some(lim) = lim {
                match p.value(path) {
                    None => reasons.push(format!("missing metric {label}")),
                    Some(v) if !(v <= lim) => reasons.push(format!("{label} > {bound}")),
                    _ => {}
                }
            }
        };
        upper("dq", "delta_q", "delta_q_max", c.delta_q_max);
        upper("p_avg", "p_avg", "p_max", c.p_max);
        if let Some(lim) = c.theta_min {
            match p.value("theta") {
                None => reasons.push("missing metric theta".into()),
                Some(v) if !(v >= lim) => reasons.push("theta < theta_min".into()),
                _ => {}
            }
        }
        for b in &c.bounds {
            match p.value(&b.path) {
                None if b.min.is_some() || b.max.is_some() => {
                    reasons.push(format!("missing metric {}", b.path))
                }
                None => {}
                Some(v) => {
                    if let Some(lo) = b.min {
                        if !(v >= lo) {
                            reasons.push(format!("{} < {lo}", b.path));
                        }
                    }
                    if let Some(hi) = b.max {
                        if !(v <= hi) {
                            reasons.push(format!("{} > {hi}", b.path));
                        }
                    }
                }
            }
        }
        if reasons.is_empty() {
            feasible.push(p);
        } else {
            rejected.push(Rejection {
                id: p.id.clone(),
                reasons,
            });
        }
    }
    (feasible, rejected)
}

/// `a` dominates `b` (both minimised): no worse anywhere, strictly better once.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrontAlgorithm {
    /// Sort-and-sweep for two objectives, pairwise filtering otherwise.
    #[default]
    Auto,
    /// Plain O(n^2) check of every ordered pair.
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub objectives: ObjectiveSpec,
    /// Non-dominated ids in input order.
    pub members: Vec<String>,
    /// `(id, dominating member id)` in input order.
    pub dominated: Vec<(String, String)>,
    /// `(duplicate id, representative id)` for points with identical objectives.
    pub duplicates: Vec<(String, String)>,
}

pub fn pareto_front(
    points: &[DesignPoint],
    spec: &ObjectiveSpec,
) -> Result<ParetoFront, CodesignError> {
    pareto_front_with(points, spec, FrontAlgorithm::Auto)
}

fn key(v: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 compare equal, so they must hash equal
    v.iter().map(|x| (x + 0.0).to_bits()).collect()
}

pub fn pareto_front_with(
    points: &[DesignPoint],
    spec: &ObjectiveSpec,
    algo: FrontAlgorithm,
) -> Result<ParetoFront, CodesignError> {
    if spec.is_empty() {
        return Err(CodesignError::NoObjectives);
    }
    let mut seen_ids = HashSet::new();
    for p in points {
        if !seen_ids.insert(p.id.as_str()) {
            return Err(CodesignError::DuplicateId(p.id.clone()));
        }
    }
    let costs = points
        .iter()
        .map(|p| spec.cost_vector(p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut first_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut duplicates = Vec::new();
    for (i, c) in costs.iter().enumerate() {
        match first_of.get(&key(c)) {
            Some(&rep) => duplicates.push((points[i].id.clone(), points[rep].id.clone())),
            None => {
                first_of.insert(key(c), i);
                unique.push(i);
            }
        }
    }

    let ucosts: Vec<&[f64]> = unique.iter().map(|&i| costs[i].as_slice()).collect();
    let on_front = match (algo, spec.len()) {
        (FrontAlgorithm::Auto, 2) => sweep_2d(&ucosts),
        (FrontAlgorithm::Auto, _) => pairwise(&ucosts),
        (FrontAlgorithm::BruteForce, _) => brute_force(&ucosts),
    };

    let member_idx: Vec<usize> = unique
        .iter()
        .zip(&on_front)
        .filter_map(|(&i, &keep)| keep.then_some(i))
        .collect();
    let member_set: HashSet<usize> = member_idx.iter().copied().collect();
    let mut dominated = Vec::new();
    for &i in &unique {
        if member_set.contains(&i) {
            continue;
        }
        let by = member_idx
            .iter()
            .copied()
            .find(|&m| dominates(&costs[m], &costs[i]))
            .expect("a dominated point is dominated by some front member");
        dominated.push((points[i].id.clone(), points[by].id.clone()));
    }
    Ok(ParetoFront {
        objectives: spec.clone(),
        members: member_idx.iter().map(|&i| points[i].id.clone()).collect(),
        dominated,
        duplicates,
    })
}

/// Flags non-dominated entries of a duplicate-free 2-D cost set.
fn sweep_2d(costs: &[&[f64]]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| {
        costs[a][0]
            .total_cmp(&costs[b][0])
            .then(costs[a][1].total_cmp(&costs[b][1]))
    });
    let mut keep = vec![false; costs.len()];
    let mut best = f64::INFINITY;
    for i in order {
        if costs[i][1] < best {
            keep[i] = true;
            best = costs[i][1];
        }
    }
    keep
}

fn pairwise(costs: &[&[f64]]) -> Vec<bool> {
    costs
        .par_iter()
        .map(|c| !costs.iter().any(|o| dominates(o, c)))
        .collect()
}

fn brute_force(costs: &[&[f64]]) -> Vec<bool> {
    let mut keep = vec![true; costs.len()];
    for i in 0..costs.len() {
        for j in 0..costs.len() {
            if i != j && dominates(costs[j], costs[i]) {
                keep[i] = false;
            }
        }
    }
    keep
}

/// Member ids (input order) computed by filtering `parts` contiguous
/// partitions concurrently and then filtering the union of their local fronts.
/// Equals `pareto_front(points, spec)?.members` for every `parts`.
pub fn pareto_front_partitioned(
    points: &[DesignPoint],
    spec: &ObjectiveSpec,
    parts: usize,
) -> Result<Vec<String>, CodesignError> {
    let chunk = points.len().div_ceil(parts.max(1)).max(1);
    let local: Vec<Vec<usize>> = points
        .par_chunks(chunk)
        .enumerate()
        .map(|(k, ch)| {
            let f = pareto_front(ch, spec)?;
            let ids: HashSet<&str> = f.members.iter().map(String::as_str).collect();
            Ok(ch
                .iter()
                .enumerate()
                .filter(|(_, p)| ids.contains(p.id.as_str()))
                .map(|(i, _)| k * chunk + i)
                .collect())
        })
        .collect::<Result<_, CodesignError>>()?;
    // partitions are contiguous, so flattening keeps input order
    let candidates: Vec<DesignPoint> = local
        .into_iter()
        .flatten()
        .map(|i| points[i].clone())
        .collect();
    Ok(pareto_front(&candidates, spec)?.members)
}

/// `sum w_i * v_i / n_i` with maximised objectives negated; lower is better.
pub fn scalarize(
    point: &DesignPoint,
    spec: &ObjectiveSpec,
    weights: &[f64],
    normalizers: &[f64],
) -> Result<f64, CodesignError> {
    for len in [weights.len(), normalizers.len()] {
        if len != spec.len() {
            return Err(CodesignError::DimensionMismatch {
                expected: spec.len(),
                found: len,
            });
        }
    }
    if let Some(&n) = normalizers.iter().find(|n| !(**n > 0.0 && n.is_finite())) {
        return Err(CodesignError::InvalidValue {
            what: "normalizer".into(),
            value: n,
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(CodesignError::InvalidValue {
            what: "weight".into(),
            value: w,
        });
    }
    let costs = spec.cost_vector(point)?;
    Ok(costs
        .iter()
        .zip(weights)
        .zip(normalizers)
        .map(|((c, w), n)| w * c / n)
        .sum())
}

/// Stable id of a coordinate tuple: `x-` plus 12 hex digits of SHA-256 over
/// `name=value` lines.
pub fn point_id(coords: &[(String, &ParamValue)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in coords {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.to_string().as_bytes());
        h.update(b"\n");
    }
    let digest = h.finalize();
    format!("x-{}", &hex::encode(digest)[..12])
}

/// Cartesian product of the parameter space. Names are taken in sorted order
/// with the first name varying slowest, values in their listed order. Names
/// prefixed `hw.` or `sys.` land in the hardware or system map.
pub fn sweep_grid(
    space: &BTreeMap<String, Vec<ParamValue>>,
) -> Result<Vec<DesignPoint>, CodesignError> {
    if space.is_empty() {
        return Err(CodesignError::EmptySpace);
    }
    if let Some((name, _)) = space.iter().find(|(_, v)| v.is_empty()) {
        return Err(CodesignError::EmptyValues(name.clone()));
    }
    let names: Vec<&String> = space.keys().collect();
    let total: usize = space.values().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; names.len()];
    for _ in 0..total {
        let mut p = DesignPoint::default();
        for (k, name) in names.iter().enumerate() {
            let v = space[*name][idx[k]].clone();
            match name.split_once('.') {
                Some(("hw", n)) => p.hw_params.insert(n.to_string(), v),
                Some(("sys", n)) => p.sys_params.insert(n.to_string(), v),
                Some(("algo", n)) => p.algo_params.insert(n.to_string(), v),
                _ => p.algo_params.insert(name.to_string(), v),
            };
        }
        p.id = point_id(&p.coordinates());
        out.push(p);
        // odometer increment, last name fastest
        for k in (0..names.len()).rev() {
            idx[k] += 1;
            if idx[k] < space[names[k]].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// Mean of CPU-core share and mean FPGA resource share, in percent.
pub fn occupancy(cpu: f64, clb: f64, dsp: f64, bram: f64) -> Result<f64, CodesignError> {
    for (what, v) in [("cpu", cpu), ("clb", clb), ("dsp", dsp), ("bram", bram)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CodesignError::InvalidValue {
                what: what.to_string(),
                value: v,
            });
        }
    }
    Ok(100.0 * (cpu + (clb + dsp + bram) / 3.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: &str, tc: f64, ec: f64) -> DesignPoint {
        DesignPoint::new(id).with_value("tc", tc).with_value("ec", ec)
    }

    fn two() -> ObjectiveSpec {
        ObjectiveSpec::parse_list("tc,ec").unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let pts = vec![
            DesignPoint::new("a").with_value("p_avg", 2.5e6).with_value("theta", 10.0),
            DesignPoint::new("b").with_value("p_avg", 1.0e6).with_value("theta", 10.0),
        ];
        let (ok, bad) = feasibility_filter(&pts, &ConstraintSet::default());
        assert_eq!(ok.len(), 2);
        assert!(bad.is_empty());

        let c = ConstraintSet {
            p_max: Some(2e6),
            theta_min: Some(10.0),
            ..Default::default()
        };
        let (ok, bad) = feasibility_filter(&pts, &c);
        assert_eq!(ok.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["b"]);
        assert_eq!(bad[0].reasons, ["p_avg > p_max"]);
    }

    #[test]
    fn feasibility_missing_metric_and_all_reasons() {
        let pts = vec![DesignPoint::new("a").with_value("theta", 1.0)];
        let c = ConstraintSet {
            delta_q_max: Some(0.1),
            theta_min: Some(5.0),
            bounds: vec![Bound {
                path: "n_chans".into(),
                min: None,
                max: Some(64.0),
            }],
            ..Default::default()
        };
        let (ok, bad) = feasibility_filter(&pts, &c);
        assert!(ok.is_empty());
        assert_eq!(
            bad[0].reasons,
            [
                "missing metric delta_q",
                "theta < theta_min",
                "missing metric n_chans"
            ]
        );
    }

    #[test]
    fn bound_on_parameter() {
        let mut p = DesignPoint::new("a");
        p.hw_params.insert("n_chans".into(), ParamValue::Int(128));
        let c = ConstraintSet {
            bounds: vec![Bound {
                path: "hw.n_chans".into(),
                min: None,
                max: Some(64.0),
            }],
            ..Default::default()
        };
        let pts = [p];
        let (_, bad) = feasibility_filter(&pts, &c);
        assert_eq!(bad[0].reasons, ["hw.n_chans > 64"]);
    }

    #[test]
    fn front_trivial_cases() {
        let f = pareto_front(&[pt("only", 1.0, 1.0)], &two()).unwrap();
        assert_eq!(f.members, ["only"]);

        let f = pareto_front(&[pt("a", 1.0, 1.0), pt("b", 2.0, 2.0)], &two()).unwrap();
        assert_eq!(f.members, ["a"]);
        assert_eq!(f.dominated, [("b".to_string(), "a".to_string())]);
    }

    #[test]
    fn front_duplicates_and_ties() {
        let pts = [pt("a", 1.0, 2.0), pt("b", 1.0, 2.0), pt("c", 1.0, 3.0), pt("d", 2.0, 2.0)];
        for algo in [FrontAlgorithm::Auto, FrontAlgorithm::BruteForce] {
            let f = pareto_front_with(&pts, &two(), algo).unwrap();
            assert_eq!(f.members, ["a"]);
            assert_eq!(f.duplicates, [("b".to_string(), "a".to_string())]);
            assert_eq!(f.dominated.len(), 2);
        }
    }

    #[test]
    fn front_maximize_direction() {
        let spec = ObjectiveSpec::parse_list("tc,theta:max").unwrap();
        let pts = [
            DesignPoint::new("a").with_value("tc", 1.0).with_value("theta", 5.0),
            DesignPoint::new("b").with_value("tc", 1.0).with_value("theta", 9.0),
        ];
        assert_eq!(pareto_front(&pts, &spec).unwrap().members, ["b"]);
    }

    #[test]
    fn front_errors() {
        let pts = [DesignPoint::new("a").with_value("tc", 1.0)];
        assert!(matches!(
            pareto_front(&pts, &two()),
            Err(CodesignError::MissingObjective { .. })
        ));
        let dup = [pt("a", 1.0, 1.0), pt("a", 2.0, 2.0)];
        assert!(matches!(
            pareto_front(&dup, &two()),
            Err(CodesignError::DuplicateId(_))
        ));
        assert!(ObjectiveSpec::parse_list("").is_err());
        assert!(ObjectiveSpec::parse_list("tc:up").is_err());
    }

    #[test]
    fn scalarize_examples() {
        let p = pt("a", 3.0, 5.0);
        assert_eq!(scalarize(&p, &two(), &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        let one = ObjectiveSpec::parse_list("ec").unwrap();
        assert_eq!(scalarize(&p, &one, &[1.0], &[1.0]).unwrap(), 5.0);
        let max = ObjectiveSpec::parse_list("ec:max").unwrap();
        assert_eq!(scalarize(&p, &max, &[1.0], &[2.0]).unwrap(), -2.5);
        assert!(matches!(
            scalarize(&p, &two(), &[1.0], &[1.0, 1.0]),
            Err(CodesignError::DimensionMismatch { .. })
        ));
        assert!(scalarize(&p, &two(), &[1.0, 1.0], &[1.0, 0.0]).is_err());
    }

    fn space(entries: &[(&str, &[i64])]) -> BTreeMap<String, Vec<ParamValue>> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|&i| ParamValue::Int(i)).collect()))
            .collect()
    }

    #[test]
    fn sweep_examples() {
        let g = sweep_grid(&space(&[("n_times", &[1, 8]), ("n_chans", &[1, 8])])).unwrap();
        assert_eq!(g.len(), 4);
        // n_chans sorts first so it varies slowest
        let coords: Vec<(i64, i64)> = g
            .iter()
            .map(|p| match (&p.algo_params["n_chans"], &p.algo_params["n_times"]) {
                (ParamValue::Int(c), ParamValue::Int(t)) => (*c, *t),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(coords, [(1, 1), (1, 8), (8, 1), (8, 8)]);
        let ids: HashSet<_> = g.iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids.len(), 4);

        let campaign = sweep_grid(&space(&[
            ("n_times", &[1, 8, 64, 128, 256]),
            ("n_chans", &[1, 8, 64, 128, 256]),
            ("image_size", &[4096, 8192, 16384, 32768]),
        ]))
        .unwrap();
        assert_eq!(campaign.len(), 100);

        assert_eq!(sweep_grid(&space(&[("x", &[3])])).unwrap().len(), 1);
        assert!(matches!(
            sweep_grid(&space(&[("x", &[])])),
            Err(CodesignError::EmptyValues(_))
        ));
        assert!(matches!(sweep_grid(&BTreeMap::new()), Err(CodesignError::EmptySpace)));
    }

    #[test]
    fn sweep_ids_are_pinned() {
        let g = sweep_grid(&space(&[("n_times", &[1])])).unwrap();
        // sha256("n_times=1\n")
        let expected = {
            let d = Sha256::digest(b"n_times=1\n");
            format!("x-{}", &hex::encode(d)[..12])
        };
        assert_eq!(g[0].id, expected);
        let mut q = DesignPoint::default();
        q.algo_params.insert("n_times".into(), ParamValue::Float(1.0));
        assert_ne!(point_id(&q.coordinates()), g[0].id);
    }

    #[test]
    fn occupancy_examples() {
        assert_eq!(occupancy(0.25, 0.0, 0.0, 0.0).unwrap(), 12.5);
        assert_eq!(occupancy(0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((occupancy(0.5, 0.3, 0.2, 0.1).unwrap() - 35.0).abs() < 1e-12);
        assert!(occupancy(1.2, 0.0, 0.0, 0.0).is_err());
    }
}
