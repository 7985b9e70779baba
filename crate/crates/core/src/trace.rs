//! Recorded telemetry: power, activity and memory traces plus the run manifest
//! that ties them to one benchmark execution.
//!
//! Samples are interpreted as point samples joined by straight lines, so every
//! integral below is an exact trapezoid sum over the (clipped) sample set.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gaps wider than this multiple of the median sampling interval are flagged.
pub const GAP_FACTOR: f64 = 10.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: empty trace (no data rows)")]
    Empty { file: String },
    #[error("{file}: row {row}: {message}")]
    Malformed {
        file: String,
        row: usize,
        message: String,
    },
    #[error("{file}: row {row}: non-monotone timestamp {t} after {prev}")]
    NonMonotone {
        file: String,
        row: usize,
        prev: f64,
        t: f64,
    },
    #[error("{file}: row {row}: negative power {value} W")]
    NegativePower { file: String, row: usize, value: f64 },
    #[error("{file}: row {row}: value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        file: String,
        row: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("trace has {count} sample(s); at least 2 are needed")]
    TooFewSamples { count: usize },
    #[error("invalid window [{t0}, {t1}]")]
    InvalidWindow { t0: f64, t1: f64 },
    #[error("window [{t0}, {t1}] does not overlap trace support [{start}, {end}]")]
    Disjoint {
        t0: f64,
        t1: f64,
        start: f64,
        end: f64,
    },
    #[error("window [{t0}, {t1}] is not fully covered by trace support [{start}, {end}]")]
    NotCovered {
        t0: f64,
        t1: f64,
        start: f64,
        end: f64,
    },
    #[error("window [{t0}, {t1}] contains {count} sample(s); at least {needed} required")]
    SparseWindow {
        t0: f64,
        t1: f64,
        count: usize,
        needed: usize,
    },
    #[error("grid step must be positive and finite, got {0}")]
    InvalidGridStep(f64),
    #[error("traces have no common time window")]
    NoOverlap,
    #[error("{file}: gap of {gap} s at t={at} exceeds {factor}x the median interval {median} s")]
    Gap {
        file: String,
        at: f64,
        gap: f64,
        median: f64,
        factor: f64,
    },
    #[error("manifest {file}: {message}")]
    Manifest { file: String, message: String },
}

/// Origin of a power measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PowerSource {
    Pdu,
    Cpu,
    Gpu,
    Other(String),
}

impl FromStr for PowerSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "pdu" => Self::Pdu,
            "cpu" => Self::Cpu,
            "gpu" => Self::Gpu,
            _ => Self::Other(s.trim().to_string()),
        })
    }
}

impl fmt::Display for PowerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pdu => f.write_str("pdu"),
            Self::Cpu => f.write_str("cpu"),
            Self::Gpu => f.write_str("gpu"),
            Self::Other(label) => f.write_str(label),
        }
    }
}

/// One point sample of a real-valued signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
}

impl Sample {
    pub fn new(t: f64, value: f64) -> Self {
        Self { t, value }
    }
}

/// A closed time interval `[t0, t1]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t0: f64,
    pub t1: f64,
}

impl Window {
    pub fn new(t0: f64, t1: f64) -> Result<Self, TraceError> {
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(TraceError::InvalidWindow { t0, t1 });
        }
        Ok(Self { t0, t1 })
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

// Piecewise-linear helpers shared by power and activity traces. Callers
// guarantee `pts` is sorted by time and non-empty.

fn value_at(pts: &[Sample], t: f64) -> f64 {
    // index of first sample strictly after t
    let hi = pts.partition_point(|s| s.t <= t);
    if hi == 0 {
        return pts[0].value;
    }
    let left = pts[hi - 1];
    if left.t == t || hi == pts.len() {
        return left.value;
    }
    let right = pts[hi];
    let frac = (t - left.t) / (right.t - left.t);
    left.value + frac * (right.value - left.value)
}

fn trapezoid(pts: &[Sample]) -> f64 {
    pts.windows(2)
        .map(|w| 0.5 * (w[0].value + w[1].value) * (w[1].t - w[0].t))
        .sum()
}

fn clip_samples(pts: &[Sample], w: Window) -> Vec<Sample> {
    let (start, end) = (pts[0].t, pts[pts.len() - 1].t);
    let t0 = w.t0.max(start);
    let t1 = w.t1.min(end);
    let mut out = Vec::with_capacity(pts.len());
    out.push(Sample::new(t0, value_at(pts, t0)));
    out.extend(pts.iter().copied().filter(|s| s.t > t0 && s.t < t1));
    out.push(Sample::new(t1, value_at(pts, t1)));
    out
}

fn check_overlap(pts: &[Sample], w: Window) -> Result<(), TraceError> {
    let (start, end) = (pts[0].t, pts[pts.len() - 1].t);
    if w.t1.min(end) <= w.t0.max(start) {
        return Err(TraceError::Disjoint {
            t0: w.t0,
            t1: w.t1,
            start,
            end,
        });
    }
    Ok(())
}

fn check_covered(pts: &[Sample], w: Window) -> Result<(), TraceError> {
    if pts.len() < 2 {
        return Err(TraceError::TooFewSamples { count: pts.len() });
    }
    let (start, end) = (pts[0].t, pts[pts.len() - 1].t);
    if w.t0 < start || w.t1 > end {
        return Err(TraceError::NotCovered {
            t0: w.t0,
            t1: w.t1,
            start,
            end,
        });
    }
    Ok(())
}

fn integral_over(pts: &[Sample], w: Window) -> Result<f64, TraceError> {
    check_covered(pts, w)?;
    Ok(trapezoid(&clip_samples(pts, w)))
}

fn median_interval(pts: &[Sample]) -> Option<f64> {
    let mut dts: Vec<f64> = pts.windows(2).map(|w| w[1].t - w[0].t).collect();
    if dts.is_empty() {
        return None;
    }
    dts.sort_by(f64::total_cmp);
    let mid = dts.len() / 2;
    Some(if dts.len() % 2 == 1 {
        dts[mid]
    } else {
        0.5 * (dts[mid - 1] + dts[mid])
    })
}

/// A sampling gap wider than [`GAP_FACTOR`] times the median interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub at: f64,
    pub width: f64,
    pub median: f64,
}

fn find_gaps(pts: &[Sample]) -> Vec<Gap> {
    let Some(median) = median_interval(pts) else {
        return Vec::new();
    };
    if median <= 0.0 {
        return Vec::new();
    }
    pts.windows(2)
        .filter_map(|w| {
            let width = w[1].t - w[0].t;
            (width > GAP_FACTOR * median).then_some(Gap {
                at: w[0].t,
                width,
                median,
            })
        })
        .collect()
}

/// Instantaneous power samples from one source, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    source: PowerSource,
    samples: Vec<Sample>,
}

impl PowerTrace {
    /// Validates and builds a trace. Equal timestamps collapse to the last
    /// sample given; decreasing timestamps, negative or non-finite power are
    /// rejected with a 1-based row index.
    pub fn new(source: PowerSource, samples: Vec<Sample>) -> Result<Self, TraceError> {
        Self::validated("<memory>", source, samples)
    }

    fn validated(
        file: &str,
        source: PowerSource,
        samples: Vec<Sample>,
    ) -> Result<Self, TraceError> {
        let mut out: Vec<Sample> = Vec::with_capacity(samples.len());
        for (i, s) in samples.into_iter().enumerate() {
            let row = i + 1;
            if !s.t.is_finite() || !s.value.is_finite() {
                return Err(TraceError::Malformed {
                    file: file.to_string(),
                    row,
                    message: "non-finite value".into(),
                });
            }
            if s.value < 0.0 {
                return Err(TraceError::NegativePower {
                    file: file.to_string(),
                    row,
                    value: s.value,
                });
            }
            match out.last_mut() {
                Some(prev) if s.t < prev.t => {
                    return Err(TraceError::NonMonotone {
                        file: file.to_string(),
                        row,
                        prev: prev.t,
                        t: s.t,
                    })
                }
                Some(prev) if s.t == prev.t => *prev = s,
                _ => out.push(s),
            }
        }
        Ok(Self {
            source,
            samples: out,
        })
    }

    pub fn source(&self) -> &PowerSource {
        &self.source
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(first, last)` timestamp, if any samples exist.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Linearly interpolated power at `t`, held constant outside the support.
    pub fn power_at(&self, t: f64) -> Option<f64> {
        (!self.samples.is_empty()).then(|| value_at(&self.samples, t))
    }

    /// Trapezoidal energy in joules over the full trace.
    pub fn energy(&self) -> Result<f64, TraceError> {
        if self.samples.len() < 2 {
            return Err(TraceError::TooFewSamples {
                count: self.samples.len(),
            });
        }
        Ok(trapezoid(&self.samples))
    }

    /// Trapezoidal energy in joules over `window`, which must lie inside the support.
    pub fn energy_over(&self, window: Window) -> Result<f64, TraceError> {
        integral_over(&self.samples, window)
    }

    pub fn gaps(&self) -> Vec<Gap> {
        find_gaps(&self.samples)
    }

    /// Writes the trace in the `timestamp_s,power_w,source` CSV layout.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["timestamp_s", "power_w", "source"])?;
        let source = self.source.to_string();
        for s in &self.samples {
            wtr.write_record([s.t.to_string(), s.value.to_string(), source.clone()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-device busy fraction samples. Equal timestamps are allowed so that
/// step changes can be expressed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityTrace {
    device: String,
    samples: Vec<Sample>,
}

impl ActivityTrace {
    pub fn new(device: impl Into<String>, samples: Vec<Sample>) -> Result<Self, TraceError> {
        Self::validated("<memory>", device.into(), samples)
    }

    fn validated(file: &str, device: String, samples: Vec<Sample>) -> Result<Self, TraceError> {
        for (i, s) in samples.iter().enumerate() {
            let row = i + 1;
            if !s.t.is_finite() || !s.value.is_finite() {
                return Err(TraceError::Malformed {
                    file: file.to_string(),
                    row,
                    message: "non-finite value".into(),
                });
            }
            if !(0.0..=1.0).contains(&s.value) {
                return Err(TraceError::OutOfRange {
                    file: file.to_string(),
                    row,
                    value: s.value,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            if i > 0 && s.t < samples[i - 1].t {
                return Err(TraceError::NonMonotone {
                    file: file.to_string(),
                    row,
                    prev: samples[i - 1].t,
                    t: s.t,
                });
            }
        }
        Ok(Self { device, samples })
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Time integral of the busy fraction over `window` (busy-seconds).
    pub fn busy_time_over(&self, window: Window) -> Result<f64, TraceError> {
        integral_over(&self.samples, window)
    }
}

/// Resident memory samples for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryTrace {
    device: String,
    samples: Vec<(f64, u64)>,
}

impl MemoryTrace {
    pub fn new(device: impl Into<String>, samples: Vec<(f64, u64)>) -> Result<Self, TraceError> {
        Self::validated("<memory>", device.into(), samples)
    }

    fn validated(
        file: &str,
        device: String,
        samples: Vec<(f64, u64)>,
    ) -> Result<Self, TraceError> {
        for (i, &(t, _)) in samples.iter().enumerate() {
            if !t.is_finite() {
                return Err(TraceError::Malformed {
                    file: file.to_string(),
                    row: i + 1,
                    message: "non-finite timestamp".into(),
                });
            }
            if i > 0 && t < samples[i - 1].0 {
                return Err(TraceError::NonMonotone {
                    file: file.to_string(),
                    row: i + 1,
                    prev: samples[i - 1].0,
                    t,
                });
            }
        }
        Ok(Self { device, samples })
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn samples(&self) -> &[(f64, u64)] {
        &self.samples
    }

    /// Samples whose timestamps fall inside the closed window.
    pub fn in_window(&self, window: Window) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.samples
            .iter()
            .copied()
            .filter(move |&(t, _)| t >= window.t0 && t <= window.t1)
    }
}

/// Restricts `trace` to `[t0, t1]`, synthesising interpolated boundary samples.
/// A window only partly inside the support is cut to the overlap.
pub fn clip_to_window(trace: &PowerTrace, window: Window) -> Result<PowerTrace, TraceError> {
    if trace.samples.len() < 2 {
        return Err(TraceError::TooFewSamples {
            count: trace.samples.len(),
        });
    }
    check_overlap(&trace.samples, window)?;
    Ok(PowerTrace {
        source: trace.source.clone(),
        samples: clip_samples(&trace.samples, window),
    })
}

/// Resamples every trace onto one uniform grid spanning their common window.
/// The grid is `t0 + k * step` and always ends exactly on the window end.
pub fn align_traces(traces: &[PowerTrace], step: f64) -> Result<Vec<PowerTrace>, TraceError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(TraceError::InvalidGridStep(step));
    }
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for tr in traces {
        let (s, e) = tr.span().ok_or(TraceError::NoOverlap)?;
        t0 = t0.max(s);
        t1 = t1.min(e);
    }
    if traces.is_empty() || t1 <= t0 {
        return Err(TraceError::NoOverlap);
    }
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let t = t0 + k as f64 * step;
        if t >= t1 {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(t1);
    Ok(traces
        .iter()
        .map(|tr| PowerTrace {
            source: tr.source.clone(),
            samples: grid
                .iter()
                .map(|&t| Sample::new(t, value_at(&tr.samples, t)))
                .collect(),
        })
        .collect())
}

/// Time-weighted mean power over `window`; needs at least two recorded samples
/// inside it.
pub fn idle_baseline(trace: &PowerTrace, window: Window) -> Result<f64, TraceError> {
    check_covered(&trace.samples, window)?;
    let count = trace
        .samples
        .iter()
        .filter(|s| s.t >= window.t0 && s.t <= window.t1)
        .count();
    if count < 2 {
        return Err(TraceError::SparseWindow {
            t0: window.t0,
            t1: window.t1,
            count,
            needed: 2,
        });
    }
    Ok(trace.energy_over(window)? / window.duration())
}

// ---------------------------------------------------------------------------
// CSV ingestion

fn open(path: &Path) -> Result<File, TraceError> {
    File::open(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_f64(file: &str, row: usize, field: &str, what: &str) -> Result<f64, TraceError> {
    field.trim().parse::<f64>().map_err(|_| TraceError::Malformed {
        file: file.to_string(),
        row,
        message: format!("cannot parse {what} from {field:?}"),
    })
}

/// Reads records after validating the header's leading column names.
fn read_rows<R: Read>(
    file: &str,
    rdr: R,
    expected: &[&str],
    max_cols: usize,
) -> Result<Vec<csv::StringRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(rdr);
    let headers = rdr.headers().map_err(|e| TraceError::Malformed {
        file: file.to_string(),
        row: 0,
        message: e.to_string(),
    })?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found.len() < expected.len() || found[..expected.len()] != *expected {
        return Err(TraceError::Malformed {
            file: file.to_string(),
            row: 0,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| TraceError::Malformed {
            file: file.to_string(),
            row,
            message: e.to_string(),
        })?;
        if rec.len() < expected.len() || rec.len() > max_cols {
            return Err(TraceError::Malformed {
                file: file.to_string(),
                row,
                message: format!("expected {} to {max_cols} columns, found {}", expected.len(), rec.len()),
            });
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(TraceError::Empty {
            file: file.to_string(),
        });
    }
    Ok(rows)
}

/// Parses a `timestamp_s,power_w[,source]` CSV. A per-row source label, when
/// present, must agree with `source`.
pub fn read_power_csv<R: Read>(
    file: &str,
    rdr: R,
    source: PowerSource,
) -> Result<PowerTrace, TraceError> {
    let rows = read_rows(file, rdr, &["timestamp_s", "power_w"], 3)?;
    let mut samples = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let row = i + 1;
        let t = parse_f64(file, row, &rec[0], "timestamp")?;
        let p = parse_f64(file, row, &rec[1], "power")?;
        if let Some(label) = rec.get(2) {
            let row_source: PowerSource = label.parse().unwrap_or_else(|e| match e {});
            if row_source != source {
                return Err(TraceError::Malformed {
                    file: file.to_string(),
                    row,
                    message: format!("source {row_source} does not match declared {source}"),
                });
            }
        }
        samples.push(Sample::new(t, p));
    }
    PowerTrace::validated(file, source, samples)
}

pub fn ingest_power_trace(path: &Path, source: PowerSource) -> Result<PowerTrace, TraceError> {
    read_power_csv(&path.display().to_string(), open(path)?, source)
}

pub fn read_activity_csv<R: Read>(
    file: &str,
    rdr: R,
    device: &str,
) -> Result<ActivityTrace, TraceError> {
    let rows = read_rows(file, rdr, &["timestamp_s", "busy"], 2)?;
    let samples = rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            Ok(Sample::new(
                parse_f64(file, i + 1, &rec[0], "timestamp")?,
                parse_f64(file, i + 1, &rec[1], "busy fraction")?,
            ))
        })
        .collect::<Result<Vec<_>, TraceError>>()?;
    ActivityTrace::validated(file, device.to_string(), samples)
}

pub fn ingest_activity_trace(path: &Path, device: &str) -> Result<ActivityTrace, TraceError> {
    read_activity_csv(&path.display().to_string(), open(path)?, device)
}

pub fn read_memory_csv<R: Read>(
    file: &str,
    rdr: R,
    device: &str,
) -> Result<MemoryTrace, TraceError> {
    let rows = read_rows(file, rdr, &["timestamp_s", "mem_bytes"], 2)?;
    let samples = rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let t = parse_f64(file, i + 1, &rec[0], "timestamp")?;
            let bytes = rec[1].trim().parse::<u64>().map_err(|_| TraceError::Malformed {
                file: file.to_string(),
                row: i + 1,
                message: format!("cannot parse non-negative byte count from {:?}", &rec[1]),
            })?;
            Ok((t, bytes))
        })
        .collect::<Result<Vec<_>, TraceError>>()?;
    MemoryTrace::validated(file, device.to_string(), samples)
}

pub fn ingest_memory_trace(path: &Path, device: &str) -> Result<MemoryTrace, TraceError> {
    read_memory_csv(&path.display().to_string(), open(path)?, device)
}

// ---------------------------------------------------------------------------
// Run manifest

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemUnit {
    Visibilities,
    Images,
    Pixels,
}

impl fmt::Display for ItemUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Visibilities => "visibilities",
            Self::Images => "images",
            Self::Pixels => "pixels",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Power,
    Activity,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRef {
    pub path: PathBuf,
    pub kind: TraceKind,
    /// Power source (`pdu`, `cpu`, `gpu`, label) or device label.
    pub source: String,
}

/// How the idle power used for the static-energy baseline is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdleSpec {
    /// Directly supplied idle power of the whole node, in watts.
    #[serde(default)]
    pub power_w: Option<f64>,
    /// Window of the PDU trace over which the node sat idle.
    #[serde(default)]
    pub window_s: Option<[f64; 2]>,
}

/// One benchmark execution as described by its JSON manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub n_items: f64,
    pub n_items_unit: ItemUnit,
    #[serde(default)]
    pub config: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub traces: Vec<TraceRef>,
    pub resource_fraction: f64,
    #[serde(default)]
    pub bytes_moved: Option<u64>,
    #[serde(default)]
    pub platform: String,
    #[serde(default)]
    pub idle: Option<IdleSpec>,
}

impl RunManifest {
    pub fn window(&self) -> Result<Window, TraceError> {
        Window::new(self.t_start_s, self.t_end_s)
    }

    /// Checks the scalar invariants; trace files are checked by [`Self::load_traces`].
    pub fn validate(&self, file: &str) -> Result<(), TraceError> {
        let bad = |message: String| TraceError::Manifest {
            file: file.to_string(),
            message,
        };
        if self.run_id.trim().is_empty() {
            return Err(bad("run_id is empty".into()));
        }
        if !(self.t_start_s.is_finite() && self.t_end_s.is_finite()) {
            return Err(bad("non-finite start/end time".into()));
        }
        if self.t_end_s <= self.t_start_s {
            return Err(bad(format!(
                "t_end_s ({}) must exceed t_start_s ({})",
                self.t_end_s, self.t_start_s
            )));
        }
        if !(self.n_items.is_finite() && self.n_items > 0.0) {
            return Err(bad(format!("n_items must be positive, got {}", self.n_items)));
        }
        if !(self.resource_fraction > 0.0 && self.resource_fraction <= 1.0) {
            return Err(bad(format!(
                "resource_fraction must lie in (0, 1], got {}",
                self.resource_fraction
            )));
        }
        if let Some(idle) = &self.idle {
            match (idle.power_w, idle.window_s) {
                (Some(p), None) if p.is_finite() && p >= 0.0 => {}
                (None, Some([a, b])) if a.is_finite() && b.is_finite() && a < b => {}
                _ => {
                    return Err(bad(
                        "idle must give exactly one of power_w >= 0 or window_s [t0, t1]".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn from_json(file: &str, text: &str) -> Result<Self, TraceError> {
        let m: Self = serde_json::from_str(text).map_err(|e| TraceError::Manifest {
            file: file.to_string(),
            message: e.to_string(),
        })?;
        m.validate(file)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&path.display().to_string(), &text)
    }

    /// Parses every referenced trace, resolving relative paths against `base`.
    /// Files are parsed in parallel; the result keeps manifest order.
    pub fn load_traces(&self, base: &Path) -> Result<LoadedTraces, TraceError> {
        let parsed: Vec<Loaded> = self
            .traces
            .par_iter()
            .map(|r| {
                let path = base.join(&r.path);
                Ok(match r.kind {
                    TraceKind::Power => Loaded::Power(ingest_power_trace(
                        &path,
                        r.source.parse().unwrap_or_else(|e| match e {}),
                    )?),
                    TraceKind::Activity => {
                        Loaded::Activity(ingest_activity_trace(&path, &r.source)?)
                    }
                    TraceKind::Memory => Loaded::Memory(ingest_memory_trace(&path, &r.source)?),
                })
            })
            .collect::<Result<_, TraceError>>()?;
        let mut out = LoadedTraces::default();
        for (r, l) in self.traces.iter().zip(parsed) {
            let path = base.join(&r.path);
            match l {
                Loaded::Power(p) => out.power.push((path, p)),
                Loaded::Activity(a) => out.activity.push((path, a)),
                Loaded::Memory(m) => out.memory.push((path, m)),
            }
        }
        Ok(out)
    }
}

enum Loaded {
    Power(PowerTrace),
    Activity(ActivityTrace),
    Memory(MemoryTrace),
}

/// Traces referenced by a manifest, each paired with its resolved path.
#[derive(Debug, Clone, Default)]
pub struct LoadedTraces {
    pub power: Vec<(PathBuf, PowerTrace)>,
    pub activity: Vec<(PathBuf, ActivityTrace)>,
    pub memory: Vec<(PathBuf, MemoryTrace)>,
}

impl LoadedTraces {
    /// Gap warnings for every power trace, as `(path, gap)` pairs.
    pub fn gaps(&self) -> Vec<(PathBuf, Gap)> {
        self.power
            .iter()
            .flat_map(|(p, tr)| tr.gaps().into_iter().map(move |g| (p.clone(), g)))
            .collect()
    }

    /// Errors on the first gap when `strict` is set.
    pub fn check_gaps(&self, strict: bool) -> Result<Vec<(PathBuf, Gap)>, TraceError> {
        let gaps = self.gaps();
        if strict {
            if let Some((p, g)) = gaps.first() {
                return Err(TraceError::Gap {
                    file: p.display().to_string(),
                    at: g.at,
                    gap: g.width,
                    median: g.median,
                    factor: GAP_FACTOR,
                });
            }
        }
        Ok(gaps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(pts: &[(f64, f64)]) -> PowerTrace {
        PowerTrace::new(
            PowerSource::Pdu,
            pts.iter().map(|&(t, v)| Sample::new(t, v)).collect(),
        )
        .unwrap()
    }

    fn parse(csv: &str) -> Result<PowerTrace, TraceError> {
        read_power_csv("t.csv", csv.as_bytes(), PowerSource::Pdu)
    }

    #[test]
    fn ingest_minimal() {
        let tr = parse("timestamp_s,power_w,source\n0,100,pdu\n10,100,pdu\n").unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.span(), Some((0.0, 10.0)));
    }

    #[test]
    fn ingest_rejects_non_monotone_with_row() {
        let err = parse("timestamp_s,power_w\n5,1\n3,1\n").unwrap_err();
        assert!(matches!(err, TraceError::NonMonotone { row: 2, .. }), "{err}");
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn ingest_dedup_keeps_last() {
        let tr = parse("timestamp_s,power_w\n0,100\n0,120\n").unwrap();
        assert_eq!(tr.samples(), &[Sample::new(0.0, 120.0)]);
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            parse("timestamp_s,power_w\n0,-1\n").unwrap_err(),
            TraceError::NegativePower { row: 1, .. }
        ));
        assert!(matches!(
            parse("timestamp_s,power_w\n").unwrap_err(),
            TraceError::Empty { .. }
        ));
        assert!(matches!(
            parse("timestamp_s,power_w\n0,abc\n").unwrap_err(),
            TraceError::Malformed { row: 1, .. }
        ));
        assert!(matches!(
            parse("timestamp_s,power_w\n0,1\n1\n").unwrap_err(),
            TraceError::Malformed { row: 2, .. }
        ));
        assert!(matches!(
            parse("time,watts\n0,1\n").unwrap_err(),
            TraceError::Malformed { row: 0, .. }
        ));
        assert!(matches!(
            parse("timestamp_s,power_w,source\n0,1,gpu\n").unwrap_err(),
            TraceError::Malformed { row: 1, .. }
        ));
    }

    #[test]
    fn clip_interpolates_boundary() {
        let tr = power(&[(0.0, 0.0), (10.0, 100.0)]);
        let c = clip_to_window(&tr, Window::new(0.0, 5.0).unwrap()).unwrap();
        assert_eq!(c.samples(), &[Sample::new(0.0, 0.0), Sample::new(5.0, 50.0)]);
    }

    #[test]
    fn clip_identity_and_disjoint() {
        let tr = power(&[(0.0, 3.0), (4.0, 7.0), (10.0, 1.0)]);
        let same = clip_to_window(&tr, Window::new(0.0, 10.0).unwrap()).unwrap();
        assert_eq!(same, tr);
        assert!(matches!(
            clip_to_window(&tr, Window::new(20.0, 30.0).unwrap()),
            Err(TraceError::Disjoint { .. })
        ));
    }

    #[test]
    fn align_examples() {
        let a = power(&[(0.0, 100.0), (10.0, 100.0)]);
        let b = power(&[(0.0, 100.0), (3.0, 100.0), (10.0, 100.0)]);
        let out = align_traces(&[a, b], 1.0).unwrap();
        assert_eq!(out[0].samples(), out[1].samples());
        assert_eq!(out[0].len(), 11);
        assert!(out[0].samples().iter().all(|s| s.value == 100.0));

        let ramp = power(&[(0.0, 0.0), (10.0, 100.0)]);
        let out = align_traces(&[ramp], 5.0).unwrap();
        assert_eq!(
            out[0].samples(),
            &[
                Sample::new(0.0, 0.0),
                Sample::new(5.0, 50.0),
                Sample::new(10.0, 100.0)
            ]
        );

        let early = power(&[(0.0, 1.0), (10.0, 1.0)]);
        let late = power(&[(20.0, 1.0), (30.0, 1.0)]);
        assert!(matches!(
            align_traces(&[early, late], 1.0),
            Err(TraceError::NoOverlap)
        ));
    }

    #[test]
    fn align_rejects_bad_step() {
        let a = power(&[(0.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(
            align_traces(&[a], 0.0),
            Err(TraceError::InvalidGridStep(_))
        ));
    }

    #[test]
    fn idle_baseline_examples() {
        let flat = power(&[(0.0, 400.0), (5.0, 400.0), (10.0, 400.0)]);
        assert_eq!(idle_baseline(&flat, Window::new(0.0, 10.0).unwrap()).unwrap(), 400.0);
        let ramp = power(&[(0.0, 0.0), (10.0, 100.0)]);
        assert_eq!(idle_baseline(&ramp, Window::new(0.0, 10.0).unwrap()).unwrap(), 50.0);
        assert!(idle_baseline(&ramp, Window::new(100.0, 110.0).unwrap()).is_err());
        assert!(matches!(
            idle_baseline(&ramp, Window::new(2.0, 8.0).unwrap()),
            Err(TraceError::SparseWindow { count: 0, .. })
        ));
    }

    #[test]
    fn gap_detection() {
        let tr = power(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (20.0, 1.0)]);
        let gaps = tr.gaps();
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].at, 3.0);
        assert_eq!(gaps[0].width, 17.0);
    }

    #[test]
    fn activity_allows_steps() {
        let a = ActivityTrace::new(
            "gpu0",
            vec![
                Sample::new(0.0, 1.0),
                Sample::new(5.0, 1.0),
                Sample::new(5.0, 0.0),
                Sample::new(10.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(a.busy_time_over(Window::new(0.0, 10.0).unwrap()).unwrap(), 5.0);
        assert!(ActivityTrace::new("x", vec![Sample::new(0.0, 1.5)]).is_err());
    }

    #[test]
    fn memory_csv() {
        let m = read_memory_csv("m.csv", "timestamp_s,mem_bytes\n0,10\n1,20\n".as_bytes(), "host")
            .unwrap();
        assert_eq!(m.samples(), &[(0.0, 10), (1.0, 20)]);
        assert!(read_memory_csv("m.csv", "timestamp_s,mem_bytes\n0,-10\n".as_bytes(), "h").is_err());
    }

    #[test]
    fn manifest_validation() {
        let good = r#"{"run_id":"r1","t_start_s":0,"t_end_s":100,"n_items":10,
            "n_items_unit":"visibilities","config":{},"traces":[],
            "resource_fraction":0.25,"platform":"x"}"#;
        let m = RunManifest::from_json("m.json", good).unwrap();
        assert_eq!(m.window().unwrap().duration(), 100.0);
        assert_eq!(m.bytes_moved, None);

        let bad_time = good.replace("\"t_end_s\":100", "\"t_end_s\":0");
        assert!(RunManifest::from_json("m.json", &bad_time).is_err());
        let bad_frac = good.replace("0.25", "1.5");
        assert!(RunManifest::from_json("m.json", &bad_frac).is_err());
        let bad_items = good.replace("\"n_items\":10", "\"n_items\":0");
        assert!(RunManifest::from_json("m.json", &bad_items).is_err());
    }
}
