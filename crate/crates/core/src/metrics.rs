//! System- and platform-level run metrics: time, energy, throughput,
//! efficiency, utilisation, memory traffic and footprint, the static/dynamic
//! energy split, and thread-scaling deviation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::trace::{
    clip_to_window, idle_baseline, ActivityTrace, ItemUnit, LoadedTraces, MemoryTrace,
    PowerSource, PowerTrace, RunManifest, TraceError, Window,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("energy is zero; per-joule efficiency is undefined")]
    ZeroEnergy,
    #[error("no memory samples inside window [{t0}, {t1}]")]
    NoSamplesInWindow { t0: f64, t1: f64 },
    #[error("scaling curve has no 1-thread baseline")]
    MissingBaseline,
    #[error("invalid scaling curve: {0}")]
    InvalidCurve(String),
    #[error("run references no power trace")]
    NoPowerTrace,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub fn time_to_solution(manifest: &RunManifest) -> Result<f64, MetricError> {
    Ok(manifest.window()?.duration())
}

/// Trapezoidal energy in joules of `trace` over `window`.
pub fn energy_to_solution(trace: &PowerTrace, window: Window) -> Result<f64, MetricError> {
    clip_to_window(trace, window)?;
    Ok(trace.energy_over(window)?)
}

/// Items processed per second, tagged with the item unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub per_second: f64,
    pub unit: ItemUnit,
}

impl Throughput {
    /// Millions of items per hour (the Mvis/h convention).
    pub fn mega_per_hour(&self) -> f64 {
        self.per_second * 3600.0 / 1e6
    }
}

pub fn throughput(manifest: &RunManifest) -> Result<Throughput, MetricError> {
    let t_c = time_to_solution(manifest)?;
    Ok(Throughput {
        per_second: manifest.n_items / t_c,
        unit: manifest.n_items_unit,
    })
}

/// Items per joule.
pub fn energy_efficiency(n_items: f64, e_c: f64) -> Result<f64, MetricError> {
    if e_c == 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    if !(e_c > 0.0 && e_c.is_finite()) {
        return Err(MetricError::InvalidInput(format!("energy {e_c} J")));
    }
    Ok(n_items / e_c)
}

/// Time-weighted mean busy fraction of one device over `window`.
pub fn utilisation(trace: &ActivityTrace, window: Window) -> Result<f64, MetricError> {
    let busy = trace.busy_time_over(window)?;
    Ok((busy / window.duration()).clamp(0.0, 1.0))
}

/// Sustained bytes per second; `None` when no counter was recorded.
pub fn memory_bandwidth(bytes_moved: Option<u64>, t_c: f64) -> Option<f64> {
    bytes_moved.map(|b| b as f64 / t_c)
}

pub fn peak_memory(trace: &MemoryTrace, window: Window) -> Result<u64, MetricError> {
    trace
        .in_window(window)
        .map(|(_, b)| b)
        .max()
        .ok_or(MetricError::NoSamplesInWindow {
            t0: window.t0,
            t1: window.t1,
        })
}

/// Split of attributed energy into idle baseline, device-level active draw
/// and everything else. Summing as `(e_static + e_dynamic) + e_residual`
/// reproduces the attributed total bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDecomposition {
    pub e_static: f64,
    pub e_dynamic: f64,
    pub e_residual: f64,
}

impl EnergyDecomposition {
    /// Builds the split so that `total()` equals `e_total` exactly.
    ///
    /// The residual is chosen first; when no residual can close the sum
    /// (round-to-even ties), `e_dynamic` is moved by a few ulps, well below
    /// its own integration rounding error. Exactness needs
    /// `e_static + e_dynamic <= 2 * e_total`; past that the parts are on a
    /// coarser float grid than the total and the residual is best effort.
    pub fn close(e_total: f64, e_static: f64, e_dynamic: f64) -> Self {
        let mut dynamic = e_dynamic;
        for step in 0..16 {
            if let Some(r) = closing_residual(e_total, e_static + dynamic) {
                return Self {
                    e_static,
                    e_dynamic: dynamic,
                    e_residual: r,
                };
            }
            // 0, +1, -1, +2, -2, ... ulps around the measured value
            dynamic = e_dynamic;
            let k = step / 2 + 1;
            for _ in 0..k {
                dynamic = if step % 2 == 0 {
                    dynamic.next_up()
                } else {
                    dynamic.next_down()
                };
            }
        }
        Self {
            e_static,
            e_dynamic,
            e_residual: e_total - (e_static + e_dynamic),
        }
    }

    pub fn total(&self) -> f64 {
        (self.e_static + self.e_dynamic) + self.e_residual
    }

    /// Static fraction of the modelled (static + dynamic) energy.
    pub fn static_share(&self) -> f64 {
        self.e_static / (self.e_static + self.e_dynamic)
    }
}

/// Static energy is the node idle power scaled by the job's share of the node;
/// dynamic energy is the GPU integral plus the job's share of the CPU
/// integral; the residual closes against the share-scaled PDU integral.
pub fn decompose_static_dynamic(
    pdu: &PowerTrace,
    cpu: &PowerTrace,
    gpu: &PowerTrace,
    idle_pdu_power: f64,
    resource_fraction: f64,
    window: Window,
) -> Result<EnergyDecomposition, MetricError> {
    check_fraction(resource_fraction)?;
    if !(idle_pdu_power >= 0.0 && idle_pdu_power.is_finite()) {
        return Err(MetricError::InvalidInput(format!(
            "idle power {idle_pdu_power} W"
        )));
    }
    let e_total = resource_fraction * energy_to_solution(pdu, window)?;
    let e_static = resource_fraction * idle_pdu_power * window.duration();
    let e_dynamic =
        energy_to_solution(gpu, window)? + resource_fraction * energy_to_solution(cpu, window)?;
    Ok(EnergyDecomposition::close(e_total, e_static, e_dynamic))
}

fn closing_residual(total: f64, parts: f64) -> Option<f64> {
    let mut r = total - parts;
    for _ in 0..8 {
        let got = parts + r;
        if got == total {
            return Some(r);
        }
        r = if got < total { r.next_up() } else { r.next_down() };
    }
    None
}

fn check_fraction(f: f64) -> Result<(), MetricError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(MetricError::InvalidInput(format!(
            "resource fraction {f} outside (0, 1]"
        )))
    }
}

/// Runtime as a function of thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCurve {
    points: Vec<(u32, f64)>,
}

impl ScalingCurve {
    pub fn new(mut points: Vec<(u32, f64)>) -> Result<Self, MetricError> {
        points.sort_by_key(|p| p.0);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(MetricError::InvalidCurve(format!(
                    "duplicate thread count {}",
                    w[0].0
                )));
            }
        }
        if let Some(&(n, t)) = points
            .iter()
            .find(|&&(n, t)| n == 0 || !(t > 0.0 && t.is_finite()))
        {
            return Err(MetricError::InvalidCurve(format!(
                "bad point ({n} threads, {t} s)"
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub threads: u32,
    pub speedup: f64,
    /// `1 - speedup / threads`; 0 for ideal linear scaling.
    pub deviation: f64,
}

pub fn scaling_analysis(curve: &ScalingCurve) -> Result<Vec<ScalingPoint>, MetricError> {
    let base = curve
        .points
        .iter()
        .find(|p| p.0 == 1)
        .ok_or(MetricError::MissingBaseline)?
        .1;
    Ok(curve
        .points
        .iter()
        .map(|&(n, t)| {
            let speedup = base / t;
            ScalingPoint {
                threads: n,
                speedup,
                deviation: 1.0 - speedup / n as f64,
            }
        })
        .collect())
}

/// Per-device utilisation plus their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Utilisation {
    pub per_device: BTreeMap<String, f64>,
    pub aggregate: f64,
}

/// The computed metric set of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricVector {
    pub t_c: f64,
    pub e_c: f64,
    pub theta: f64,
    pub n_items: f64,
    pub unit: ItemUnit,
    pub eta_e: Option<f64>,
    pub u: Option<Utilisation>,
    pub b_mem: Option<f64>,
    pub m_peak: Option<u64>,
    pub p_avg: f64,
    pub decomposition: Option<EnergyDecomposition>,
}

fn sum_energy<'a>(
    traces: impl Iterator<Item = &'a PowerTrace>,
    window: Window,
) -> Result<Option<f64>, MetricError> {
    let mut total = None;
    for tr in traces {
        *total.get_or_insert(0.0) += energy_to_solution(tr, window)?;
    }
    Ok(total)
}

/// Evaluates every metric available from a manifest and its parsed traces.
///
/// Energy is attributed as `resource_fraction` times the PDU integral. Without
/// a PDU trace the attributed energy falls back to GPU + fraction*CPU + other
/// device integrals. The decomposition needs a PDU trace, an idle baseline
/// from the manifest and at least one CPU or GPU trace.
pub fn compute_metric_vector(
    manifest: &RunManifest,
    traces: &LoadedTraces,
) -> Result<MetricVector, MetricError> {
    let window = manifest.window()?;
    let frac = manifest.resource_fraction;
    check_fraction(frac)?;
    let t_c = window.duration();

    let by_source = |src: PowerSource| {
        traces
            .power
            .iter()
            .map(|(_, t)| t)
            .filter(move |t| *t.source() == src)
    };
    let pdu = sum_energy(by_source(PowerSource::Pdu), window)?;
    let cpu = sum_energy(by_source(PowerSource::Cpu), window)?;
    let gpu = sum_energy(by_source(PowerSource::Gpu), window)?;
    let other = sum_energy(
        traces
            .power
            .iter()
            .map(|(_, t)| t)
            .filter(|t| matches!(t.source(), PowerSource::Other(_))),
        window,
    )?;
    let device_dynamic = match (cpu, gpu) {
        (None, None) => None,
        (c, g) => Some(g.unwrap_or(0.0) + frac * c.unwrap_or(0.0)),
    };

    let e_c = match pdu {
        Some(p) => frac * p,
        None => match (device_dynamic, other) {
            (None, None) => return Err(MetricError::NoPowerTrace),
            (d, o) => d.unwrap_or(0.0) + o.unwrap_or(0.0),
        },
    };

    let decomposition = match (pdu, device_dynamic, &manifest.idle) {
        (Some(_), Some(dynamic), Some(idle)) => {
            let idle_w = match (idle.power_w, idle.window_s) {
                (Some(p), _) => p,
                (None, Some([a, b])) => {
                    let w = Window::new(a, b)?;
                    let mut sum = 0.0;
                    for tr in by_source(PowerSource::Pdu) {
                        sum += idle_baseline(tr, w)?;
                    }
                    sum
                }
                (None, None) => {
                    return Err(MetricError::InvalidInput("idle spec is empty".into()))
                }
            };
            Some(EnergyDecomposition::close(
                e_c,
                frac * idle_w * t_c,
                dynamic,
            ))
        }
        _ => None,
    };

    let u = if traces.activity.is_empty() {
        None
    } else {
        let mut per_device = BTreeMap::new();
        for (_, a) in &traces.activity {
            per_device.insert(a.device().to_string(), utilisation(a, window)?);
        }
        let aggregate = per_device.values().sum::<f64>() / per_device.len() as f64;
        Some(Utilisation {
            per_device,
            aggregate,
        })
    };

    let m_peak = traces
        .memory
        .iter()
        .map(|(_, m)| peak_memory(m, window))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max();

    Ok(MetricVector {
        t_c,
        e_c,
        theta: manifest.n_items / t_c,
        n_items: manifest.n_items,
        unit: manifest.n_items_unit,
        eta_e: (e_c > 0.0).then(|| manifest.n_items / e_c),
        u,
        b_mem: memory_bandwidth(manifest.bytes_moved, t_c),
        m_peak,
        p_avg: e_c / t_c,
        decomposition,
    })
}
