//! Metrics and co-design analysis for imaging-pipeline benchmarks.
//!
//! * [`trace`]: telemetry ingestion, clipping, alignment, idle baselines.
//! * [`metrics`]: time/energy/throughput/efficiency metrics and the
//!   static/dynamic energy split.
//! * [`quality`]: image fidelity metrics and the scalar quality loss.
//! * [`econ`]: carbon, cost, embodied-carbon and facility-efficiency models.
//! * [`codesign`]: design points, constraints, Pareto fronts and sweeps.
//! * [`report`]: deterministic JSON records.

pub mod codesign;
pub mod econ;
pub mod metrics;
pub mod quality;
pub mod report;
pub mod trace;

pub use codesign::{
    feasibility_filter, occupancy, pareto_front, scalarize, sweep_grid, ConstraintSet,
    DesignPoint, Direction, Objective, ObjectiveSpec, ParamValue, ParetoFront,
};
pub use econ::{
    annual_emissions, carbon_efficiency, carbon_to_solution, econ_vector, efficiency_band,
    embodied_share, facility_efficiency, AssetModel, CarbonIntensity, EconVector,
    FacilityScenario, SiteProfile,
};
pub use metrics::{
    decompose_static_dynamic, energy_to_solution, scaling_analysis, MetricVector, ScalingCurve,
};
pub use quality::{dirty_rms, psnr, ssim, ImageGrid, QualityVector, SourceCatalog};
pub use trace::{PowerSource, PowerTrace, RunManifest, Sample, Window};
