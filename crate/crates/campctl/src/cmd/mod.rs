pub mod facility;
pub mod metrics;
pub mod pareto;
pub mod quality;
pub mod sweep;
