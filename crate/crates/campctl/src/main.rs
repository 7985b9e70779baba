//! `campctl`: turns run manifests and traces into metric, carbon, cost and
//! quality reports, and ranks design points by Pareto dominance.
//!
//! Exit codes: 0 success, 2 invalid input, 3 empty feasible set, 1 internal
//! error. Failures print a JSON object on standard error.

mod cmd;
mod config;
mod error;
mod output;
mod svg;

use clap::{Parser, Subcommand};

use cmd::{facility, metrics, pareto, quality, sweep};
use error::Failure;

#[derive(Debug, Parser)]
#[command(name = "campctl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time, energy, carbon and cost metrics of one run.
    Metrics(metrics::MetricsArgs),
    /// Image-fidelity metrics and quality loss.
    Quality(quality::QualityArgs),
    /// Feasibility filtering and Pareto front over run directories.
    Pareto(pareto::ParetoArgs),
    /// Required compute-node efficiency band of a power-capped facility.
    Facility(facility::FacilityArgs),
    /// Expands a parameter space and checks which points have results.
    Sweep(sweep::SweepArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            report(&Failure::Validation(anyhow::anyhow!("{}", e.kind())));
        }
    };
    let result = match &cli.command {
        Command::Metrics(a) => metrics::run(a),
        Command::Quality(a) => quality::run(a),
        Command::Pareto(a) => pareto::run(a),
        Command::Facility(a) => facility::run(a),
        Command::Sweep(a) => sweep::run(a),
    };
    if let Err(f) = result {
        report(&f);
    }
}

fn report(f: &Failure) -> ! {
    eprintln!("{}", f.to_json());
    std::process::exit(f.exit_code());
}
