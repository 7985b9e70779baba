use std::path::PathBuf;

use camp_core::econ::{
    efficiency_band, BandRow, GREEN500_LEADER_GFLOPS_PER_W, GREEN500_TYPICAL_GFLOPS_PER_W,
};
use camp_core::report::format_sig17;
use clap::Args;

use crate::config::{parse_list, parse_range};
use crate::error::{Classify, CmdResult};
use crate::output::{provenance_lines, write_atomic, ProvenanceBuilder};
use crate::svg::{Plot, RefLine, Series, Style, PALETTE};

#[derive(Debug, Args)]
pub struct FacilityArgs {
    /// Sustained compute range in FLOP/s, `LO:HI` (SI suffixes allowed).
    #[arg(long, default_value = "16P:42P")]
    pub csus: String,
    /// Comma-separated site power caps in watts.
    #[arg(long, default_value = "1M,2M,3M,4M,5M")]
    pub pcap: String,
    /// Non-compute overhead fraction range, `LO:HI`.
    #[arg(long, default_value = "0.3:0.4")]
    pub overhead: String,
    /// Output directory.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

pub fn run(args: &FacilityArgs) -> CmdResult {
    let c_sus = parse_range(&args.csus).invalid()?;
    let caps = parse_list(&args.pcap).invalid()?;
    let f = parse_range(&args.overhead).invalid()?;
    let rows = efficiency_band(c_sus, &caps, f).invalid()?;

    let mut prov = ProvenanceBuilder::new();
    prov.config("c_sus_flops", [c_sus.0, c_sus.1])
        .config("p_cap_w", rows.iter().map(|r| r.p_cap_w).collect::<Vec<_>>())
        .config("f_overhead", [f.0, f.1]);
    let provenance = prov.build();

    let mut csv = provenance_lines(&provenance, "# ");
    csv.push_str("p_cap_w,min_gflops_per_w,max_gflops_per_w\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            format_sig17(r.p_cap_w),
            format_sig17(r.min_gflops_per_w),
            format_sig17(r.max_gflops_per_w)
        ));
    }
    write_atomic(&args.out.join("band.csv"), csv.as_bytes())?;
    write_atomic(
        &args.out.join("band.svg"),
        plot(&rows, provenance_lines(&provenance, "")).render().as_bytes(),
    )?;
    Ok(())
}

fn plot(rows: &[BandRow], metadata: String) -> Plot {
    let mw = |r: &BandRow| r.p_cap_w / 1e6;
    let degenerate = rows.iter().all(|r| r.min_gflops_per_w == r.max_gflops_per_w);
    let mut series = vec![Series {
        label: if degenerate { "required" } else { "required (max)" }.into(),
        points: rows.iter().map(|r| (mw(r), r.max_gflops_per_w)).collect(),
        style: Style::LineMarkers,
        color: PALETTE[0],
    }];
    if !degenerate {
        series.push(Series {
            label: "required (min)".into(),
            points: rows.iter().map(|r| (mw(r), r.min_gflops_per_w)).collect(),
            style: Style::LineMarkers,
            color: PALETTE[2],
        });
    }
    Plot {
        title: "Required compute-node energy efficiency".into(),
        x_label: "site power cap (MW)".into(),
        y_label: "GFLOP/s/W".into(),
        series,
        hlines: vec![
            RefLine {
                label: format!("Green500 leader {GREEN500_LEADER_GFLOPS_PER_W}"),
                at: GREEN500_LEADER_GFLOPS_PER_W,
                color: PALETTE[1],
            },
            RefLine {
                label: format!("typical {}", GREEN500_TYPICAL_GFLOPS_PER_W.0),
                at: GREEN500_TYPICAL_GFLOPS_PER_W.0,
                color: PALETTE[4],
            },
            RefLine {
                label: format!("typical {}", GREEN500_TYPICAL_GFLOPS_PER_W.1),
                at: GREEN500_TYPICAL_GFLOPS_PER_W.1,
                color: PALETTE[4],
            },
        ],
        vlines: vec![],
        metadata,
    }
}
