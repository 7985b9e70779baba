use std::collections::BTreeMap;
use std::path::PathBuf;

use camp_core::quality::{
    astrometric_error, dirty_rms, dynamic_range, psnr, Psnr, quality_loss, ssim, ImageGrid,
    QualityComponent, QualityVector, SourceCatalog, SsimParams,
};
use camp_core::report::{Maybe, Provenance, QualityRecord};
use clap::Args;
use serde::Serialize;

use crate::config::{load_weights, WeightsConfig};
use crate::error::{invalid, Classify, CmdResult};
use crate::output::{read_input, write_json, ProvenanceBuilder, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct QualityArgs {
    /// Image under test (CSV grid, or raw little-endian f32 with a .json sidecar).
    /// Without it only the reference's dirty-image RMS is reported.
    #[arg(long)]
    pub candidate: Option<PathBuf>,
    /// Reference image.
    #[arg(long)]
    pub reference: PathBuf,
    /// Source catalog measured on the candidate.
    #[arg(long, requires = "ref_catalog")]
    pub catalog: Option<PathBuf>,
    /// Reference source catalog.
    #[arg(long = "ref-catalog", requires = "catalog")]
    pub ref_catalog: Option<PathBuf>,
    /// Cross-match radius in catalog position units.
    #[arg(long, default_value_t = 5.0)]
    pub radius: f64,
    /// Residual RMS used for the dynamic range.
    #[arg(long = "sigma-res", conflicts_with = "residual")]
    pub sigma_res: Option<f64>,
    /// Residual image; its RMS is used for the dynamic range.
    #[arg(long)]
    pub residual: Option<PathBuf>,
    /// Quality-loss weights (TOML). Without it the loss is reported as n/a.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output directory.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Astrometry {
    matched: usize,
    unmatched_measured: usize,
    unmatched_reference: usize,
    radius: f64,
}

#[derive(Debug, Serialize)]
struct QualityReport {
    schema_version: u32,
    quality: QualityRecord,
    delta_q: Maybe<f64>,
    reference_quality: Maybe<QualityRecord>,
    weights: BTreeMap<String, f64>,
    astrometry: Maybe<Astrometry>,
    provenance: Provenance,
}

fn load_image(label: &str, path: &PathBuf, prov: &mut ProvenanceBuilder) -> CmdResult<ImageGrid> {
    prov.input(label, &read_input(path)?);
    ImageGrid::load(path).invalid()
}

pub fn run(args: &QualityArgs) -> CmdResult {
    let mut prov = ProvenanceBuilder::new();
    let reference = load_image("reference", &args.reference, &mut prov)?;
    let Some(cand_path) = &args.candidate else {
        if args.catalog.is_some() || args.weights.is_some() {
            return invalid("catalogs and weights need --candidate");
        }
        let q = QualityVector {
            rms_dirty: Some(dirty_rms(&reference)),
            ..Default::default()
        };
        prov.config("mode", "reference-only");
        return write_report(args, &q, None, None, BTreeMap::new(), None, prov.build());
    };
    let candidate = load_image("candidate", cand_path, &mut prov)?;
    let params = SsimParams::default();

    let sigma = match (&args.sigma_res, &args.residual) {
        (Some(s), _) => Some(*s),
        (None, Some(p)) => Some(dirty_rms(&load_image("residual", p, &mut prov)?)),
        (None, None) => None,
    };
    let mut q = QualityVector {
        rms_dirty: Some(dirty_rms(&candidate)),
        psnr: Some(psnr(&candidate, &reference).invalid()?),
        ssim: Some(ssim(&candidate, &reference, &params).invalid()?),
        dynamic_range: match sigma {
            Some(s) => Some(dynamic_range(candidate.peak_abs(), s).invalid()?),
            None => None,
        },
        astrometric_error: None,
    };
    let mut astrometry = None;
    if let (Some(cp), Some(rp)) = (&args.catalog, &args.ref_catalog) {
        prov.input("catalog", &read_input(cp)?);
        prov.input("ref_catalog", &read_input(rp)?);
        let m = SourceCatalog::load(cp).invalid()?;
        let r = SourceCatalog::load(rp).invalid()?;
        let a = astrometric_error(&m, &r, args.radius).invalid()?;
        q.astrometric_error = Some(a.mean_error);
        astrometry = Some(Astrometry {
            matched: a.matched,
            unmatched_measured: a.unmatched_measured,
            unmatched_reference: a.unmatched_reference,
            radius: args.radius,
        });
    }

    let (delta_q, q_ref, weights) = match &args.weights {
        None => (None, None, BTreeMap::new()),
        Some(wp) => {
            let bytes = read_input(wp)?;
            prov.input("weights", &bytes);
            let cfg = load_weights(wp, &String::from_utf8_lossy(&bytes)).invalid()?;
            let q_ref = reference_vector(&cfg, &reference, sigma);
            let dq = quality_loss(&q, &q_ref, &cfg.weights).invalid()?;
            let w = cfg.weights.iter().map(|(c, w)| (c.to_string(), *w)).collect();
            (Some(dq), Some(q_ref), w)
        }
    };
    prov.config("ssim_window", params.window)
        .config("ssim_k1", params.k1)
        .config("ssim_k2", params.k2);
    write_report(args, &q, delta_q, q_ref, weights, astrometry, prov.build())
}

/// Target values for the loss: explicit `[reference]` entries, else the
/// reference image scored against itself.
fn reference_vector(
    cfg: &WeightsConfig,
    reference: &ImageGrid,
    sigma: Option<f64>,
) -> QualityVector {
    let get = |c: QualityComponent, default: Option<f64>| cfg.reference.get(&c).copied().or(default);
    QualityVector {
        rms_dirty: get(QualityComponent::RmsDirty, Some(dirty_rms(reference))),
        psnr: Some(get(QualityComponent::Psnr, None).map_or(Psnr::Infinite, Psnr::Finite)),
        ssim: get(QualityComponent::Ssim, Some(1.0)),
        dynamic_range: get(
            QualityComponent::DynamicRange,
            sigma.and_then(|s| dynamic_range(reference.peak_abs(), s).ok()),
        ),
        // a perfect match has zero positional error, which cannot normalise a
        // relative loss, so this one must come from the config
        astrometric_error: get(QualityComponent::AstrometricError, None),
    }
}

fn write_report(
    args: &QualityArgs,
    q: &QualityVector,
    delta_q: Option<f64>,
    q_ref: Option<QualityVector>,
    weights: BTreeMap<String, f64>,
    astrometry: Option<Astrometry>,
    provenance: Provenance,
) -> CmdResult {
    let report = QualityReport {
        schema_version: SCHEMA_VERSION,
        quality: QualityRecord::from(q),
        delta_q: delta_q.into(),
        reference_quality: q_ref.as_ref().map(QualityRecord::from).into(),
        weights,
        astrometry: astrometry.into(),
        provenance,
    };
    write_json(&args.out.join("quality.json"), &report)
}
