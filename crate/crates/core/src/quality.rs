//! Image fidelity: dirty-image RMS, PSNR, windowed SSIM, dynamic range,
//! catalog astrometric error, and the scalar quality loss against a
//! reference quality vector.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: row {row}: {message}")]
    Parse {
        file: String,
        row: usize,
        message: String,
    },
    #[error("image has no pixels")]
    EmptyImage,
    #[error("image has {found} pixels, expected {width}x{height}")]
    PixelCount {
        width: usize,
        height: usize,
        found: usize,
    },
    #[error("non-finite pixel at index {0}")]
    NonFinite(usize),
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("reference image is identically zero; PSNR undefined")]
    ZeroReference,
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("SSIM data range is zero (constant reference); set it explicitly")]
    DegenerateRange,
    #[error("residual RMS must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("duplicate catalog id {0:?}")]
    DuplicateId(String),
    #[error("catalog position units differ: {0} vs {1}")]
    UnitMismatch(PositionUnit, PositionUnit),
    #[error("no sources matched within radius {0}; catalogs do not overlap")]
    NoMatches(f64),
    #[error("quality component {0} is weighted but absent")]
    MissingComponent(QualityComponent),
    #[error("reference value of {0} cannot normalise a loss (zero or infinite)")]
    DegenerateNormalizer(QualityComponent),
    #[error("invalid weight {1} for {0}")]
    InvalidWeight(QualityComponent, f64),
}

/// Row-major raster of intensities (Jy/beam).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, QualityError> {
        if width == 0 || height == 0 {
            return Err(QualityError::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(QualityError::PixelCount {
                width,
                height,
                found: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(QualityError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Largest absolute intensity.
    pub fn peak_abs(&self) -> f64 {
        self.pixels.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    fn same_shape(&self, other: &Self) -> Result<(), QualityError> {
        if self.width != other.width || self.height != other.height {
            return Err(QualityError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Parses a headerless CSV where each line is one image row.
    pub fn from_csv(file: &str, text: &str) -> Result<Self, QualityError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut width = None;
        let mut pixels = Vec::new();
        let mut height = 0;
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| QualityError::Parse {
                file: file.to_string(),
                row,
                message: e.to_string(),
            })?;
            if *width.get_or_insert(rec.len()) != rec.len() {
                return Err(QualityError::Parse {
                    file: file.to_string(),
                    row,
                    message: "ragged row".into(),
                });
            }
            for f in rec.iter() {
                pixels.push(f.parse::<f64>().map_err(|_| QualityError::Parse {
                    file: file.to_string(),
                    row,
                    message: format!("bad pixel value {f:?}"),
                })?);
            }
            height += 1;
        }
        Self::new(width.unwrap_or(0), height, pixels)
    }

    /// Decodes little-endian `f32` pixels.
    pub fn from_f32_le(width: usize, height: usize, bytes: &[u8]) -> Result<Self, QualityError> {
        if bytes.len() % 4 != 0 {
            return Err(QualityError::PixelCount {
                width,
                height,
                found: bytes.len() / 4,
            });
        }
        let pixels = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(width, height, pixels)
    }

    /// Loads `.csv` rasters directly; any other extension is read as raw
    /// little-endian `f32` with a JSON sidecar of the same stem
    /// (`{"width":W,"height":H,"unit":"Jy/beam"}`).
    pub fn load(path: &Path) -> Result<Self, QualityError> {
        let io = |source| QualityError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = path.display().to_string();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let text = std::fs::read_to_string(path).map_err(io)?;
            return Self::from_csv(&file, &text);
        }
        let sidecar_path = path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar_path).map_err(|source| QualityError::Io {
            path: sidecar_path.clone(),
            source,
        })?;
        let sidecar: RasterSidecar =
            serde_json::from_str(&text).map_err(|e| QualityError::Parse {
                file: sidecar_path.display().to_string(),
                row: 0,
                message: e.to_string(),
            })?;
        let bytes = std::fs::read(path).map_err(io)?;
        Self::from_f32_le(sidecar.width, sidecar.height, &bytes)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionUnit {
    Px,
    Arcsec,
}

impl fmt::Display for PositionUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Px => "px",
            Self::Arcsec => "arcsec",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceCatalog {
    unit: PositionUnit,
    entries: Vec<CatalogEntry>,
}

impl SourceCatalog {
    pub fn new(unit: PositionUnit, entries: Vec<CatalogEntry>) -> Result<Self, QualityError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(QualityError::DuplicateId(e.id.clone()));
            }
            if !(e.x.is_finite() && e.y.is_finite()) {
                return Err(QualityError::Parse {
                    file: "<catalog>".into(),
                    row: 0,
                    message: format!("non-finite position for {}", e.id),
                });
            }
        }
        Ok(Self { unit, entries })
    }

    pub fn unit(&self) -> PositionUnit {
        self.unit
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Parses `# unit=px|arcsec` followed by an `id,x,y,flux` table.
    pub fn from_csv(file: &str, text: &str) -> Result<Self, QualityError> {
        let perr = |row: usize, message: String| QualityError::Parse {
            file: file.to_string(),
            row,
            message,
        };
        let mut unit = None;
        let mut body = String::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some(u) = rest.trim().strip_prefix("unit=") {
                    unit = Some(match u.trim() {
                        "px" => PositionUnit::Px,
                        "arcsec" => PositionUnit::Arcsec,
                        other => return Err(perr(0, format!("unknown unit {other:?}"))),
                    });
                }
                continue;
            }
            body.push_str(line);
            body.push('\n');
        }
        let unit = unit.ok_or_else(|| perr(0, "missing '# unit=px|arcsec' line".into()))?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let headers = rdr.headers().map_err(|e| perr(0, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["id", "x", "y", "flux"] {
            return Err(perr(0, "expected header id,x,y,flux".into()));
        }
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| perr(row, e.to_string()))?;
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| perr(row, format!("bad number {:?}", &rec[k])))
            };
            entries.push(CatalogEntry {
                id: rec[0].to_string(),
                x: num(1)?,
                y: num(2)?,
                flux: num(3)?,
            });
        }
        Self::new(unit, entries)
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        let text = std::fs::read_to_string(path).map_err(|source| QualityError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&path.display().to_string(), &text)
    }
}

/// Peak signal-to-noise ratio; identical images give `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn as_f64(&self) -> f64 {
        match self {
            Self::Finite(v) => *v,
            Self::Infinite => f64::INFINITY,
        }
    }
}

/// Population standard deviation of pixel intensities about their mean.
pub fn dirty_rms(img: &ImageGrid) -> f64 {
    let n = img.pixels.len() as f64;
    let mean = img.pixels.iter().sum::<f64>() / n;
    let var = img.pixels.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64, QualityError> {
    a.same_shape(b)?;
    Ok(a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.pixels.len() as f64)
}

/// PSNR in dB with the reference's peak absolute intensity as signal level.
pub fn psnr(candidate: &ImageGrid, reference: &ImageGrid) -> Result<Psnr, QualityError> {
    let err = mse(candidate, reference)?;
    let peak = reference.peak_abs();
    if peak == 0.0 {
        return Err(QualityError::ZeroReference);
    }
    if err == 0.0 {
        return Ok(Psnr::Infinite);
    }
    Ok(Psnr::Finite(10.0 * (peak * peak / err).log10()))
}

/// Sliding-window SSIM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Side of the square uniform window; stride is always 1.
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Intensity range `L`; defaults to the reference's max - min.
    pub data_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            data_range: None,
        }
    }
}

/// Mean local SSIM over every window position.
pub fn ssim(
    candidate: &ImageGrid,
    reference: &ImageGrid,
    params: &SsimParams,
) -> Result<f64, QualityError> {
    candidate.same_shape(reference)?;
    let win = params.window;
    let (w, h) = (reference.width, reference.height);
    if win == 0 || w < win || h < win {
        return Err(QualityError::ImageTooSmall {
            width: w,
            height: h,
            window: win,
        });
    }
    let range = match params.data_range {
        Some(r) => r,
        None => {
            let (lo, hi) = reference
                .pixels
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                    (lo.min(p), hi.max(p))
                });
            hi - lo
        }
    };
    if !(range > 0.0 && range.is_finite()) {
        return Err(QualityError::DegenerateRange);
    }
    let c1 = (params.k1 * range).powi(2);
    let c2 = (params.k2 * range).powi(2);
    let n = (win * win) as f64;
    let (nx, ny) = (w - win + 1, h - win + 1);

    let local = |x0: usize, y0: usize| {
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for y in y0..y0 + win {
            for x in x0..x0 + win {
                let a = candidate.get(x, y);
                let b = reference.get(x, y);
                sa += a;
                sb += b;
                saa += a * a;
                sbb += b * b;
                sab += a * b;
            }
        }
        let (ma, mb) = (sa / n, sb / n);
        let va = saa / n - ma * ma;
        let vb = sbb / n - mb * mb;
        let cov = sab / n - ma * mb;
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    };

    // per-row partial sums reduced in row order so the result does not
    // depend on thread scheduling
    let rows: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|y0| (0..nx).map(|x0| local(x0, y0)).sum())
        .collect();
    Ok(rows.iter().sum::<f64>() / (nx * ny) as f64)
}

pub fn dynamic_range(i_max: f64, sigma_res: f64) -> Result<f64, QualityError> {
    if !(sigma_res > 0.0) {
        return Err(QualityError::NonPositiveSigma(sigma_res));
    }
    Ok(i_max / sigma_res)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstrometricMatch {
    pub mean_error: f64,
    pub matched: usize,
    pub unmatched_measured: usize,
    pub unmatched_reference: usize,
    /// `(measured id, reference id, distance)` in match order.
    pub pairs: Vec<(String, String, f64)>,
}

/// Greedy nearest-neighbour cross-match: candidate pairs within `radius` are
/// taken in ascending distance order (ties by catalog order), each source
/// used at most once.
pub fn astrometric_error(
    measured: &SourceCatalog,
    reference: &SourceCatalog,
    radius: f64,
) -> Result<AstrometricMatch, QualityError> {
    if measured.entries.is_empty() || reference.entries.is_empty() {
        return Err(QualityError::EmptyCatalog);
    }
    if measured.unit != reference.unit {
        return Err(QualityError::UnitMismatch(measured.unit, reference.unit));
    }
    let mut cands = Vec::new();
    for (i, m) in measured.entries.iter().enumerate() {
        for (j, r) in reference.entries.iter().enumerate() {
            let d = ((m.x - r.x).powi(2) + (m.y - r.y).powi(2)).sqrt();
            if d <= radius {
                cands.push((d, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_m = vec![false; measured.entries.len()];
    let mut used_r = vec![false; reference.entries.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in cands {
        if !used_m[i] && !used_r[j] {
            used_m[i] = true;
            used_r[j] = true;
            pairs.push((
                measured.entries[i].id.clone(),
                reference.entries[j].id.clone(),
                d,
            ));
        }
    }
    if pairs.is_empty() {
        return Err(QualityError::NoMatches(radius));
    }
    let matched = pairs.len();
    Ok(AstrometricMatch {
        mean_error: pairs.iter().map(|p| p.2).sum::<f64>() / matched as f64,
        matched,
        unmatched_measured: measured.entries.len() - matched,
        unmatched_reference: reference.entries.len() - matched,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityComponent {
    RmsDirty,
    Psnr,
    Ssim,
    DynamicRange,
    AstrometricError,
}

impl QualityComponent {
    pub const ALL: [Self; 5] = [
        Self::RmsDirty,
        Self::Psnr,
        Self::Ssim,
        Self::DynamicRange,
        Self::AstrometricError,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::RmsDirty => "rms_dirty",
            Self::Psnr => "psnr",
            Self::Ssim => "ssim",
            Self::DynamicRange => "dynamic_range",
            Self::AstrometricError => "astrometric_error",
        }
    }

    pub fn larger_is_better(&self) -> bool {
        matches!(self, Self::Psnr | Self::Ssim | Self::DynamicRange)
    }
}

impl fmt::Display for QualityComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QualityComponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown quality component {s:?}"))
    }
}

/// Fidelity metrics of one image; any component may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QualityVector {
    pub rms_dirty: Option<f64>,
    pub psnr: Option<Psnr>,
    pub ssim: Option<f64>,
    pub dynamic_range: Option<f64>,
    pub astrometric_error: Option<f64>,
}

impl QualityVector {
    pub fn component(&self, c: QualityComponent) -> Option<f64> {
        match c {
            QualityComponent::RmsDirty => self.rms_dirty,
            QualityComponent::Psnr => self.psnr.map(|p| p.as_f64()),
            QualityComponent::Ssim => self.ssim,
            QualityComponent::DynamicRange => self.dynamic_range,
            QualityComponent::AstrometricError => self.astrometric_error,
        }
    }
}

pub type QualityWeights = BTreeMap<QualityComponent, f64>;

/// Weighted Euclidean norm `sqrt(sum w_i * l_i^2)` of per-component relative
/// losses. Losses count only the worse direction and clamp at zero. Components
/// with zero weight are ignored.
pub fn quality_loss(
    q: &QualityVector,
    q_ref: &QualityVector,
    weights: &QualityWeights,
) -> Result<f64, QualityError> {
    let mut acc = 0.0;
    for (&c, &w) in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(QualityError::InvalidWeight(c, w));
        }
        if w == 0.0 {
            continue;
        }
        let val = q.component(c).ok_or(QualityError::MissingComponent(c))?;
        let reference = q_ref.component(c).ok_or(QualityError::MissingComponent(c))?;
        let loss = if c == QualityComponent::Psnr && val == f64::INFINITY {
            0.0
        } else {
            if reference == 0.0 || !reference.is_finite() {
                return Err(QualityError::DegenerateNormalizer(c));
            }
            let rel = if c.larger_is_better() {
                (reference - val) / reference.abs()
            } else {
                (val - reference) / reference.abs()
            };
            rel.max(0.0)
        };
        acc += w * loss * loss;
    }
    Ok(acc.sqrt())
}
