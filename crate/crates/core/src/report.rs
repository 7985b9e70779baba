//! Deterministic JSON encoding of metric, quality, carbon and cost records.
//!
//! Floats are written with exactly 17 significant digits, which round-trips
//! every `f64` and makes byte-level comparison of reports meaningful. Absent
//! metrics serialise as the string `"n/a"`, never as zero.

use std::collections::BTreeMap;
use std::io;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};

use crate::econ::EconVector;
use crate::metrics::MetricVector;
use crate::quality::{Psnr, QualityVector};

/// Formats `v` with 17 significant digits: positional notation for decimal
/// exponents in `[-5, 17)`, scientific otherwise.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    let s = format!("{v:.16e}");
    let (mant, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        return format!("{mant}e{exp}");
    }
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mant),
    };
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    if exp >= 0 {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    }
}

/// Two-space indented JSON with 17-significant-digit floats.
#[derive(Debug, Default)]
pub struct CanonicalFormatter {
    indent: usize,
    has_value: bool,
}

impl CanonicalFormatter {
    fn newline<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_sig17(v).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

/// Serialises `value` canonically, with a trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub const NOT_AVAILABLE: &str = "n/a";

/// An optional metric that serialises as `"n/a"` when absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Maybe<T>(pub Option<T>);

impl<T> From<Option<T>> for Maybe<T> {
    fn from(v: Option<T>) -> Self {
        Self(v)
    }
}

impl<T: Serialize> Serialize for Maybe<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.0 {
            Some(v) => v.serialize(s),
            None => s.serialize_str(NOT_AVAILABLE),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Maybe<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Text(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Value(v) => Ok(Self(Some(v))),
            Raw::Text(t) if t == NOT_AVAILABLE => Ok(Self(None)),
            Raw::Text(t) => Err(de::Error::custom(format!("unexpected string {t:?}"))),
        }
    }
}

/// PSNR serialises as a number or the string `"+inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnrValue(pub Psnr);

impl Serialize for PsnrValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Psnr::Finite(v) => s.serialize_f64(v),
            Psnr::Infinite => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PsnrValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PsnrValue;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"+inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<PsnrValue, E> {
                Ok(PsnrValue(Psnr::Finite(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<PsnrValue, E> {
                Ok(PsnrValue(Psnr::Finite(v as f64)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<PsnrValue, E> {
                Ok(PsnrValue(Psnr::Finite(v as f64)))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<PsnrValue, E> {
                match v {
                    "+inf" | "inf" => Ok(PsnrValue(Psnr::Infinite)),
                    _ => Err(E::custom(format!("bad PSNR {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Metric vector keyed by table IDs, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MetricRecord {
    pub A1_tc_s: f64,
    pub A2_ec_j: f64,
    pub A3_theta_items_s: f64,
    pub A4_eta_e_items_j: Maybe<f64>,
    pub A5_u: Maybe<f64>,
    pub A6_bmem_bytes_s: Maybe<f64>,
    pub A7_mpeak_bytes: Maybe<u64>,
    pub e_static_j: Maybe<f64>,
    pub e_dynamic_j: Maybe<f64>,
    pub e_residual_j: Maybe<f64>,
    pub p_avg_w: f64,
    pub n_items: f64,
    pub n_items_unit: crate::trace::ItemUnit,
    #[serde(default)]
    pub A5_u_per_device: BTreeMap<String, f64>,
    #[serde(default)]
    pub static_share: Maybe<f64>,
}

impl From<&MetricVector> for MetricRecord {
    fn from(m: &MetricVector) -> Self {
        let d = m.decomposition;
        Self {
            A1_tc_s: m.t_c,
            A2_ec_j: m.e_c,
            A3_theta_items_s: m.theta,
            A4_eta_e_items_j: m.eta_e.into(),
            A5_u: m.u.as_ref().map(|u| u.aggregate).into(),
            A6_bmem_bytes_s: m.b_mem.into(),
            A7_mpeak_bytes: m.m_peak.into(),
            e_static_j: d.map(|d| d.e_static).into(),
            e_dynamic_j: d.map(|d| d.e_dynamic).into(),
            e_residual_j: d.map(|d| d.e_residual).into(),
            p_avg_w: m.p_avg,
            n_items: m.n_items,
            n_items_unit: m.unit,
            A5_u_per_device: m.u.as_ref().map(|u| u.per_device.clone()).unwrap_or_default(),
            static_share: d.map(|d| d.static_share()).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CarbonRecord {
    pub region: String,
    pub kg_per_kwh_mean: f64,
    pub C1_cc_kg: f64,
    pub C2_eta_c_items_kg: Maybe<f64>,
    pub C2_eta_c_items_g: Maybe<f64>,
    pub embodied_kg: f64,
    pub total_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct EconRecord {
    pub currency: String,
    pub price_per_kwh: f64,
    pub E1_c_tto_share: f64,
    pub E2_c_e_energy: f64,
    pub E3_cost_efficiency_items_per_currency: Maybe<f64>,
    pub capex_share: f64,
    pub opex_share: f64,
    pub capex_fraction: Maybe<f64>,
}

impl EconRecord {
    pub fn new(e: &EconVector, price_per_kwh: f64) -> Self {
        Self {
            currency: e.currency.clone(),
            price_per_kwh,
            E1_c_tto_share: e.c_tto_share,
            E2_c_e_energy: e.c_e_energy,
            E3_cost_efficiency_items_per_currency: e.cost_efficiency.into(),
            capex_share: e.capex_share,
            opex_share: e.opex_share,
            capex_fraction: (e.c_tto_share > 0.0).then(|| e.capex_fraction()).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct QualityRecord {
    pub B1_rms_dirty: Maybe<f64>,
    pub B2_psnr_db: Maybe<PsnrValue>,
    pub B2_ssim: Maybe<f64>,
    pub B3_dynamic_range: Maybe<f64>,
    pub B4_astrometric_error: Maybe<f64>,
}

impl From<&QualityVector> for QualityRecord {
    fn from(q: &QualityVector) -> Self {
        Self {
            B1_rms_dirty: q.rms_dirty.into(),
            B2_psnr_db: q.psnr.map(PsnrValue).into(),
            B2_ssim: q.ssim.into(),
            B3_dynamic_range: q.dynamic_range.into(),
            B4_astrometric_error: q.astrometric_error.into(),
        }
    }
}

impl From<&QualityRecord> for QualityVector {
    fn from(r: &QualityRecord) -> Self {
        Self {
            rms_dirty: r.B1_rms_dirty.0,
            psnr: r.B2_psnr_db.0.map(|p| p.0),
            ssim: r.B2_ssim.0,
            dynamic_range: r.B3_dynamic_range.0,
            astrometric_error: r.B4_astrometric_error.0,
        }
    }
}

/// Where a report came from: tool version, input digests, echoed settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// Input label -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub config: BTreeMap<String, serde_json::Value>,
}
