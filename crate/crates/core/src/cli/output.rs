//! Artifact formats: CSV rows, JSON documents, atomic writes and the
//! matching readers.
//!
//! CSV floats are written as `{:.16e}` (17 significant digits, '.' decimal),
//! which round-trips every f64 bit-exactly. Absent values are empty fields.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::BoundReport;
use crate::error::{FppError, Result};
use crate::experiments::{ConcentrationPoint, SearchCrossReport, SubadditivityReport, SummaryStats, UiTailPoint};
use crate::slab::PassageSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = FppError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(FppError::Config(format!("unknown format {other:?} (expected csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsRow {
    pub d: usize,
    pub a: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub ub1: f64,
    pub ub1_tail: f64,
    pub ub2: f64,
    pub ub2_tail: f64,
    pub ratio1: f64,
    pub ratio2: f64,
    pub asymptote: f64,
}

impl From<&BoundReport> for BoundsRow {
    fn from(r: &BoundReport) -> Self {
        BoundsRow {
            d: r.d,
            a: r.a,
            n: r.truncation,
            ub1: r.ub1,
            ub1_tail: r.ub1_tail,
            ub2: r.ub2,
            ub2_tail: r.ub2_tail,
            ratio1: r.ratio1,
            ratio2: r.ratio2,
            asymptote: r.asymptote,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleRow {
    pub d: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: f64,
    pub normalized: f64,
    pub settled_count: usize,
    pub exit_vertex: String,
}

impl SampleRow {
    pub fn new(replicate: usize, s: &PassageSample, normalizer: f64) -> Self {
        SampleRow {
            d: s.dimension,
            replicate,
            seed: s.seed_used,
            value: s.value,
            normalized: s.value * normalizer,
            settled_count: s.settled_count,
            exit_vertex: s.exit_vertex.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub d: usize,
    pub n: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    pub std_error: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
    pub second_moment: f64,
    pub normalized_mean: f64,
    pub normalized_var: Option<f64>,
}

impl From<&SummaryStats> for SummaryRow {
    fn from(s: &SummaryStats) -> Self {
        SummaryRow {
            d: s.d,
            n: s.n,
            mean: s.mean,
            variance: s.variance,
            std_error: s.std_error,
            ci95_lo: s.ci95.map(|c| c.0),
            ci95_hi: s.ci95.map(|c| c.1),
            second_moment: s.second_moment,
            normalized_mean: s.normalized_mean,
            normalized_var: s.normalized_var,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcentrationRow {
    pub d: usize,
    pub n: usize,
    pub eta: f64,
    pub exceedances: usize,
    pub estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub bootstrap_lo: f64,
    pub bootstrap_hi: f64,
}

impl From<&ConcentrationPoint> for ConcentrationRow {
    fn from(c: &ConcentrationPoint) -> Self {
        ConcentrationRow {
            d: c.d,
            n: c.n,
            eta: c.eta,
            exceedances: c.exceedances,
            estimate: c.estimate,
            wilson_lo: c.wilson95.0,
            wilson_hi: c.wilson95.1,
            bootstrap_lo: c.bootstrap95.0,
            bootstrap_hi: c.bootstrap95.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UiTailRow {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

impl From<&UiTailPoint> for UiTailRow {
    fn from(u: &UiTailPoint) -> Self {
        UiTailRow { d: u.d, n: u.n, m: u.m, estimate: u.estimate, std_error: u.std_error }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubaddRow {
    pub d: usize,
    pub n: usize,
    pub replicates: usize,
    pub lhs: f64,
    pub lhs_se: Option<f64>,
    pub rhs: f64,
    pub rhs_se: Option<f64>,
    pub pathwise_violations: usize,
    pub max_radius: u32,
}

impl From<&SubadditivityReport> for SubaddRow {
    fn from(r: &SubadditivityReport) -> Self {
        SubaddRow {
            d: r.d,
            n: r.n,
            replicates: r.replicates,
            lhs: r.lhs,
            lhs_se: r.lhs_se,
            rhs: r.rhs,
            rhs_se: r.rhs_se,
            pathwise_violations: r.pathwise_violations,
            max_radius: r.max_radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchCrossRow {
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub x_threshold: f64,
    pub y_threshold: f64,
    pub replicates: usize,
    #[serde(rename = "pHat_Fj")]
    pub p_hat_fj: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub p_hat_tau: f64,
    pub f_y: f64,
    pub p_hat_path: f64,
    pub target: f64,
    pub capped: usize,
}

impl From<&SearchCrossReport> for SearchCrossRow {
    fn from(r: &SearchCrossReport) -> Self {
        SearchCrossRow {
            d: r.d,
            p: r.p,
            n: r.n,
            x_threshold: r.x_threshold,
            y_threshold: r.y_threshold,
            replicates: r.replicates,
            p_hat_fj: r.p_hat_fj,
            wilson_lo: r.p_hat_fj_wilson95.0,
            wilson_hi: r.p_hat_fj_wilson95.1,
            p_hat_tau: r.p_hat_tau,
            f_y: r.f_y,
            p_hat_path: r.p_hat_path,
            target: r.target,
            capped: r.capped,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoupleRow {
    pub t: f64,
    pub h: f64,
    pub ratio: f64,
}

fn csv_field(v: &Value) -> Result<String> {
    Ok(match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().expect("f64 number")),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(FppError::Config(format!("nested value {other} cannot be written as a CSV field"))),
    })
}

/// One CSV record per row, columns in field order. Floats are written as
/// `{:.16e}`, integers verbatim, absent values as empty fields.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (k, row) in rows.iter().enumerate() {
        let Value::Object(map) = serde_json::to_value(row)? else {
            return Err(FppError::Config("CSV rows must be records".into()));
        };
        if k == 0 {
            w.write_record(map.keys())?;
        }
        let fields = map.values().map(csv_field).collect::<Result<Vec<_>>>()?;
        w.write_record(&fields)?;
    }
    w.into_inner().map_err(|e| FppError::Io(e.into_error()))
}

pub fn json_bytes<T: Serialize + ?Sized>(doc: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(doc)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`. Readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| FppError::Io(e.error))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(FppError::from)).collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
