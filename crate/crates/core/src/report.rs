//! Output records: run manifests, JSON documents and CSV tables.
//!
//! CSV columns are fixed per table (see the `*_COLUMNS` constants) and every
//! float is written as `{:.16e}`, 17 significant digits.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::chain::{CodeSpec, RateBreakdown};
use crate::config::{RunConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::sweep::ThresholdResult;
use crate::validation::ValidationRow;

pub const TOOL_NAME: &str = "qrloop";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp_unix: u64,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
        }
    }
}

/// JSON document of one `rate` evaluation. Feeding it back as a config
/// reproduces `result`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest: RunManifest,
    pub config: RunConfig,
    pub result: RateBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub manifest: RunManifest,
    pub config: SweepConfig,
    pub rows: Vec<RateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub manifest: RunManifest,
    pub family: String,
    pub total_length_km: f64,
    pub segments: u64,
    pub result: ThresholdResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub manifest: RunManifest,
    pub samples: u64,
    pub rows: Vec<ValidationRow>,
}

/// One line of a rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub code: CodeSpec,
    pub total_length_km: f64,
    pub rate: RateBreakdown,
}

pub const RATE_COLUMNS: [&str; 12] = [
    "code",
    "total_length_km",
    "segments",
    "loops",
    "segment_length_km",
    "raw_rate_hz",
    "skf",
    "skr_hz",
    "epsilon",
    "p",
    "eta_loop",
    "tau0_s",
];

pub const THRESHOLD_COLUMNS: [&str; 10] = [
    "family",
    "total_length_km",
    "segments",
    "threshold_db",
    "bracket_low_db",
    "bracket_high_db",
    "target_skf",
    "skf_below",
    "skf_above",
    "loops",
];

pub const VALIDATION_COLUMNS: [&str; 9] = [
    "quantity",
    "model",
    "parameters",
    "analytic",
    "mc_mean",
    "mc_std_error",
    "samples",
    "z",
    "gated",
];

/// 17 significant digits, enough to parse back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(format!("csv output: {e}"))
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    Ok(w)
}

pub fn write_rate_csv<W: Write>(out: W, rows: &[RateRow]) -> Result<()> {
    let mut w = writer(out, &RATE_COLUMNS)?;
    for row in rows {
        let r = &row.rate;
        let d = &r.diagnostics;
        w.write_record([
            row.code.label(),
            fmt_f64(row.total_length_km),
            d.segments.to_string(),
            d.loops.to_string(),
            fmt_f64(row.total_length_km / d.segments as f64),
            fmt_f64(r.raw_rate_hz),
            fmt_f64(r.skf),
            fmt_f64(r.skr_hz),
            fmt_f64(r.epsilon),
            fmt_f64(d.link.p),
            fmt_f64(d.link.eta_loop),
            fmt_f64(d.link.tau0_s),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
        .map_err(|e| Error::Parse(format!("csv output: {e}")))
}

pub fn write_threshold_csv<W: Write>(out: W, records: &[ThresholdRecord]) -> Result<()> {
    let mut w = writer(out, &THRESHOLD_COLUMNS)?;
    for rec in records {
        let t = &rec.result;
        w.write_record([
            rec.family.clone(),
            fmt_f64(rec.total_length_km),
            rec.segments.to_string(),
            fmt_f64(t.threshold),
            fmt_f64(t.bracket.0),
            fmt_f64(t.bracket.1),
            fmt_f64(t.target_skf),
            fmt_f64(t.skf_below),
            fmt_f64(t.skf_above),
            t.loops.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
        .map_err(|e| Error::Parse(format!("csv output: {e}")))
}

pub fn write_validation_csv<W: Write>(out: W, rows: &[ValidationRow]) -> Result<()> {
    let mut w = writer(out, &VALIDATION_COLUMNS)?;
    for r in rows {
        let model = match r.model {
            crate::mc_oracle::DependenceModel::IndependentPairs => "independent_pairs",
            crate::mc_oracle::DependenceModel::Chain => "chain",
        };
        w.write_record([
            r.quantity.clone(),
            model.to_string(),
            r.parameters.clone(),
            fmt_f64(r.analytic),
            fmt_f64(r.mc.mean),
            fmt_f64(r.mc.std_error),
            r.mc.samples.to_string(),
            fmt_f64(r.z),
            r.gated.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
        .map_err(|e| Error::Parse(format!("csv output: {e}")))
}

/// Reads back the numeric columns of a rate table, keyed by header.
pub fn read_rate_csv(text: &str) -> Result<Vec<Vec<(String, String)>>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(String::from)
        .collect();
    if header != RATE_COLUMNS {
        return Err(Error::Parse(format!(
            "unexpected rate table header {header:?}"
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            Ok(header
                .iter()
                .cloned()
                .zip(rec.iter().map(String::from))
                .collect())
        })
        .collect()
}
