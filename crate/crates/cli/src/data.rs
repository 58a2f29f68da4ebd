//! Reading and writing batches of matrices.
//!
//! CSV holds one matrix per row as its upper triangle, row-major, under a
//! `t11,t12,...,tmm` header. JSON holds either an array of matrices (each an
//! array of rows) or a serialised batch with provenance.

use std::path::Path;

use anyhow::{bail, Context};
use gbs_core::linalg::{RealMatrix, SpdMatrix};
use gbs_core::sample::SampleBatch;

use crate::options::order_of;
use crate::UsageError;

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Column names for order `m`.
pub fn header(m: usize) -> Vec<String> {
    let sep = if m > 9 { "_" } else { "" };
    (1..=m)
        .flat_map(|i| (i..=m).map(move |j| format!("t{i}{sep}{j}")))
        .collect()
}

fn spd_row(m: usize, upper: &[f64], row: usize) -> Result<SpdMatrix, UsageError> {
    SpdMatrix::from_upper(m, upper).map_err(|e| UsageError(format!("row {row}: {e}")))
}

pub fn read_batch(path: &Path) -> anyhow::Result<SampleBatch> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let batch = if is_json(path) {
        parse_json(&text)
    } else {
        parse_csv(&text)
    };
    Ok(batch.map_err(|e| UsageError(format!("{}: {e}", path.display())))?)
}

pub fn parse_csv(text: &str) -> Result<SampleBatch, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(String::from)
        .collect();
    let m = order_of(names.len()).ok_or_else(|| {
        format!(
            "header has {} columns, not the upper triangle of a square matrix",
            names.len()
        )
    })?;
    if names != header(m) {
        return Err(format!(
            "header must be {}, got {}",
            header(m).join(","),
            names.join(",")
        ));
    }
    let mut matrices = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| format!("row {row}: {e}"))?;
        let values = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| format!("row {row}: {v:?} is not a number"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        matrices.push(spd_row(m, &values, row).map_err(|e| e.0)?);
    }
    SampleBatch::new(matrices).map_err(|e| e.to_string())
}

pub fn parse_json(text: &str) -> Result<SampleBatch, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if value.is_object() {
        return serde_json::from_value(value).map_err(|e| e.to_string());
    }
    let rows: Vec<Vec<Vec<f64>>> =
        serde_json::from_value(value).map_err(|e| format!("expected an array of matrices: {e}"))?;
    let mut matrices = Vec::with_capacity(rows.len());
    for (k, mat) in rows.iter().enumerate() {
        let row = k + 1;
        let m = mat.len();
        if m == 0 || mat.iter().any(|r| r.len() != m) {
            return Err(format!("row {row}: matrix is not square"));
        }
        let dense = RealMatrix::new(m, m, mat.concat()).map_err(|e| format!("row {row}: {e}"))?;
        matrices.push(SpdMatrix::new(dense).map_err(|e| format!("row {row}: {e}"))?);
    }
    SampleBatch::new(matrices).map_err(|e| e.to_string())
}

/// CSV at 17 significant digits, enough for an exact round trip.
pub fn to_csv(batch: &SampleBatch) -> anyhow::Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header(batch.m()))?;
    for t in batch.matrices() {
        writer.write_record(t.upper().iter().map(|x| format!("{x:.16e}")))?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    Ok(String::from_utf8(bytes)?)
}

/// Writes `text` (or `json` for a .json path) to `out`, or `text` to stdout.
pub fn emit(out: Option<&Path>, text: &str, json: impl FnOnce() -> anyhow::Result<String>) -> anyhow::Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let body = if is_json(path) {
                json()? + "\n"
            } else {
                text.to_string()
            };
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
    }
}

pub fn require_batch_order(batch: &SampleBatch, m: Option<usize>) -> anyhow::Result<()> {
    if let Some(m) = m {
        if batch.m() != m {
            bail!(UsageError(format!(
                "--m {m} but the data hold {0}x{0} matrices",
                batch.m()
            )));
        }
    }
    Ok(())
}
