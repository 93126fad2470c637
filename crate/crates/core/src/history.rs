//! Serialization of iteration histories and shift sweeps.
//!
//! CSV reals are written with 17 significant digits so that parsing them back
//! reproduces the original bits; untracked quantities are empty cells.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{KplError, Result};
use crate::solvers::IterationRecord;
use crate::stability::ShiftSweep;

pub const HISTORY_COLUMNS: [&str; 11] = [
    "iter",
    "alpha",
    "beta",
    "gamma",
    "delta",
    "rnorm_recursive",
    "rnorm_true",
    "gap_f",
    "gap_g",
    "gap_h",
    "gap_j",
];

pub const SWEEP_COLUMNS: [&str; 2] = ["sigma", "psi"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for HistoryFormat {
    type Err = KplError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(KplError::InvalidConfig(format!(
                "unknown history format {s:?}"
            ))),
        }
    }
}

impl fmt::Display for HistoryFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> KplError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => KplError::Io(io),
        other => KplError::History(format!("{other:?}")),
    }
}

pub fn emit_history<W: Write>(
    records: &[IterationRecord],
    format: HistoryFormat,
    sink: W,
) -> Result<()> {
    if records.is_empty() {
        return Err(KplError::History("no records to emit".into()));
    }
    match format {
        HistoryFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(HISTORY_COLUMNS).map_err(csv_err)?;
            for r in records {
                w.write_record([
                    r.iter.to_string(),
                    opt(r.alpha),
                    opt(r.beta),
                    opt(r.gamma),
                    opt(r.delta),
                    real(r.rnorm_recursive),
                    opt(r.rnorm_true),
                    opt(r.gap_f),
                    opt(r.gap_g),
                    opt(r.gap_h),
                    opt(r.gap_j),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
        HistoryFormat::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, records)
                .map_err(|e| KplError::History(e.to_string()))?;
            sink.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn parse_cell(cell: &str, line: usize, col: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| KplError::History(format!("line {line}: bad {col} value {cell:?}")))
}

/// Reads a history written by [`emit_history`]. CSV files may omit columns
/// other than `iter`, `alpha` and `beta`, and may order them freely.
pub fn read_history<R: Read>(source: R, format: HistoryFormat) -> Result<Vec<IterationRecord>> {
    match format {
        HistoryFormat::Json => {
            serde_json::from_reader(source).map_err(|e| KplError::History(e.to_string()))
        }
        HistoryFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(source);
            let header = rdr.headers().map_err(csv_err)?.clone();
            let pos = |name: &str| header.iter().position(|h| h == name);
            let cols: Vec<Option<usize>> = HISTORY_COLUMNS.iter().map(|c| pos(c)).collect();
            for required in ["iter", "alpha", "beta"] {
                if pos(required).is_none() {
                    return Err(KplError::History(format!("missing column {required:?}")));
                }
            }
            let mut out = Vec::new();
            for (k, row) in rdr.records().enumerate() {
                let row = row.map_err(csv_err)?;
                let line = k + 2;
                let get = |c: usize| -> Result<Option<f64>> {
                    match cols[c].and_then(|p| row.get(p)) {
                        Some(cell) => parse_cell(cell, line, HISTORY_COLUMNS[c]),
                        None => Ok(None),
                    }
                };
                let iter_cell = row.get(cols[0].expect("checked")).unwrap_or("");
                let iter = iter_cell.trim().parse::<usize>().map_err(|_| {
                    KplError::History(format!("line {line}: bad iter value {iter_cell:?}"))
                })?;
                out.push(IterationRecord {
                    iter,
                    alpha: get(1)?,
                    beta: get(2)?,
                    gamma: get(3)?,
                    delta: get(4)?,
                    rnorm_recursive: get(5)?.unwrap_or(f64::NAN),
                    rnorm_true: get(6)?,
                    gap_f: get(7)?,
                    gap_g: get(8)?,
                    gap_h: get(9)?,
                    gap_j: get(10)?,
                });
            }
            Ok(out)
        }
    }
}

pub fn write_sweep_csv<W: Write>(sweep: &ShiftSweep, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for (s, p) in sweep.grid.iter().zip(&sweep.psi_values) {
        w.write_record([real(*s), real(*p)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `(sigma, psi)` rows of a sweep file.
pub fn read_sweep_csv<R: Read>(source: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != SWEEP_COLUMNS {
        return Err(KplError::History(format!(
            "unexpected sweep header {header:?}"
        )));
    }
    rdr.records()
        .enumerate()
        .map(|(k, row)| {
            let row = row.map_err(csv_err)?;
            let s = parse_cell(&row[0], k + 2, "sigma")?;
            let p = parse_cell(&row[1], k + 2, "psi")?;
            match (s, p) {
                (Some(s), Some(p)) => Ok((s, p)),
                _ => Err(KplError::History(format!("line {}: empty cell", k + 2))),
            }
        })
        .collect()
}
