//! CSV and JSON emission. The CSV carries one row per record with a fixed
//! header; skipped records leave `sum_rate_bits` empty. JSON carries the
//! full records, including per-pair rates and skip reasons.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::run::SimRecord;
use crate::spec::Scheme;

pub const CSV_HEADER: &str =
    "scheme,sweep_axis,sweep_value,trial,seed,sum_rate_bits,outer_iterations,converged,wall_time_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(SimError::InvalidSpec(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scheme: Scheme,
    pub sweep_axis: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub sum_rate_bits: Option<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time_ms: u64,
}

impl From<&SimRecord> for CsvRow {
    fn from(r: &SimRecord) -> Self {
        Self {
            scheme: r.scheme,
            sweep_axis: r.sweep_axis.clone(),
            sweep_value: r.sweep_value,
            trial: r.trial,
            seed: r.seed,
            sum_rate_bits: r.sum_rate_bits,
            outer_iterations: r.outer_iterations,
            converged: r.converged,
            wall_time_ms: r.wall_time_ms,
        }
    }
}

pub fn write_csv<W: Write>(records: &[SimRecord], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<CsvRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn emit(records: &[SimRecord], path: &Path, format: Format) -> Result<()> {
    let io = |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(records, &mut out).map_err(|source| SimError::Csv {
            path: path.to_path_buf(),
            source,
        })?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, records).map_err(|source| SimError::Json {
                path: path.to_path_buf(),
                source,
            })?;
            out.write_all(b"\n").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
