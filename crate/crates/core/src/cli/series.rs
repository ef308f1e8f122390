//! Series CSV format.
//!
//! Floats are written in shortest round-trip scientific notation, so the
//! same records always produce the same bytes and read back exactly.

use std::io::{Read, Write};

use thiserror::Error;

use crate::evolution::TimeSeriesRecord;

pub const SERIES_HEADER: [&str; 11] =
    ["step", "t", "dt", "mass", "energy", "S", "cap_active", "max_u", "h1_dist", "l2_dist", "phi_sup"];

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("header mismatch: expected {expected:?}, got {got:?}")]
    Header { expected: String, got: String },
    #[error("line {line}: column {column}: cannot parse {value:?}")]
    Field { line: u64, column: &'static str, value: String },
    #[error("line {line}: expected {expected} fields, got {got}")]
    Width { line: u64, expected: usize, got: usize },
    #[error("series is empty")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn write_series<W: Write>(out: W, records: &[TimeSeriesRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            format!("{:e}", r.t),
            format!("{:e}", r.dt),
            format!("{:e}", r.mass),
            format!("{:e}", r.energy),
            format!("{:e}", r.s),
            u8::from(r.cap_active).to_string(),
            format!("{:e}", r.max_u),
            format!("{:e}", r.h1_dist),
            format!("{:e}", r.l2_dist),
            format!("{:e}", r.phi_sup),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(input: R) -> Result<Vec<TimeSeriesRecord>, SeriesError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(SERIES_HEADER) {
        return Err(SeriesError::Header {
            expected: SERIES_HEADER.join(","),
            got: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != SERIES_HEADER.len() {
            return Err(SeriesError::Width { line, expected: SERIES_HEADER.len(), got: row.len() });
        }
        let bad = |k: usize| SeriesError::Field { line, column: SERIES_HEADER[k], value: row[k].to_string() };
        let f = |k: usize| row[k].trim().parse::<f64>().map_err(|_| bad(k));
        let cap_active = match row[6].trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad(6)),
        };
        records.push(TimeSeriesRecord {
            step: row[0].trim().parse().map_err(|_| bad(0))?,
            t: f(1)?,
            dt: f(2)?,
            mass: f(3)?,
            energy: f(4)?,
            s: f(5)?,
            cap_active,
            max_u: f(7)?,
            h1_dist: f(8)?,
            l2_dist: f(9)?,
            phi_sup: f(10)?,
        });
    }
    if records.is_empty() {
        return Err(SeriesError::Empty);
    }
    Ok(records)
}
