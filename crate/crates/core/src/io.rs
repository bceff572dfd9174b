//! File formats: header-less matrix CSV, `t,y[,u]` series CSV and JSON helpers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::arx::OutputSeries;
use crate::error::{Error, Result};

fn parse_cell(s: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Format {
        row,
        column,
        message: format!("'{}' is not a number", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Format {
            row,
            column,
            message: "non-finite value".into(),
        });
    }
    Ok(v)
}

/// Reads a header-less numeric CSV into a matrix. Rows and columns in
/// error messages are 1-based.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Format {
                row: r + 1,
                column: record.len().min(w) + 1,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            values.push(parse_cell(field, r + 1, c + 1)?);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 {
        return Err(Error::Format {
            row: 0,
            column: 0,
            message: "empty matrix file".into(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// A series file: outputs and optionally the input that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub y: OutputSeries,
    pub u: Option<Vec<f64>>,
}

/// Reads a `t,y[,u]` CSV. `t` must run 1, 2, ..., N.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<SeriesFile> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (t_col, y_col) = match (col("t"), col("y")) {
        (Some(t), Some(y)) => (t, y),
        _ => {
            return Err(Error::Format {
                row: 1,
                column: 1,
                message: "series header must contain 't' and 'y'".into(),
            })
        }
    };
    let u_col = col("u");

    let mut y = Vec::new();
    let mut u = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 2;
        let t = parse_cell(record.get(t_col).unwrap_or(""), row, t_col + 1)?;
        if t != (r + 1) as f64 {
            return Err(Error::Format {
                row,
                column: t_col + 1,
                message: format!("expected t = {}, found {t}", r + 1),
            });
        }
        y.push(parse_cell(record.get(y_col).unwrap_or(""), row, y_col + 1)?);
        if let Some(c) = u_col {
            u.push(parse_cell(record.get(c).unwrap_or(""), row, c + 1)?);
        }
    }
    Ok(SeriesFile {
        y: OutputSeries::new(y)?,
        u: u_col.map(|_| u),
    })
}

pub fn write_series_csv(y: &OutputSeries, u: Option<&[f64]>, path: impl AsRef<Path>) -> Result<()> {
    if let Some(u) = u {
        if u.len() != y.len() {
            return Err(Error::InvalidDimension(format!(
                "y has {} samples, u has {}",
                y.len(),
                u.len()
            )));
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    match u {
        Some(u) => {
            writeln!(out, "t,y,u")?;
            for (i, (yv, uv)) in y.y.iter().zip(u).enumerate() {
                writeln!(out, "{},{},{}", i + 1, yv, uv)?;
            }
        }
        None => {
            writeln!(out, "t,y")?;
            for (i, yv) in y.y.iter().enumerate() {
                writeln!(out, "{},{}", i + 1, yv)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
