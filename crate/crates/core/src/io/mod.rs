//! CSV ingestion of observation matrices and price tables, and report
//! serialization.

mod prices;
mod report;

pub use prices::{log_return_matrix, log_returns, read_prices, PriceSeriesTable};
pub use report::{format_number, CsvGrid, ReportDocument, Timings, WarningEntry, SCHEMA_VERSION};

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ObservationMatrix;

/// Layout of a numeric CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// One row per variable, one column per observation.
    #[default]
    VariablesInRows,
    /// One row per observation, one column per variable.
    VariablesInColumns,
}

pub(crate) fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub(crate) fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Reads a rectangular numeric CSV. With `header`, the first row is skipped.
pub fn ingest_csv(path: &Path, orientation: Orientation, header: bool) -> Result<ObservationMatrix> {
    let mut reader = open_reader(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut skipped_header = !header;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if !skipped_header {
            skipped_header = true;
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    parse_error(path, line, format!("non-numeric cell {cell:?} in column {}", col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("ragged row: {} cells, expected {w}", values.len()),
                ));
            }
            _ => {}
        }
        rows.push(values);
    }
    let Some(width) = width else {
        return Err(parse_error(path, 1, "no numeric rows"));
    };
    let table = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let data = match orientation {
        Orientation::VariablesInRows => table,
        Orientation::VariablesInColumns => table.transpose(),
    };
    ObservationMatrix::new(data)
}

/// Writes a matrix as CSV, one matrix row per line, with an optional header.
pub fn write_matrix_csv(
    path: &Path,
    header: Option<&[String]>,
    rows: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Input(e.to_string()))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| Error::Input(e.to_string()))?;
    }
    for row in rows.row_iter() {
        w.write_record(row.iter().map(|v| format_number(*v)))
            .map_err(|e| Error::Input(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
