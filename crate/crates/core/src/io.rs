//! Delimited-text input and output.
//!
//! Input files carry a header row of part labels, an optional first column of
//! sample labels and optionally a named binary response column. The delimiter
//! is a tab when the header line contains one, otherwise a comma.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::composition::CompositionMatrix;
use crate::error::{CodaError, Result};

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub has_row_labels: bool,
    pub response_column: Option<String>,
    /// Response label mapped to `true`; otherwise the rule of [`read_matrix`].
    pub positive_class: Option<String>,
}

/// Two-class response; `true` is the class mapped to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryResponse {
    pub name: String,
    pub values: Vec<bool>,
    /// Original labels for class 0 and class 1.
    pub class_labels: [String; 2],
}

impl BinaryResponse {
    pub fn positives(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }
}

pub fn load_matrix(
    path: impl AsRef<Path>,
    options: &LoadOptions,
) -> Result<(CompositionMatrix, Option<BinaryResponse>)> {
    read_matrix(File::open(path)?, options)
}

pub fn read_matrix<R: Read>(
    reader: R,
    options: &LoadOptions,
) -> Result<(CompositionMatrix, Option<BinaryResponse>)> {
    let mut buffered = BufReader::new(reader);
    let mut header_line = String::new();
    buffered.read_line(&mut header_line)?;
    if header_line.trim().is_empty() {
        return Err(CodaError::Parse {
            line: 1,
            column: 1,
            message: "missing header row".into(),
        });
    }
    let delimiter = if header_line.contains('\t') {
        b'\t'
    } else {
        b','
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .from_reader(header_line.as_bytes().chain(buffered));

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
        None => unreachable!("header line was read above"),
    };
    let header: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let first_data = usize::from(options.has_row_labels);
    let response_idx = match &options.response_column {
        Some(name) => Some(
            header
                .iter()
                .skip(first_data)
                .position(|h| h == name)
                .map(|p| p + first_data)
                .ok_or_else(|| CodaError::MissingResponseColumn(name.clone()))?,
        ),
        None => None,
    };
    let part_cols: Vec<usize> = (first_data..header.len())
        .filter(|&c| Some(c) != response_idx)
        .collect();
    let part_labels: Vec<String> = part_cols.iter().map(|&c| header[c].clone()).collect();

    let mut row_labels = Vec::new();
    let mut data = Vec::new();
    let mut raw_response = Vec::new();
    for (k, record) in records.enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        if record.len() != header.len() {
            return Err(CodaError::Parse {
                line,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let row = row_labels.len();
        row_labels.push(if options.has_row_labels {
            record[0].trim().to_string()
        } else {
            format!("S{}", row + 1)
        });
        for (j, &c) in part_cols.iter().enumerate() {
            let cell = record[c].trim();
            let value: f64 = cell.parse().map_err(|_| CodaError::Parse {
                line,
                column: c + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(CodaError::Parse {
                    line,
                    column: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            if value < 0.0 {
                return Err(CodaError::NegativeCell {
                    row,
                    column: j,
                    value,
                });
            }
            data.push(value);
        }
        if let Some(r) = response_idx {
            let cell = record[r].trim();
            if cell.is_empty() {
                return Err(CodaError::Parse {
                    line,
                    column: r + 1,
                    message: "missing response value".into(),
                });
            }
            raw_response.push(cell.to_string());
        }
    }

    let values = DMatrix::from_row_slice(row_labels.len(), part_labels.len(), &data);
    let matrix = CompositionMatrix::new(values, row_labels, part_labels)?;
    let response = match (&options.response_column, response_idx) {
        (Some(name), Some(_)) => Some(encode_response(
            name,
            &raw_response,
            options.positive_class.as_deref(),
        )?),
        _ => None,
    };
    Ok((matrix, response))
}

fn csv_error(e: csv::Error, line: usize) -> CodaError {
    let line = e.position().map_or(line, |p| p.line() as usize);
    CodaError::Parse {
        line,
        column: 1,
        message: e.to_string(),
    }
}

/// Maps `{0,1}` directly; any other pair of labels maps the lexicographically
/// smaller one to 0 unless `positive` names the class mapped to 1.
fn encode_response(name: &str, raw: &[String], positive: Option<&str>) -> Result<BinaryResponse> {
    let mut distinct: Vec<&str> = raw.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(CodaError::InvalidResponse {
            found: distinct.len(),
        });
    }
    let (negative, positive) = match positive {
        None => (distinct[0].to_string(), distinct[1].to_string()),
        Some(p) if p == distinct[1] => (distinct[0].to_string(), p.to_string()),
        Some(p) if p == distinct[0] => (distinct[1].to_string(), p.to_string()),
        Some(p) => {
            return Err(CodaError::InvalidArgument(format!(
                "positive class {p:?} is not a value of response {name:?}"
            )))
        }
    };
    Ok(BinaryResponse {
        name: name.to_string(),
        values: raw.iter().map(|v| *v == positive).collect(),
        class_labels: [negative, positive],
    })
}

/// Writes a labelled matrix as comma-separated text. Floats use the shortest
/// representation that parses back to the identical value.
pub fn write_matrix<W: Write>(
    writer: W,
    corner: &str,
    row_labels: &[String],
    column_labels: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![corner.to_string()];
    header.extend(column_labels.iter().cloned());
    w.write_record(&header).map_err(csv_write_error)?;
    for (i, label) in row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(values.row(i).iter().map(|v| format_float(*v)));
        w.write_record(&rec).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_file(
    path: impl AsRef<Path>,
    corner: &str,
    row_labels: &[String],
    column_labels: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    write_matrix(
        File::create(path)?,
        corner,
        row_labels,
        column_labels,
        values,
    )
}

/// Writes a plain table of already-formatted rows.
pub fn write_table(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(header).map_err(csv_write_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_float(v: f64) -> String {
    format!("{v}")
}

fn csv_write_error(e: csv::Error) -> CodaError {
    CodaError::Io(std::io::Error::other(e.to_string()))
}
