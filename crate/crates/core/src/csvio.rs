//! Numeric CSV reading and writing.
//!
//! Input files are comma separated with LF or CRLF line endings. A first
//! row containing any non-numeric field is taken as a header and skipped.
//! Output values use 17 significant digits.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth { row: u64, expected: usize, found: usize },
    #[error("row {row}, column {column}: `{value}` is not a number")]
    NumericParse { row: u64, column: usize, value: String },
}

impl From<csv::Error> for CsvError {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(e) => CsvError::Io(e),
                other => CsvError::Csv(format!("{other:?}")),
            }
        } else {
            CsvError::Csv(err.to_string())
        }
    }
}

/// One parsed row and the 1-based file line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: u64,
    pub values: Vec<f64>,
}

/// Reads every numeric row. When `width` is given, each row must have
/// exactly that many fields.
pub fn read_rows(reader: impl Read, width: Option<usize>) -> Result<Vec<Row>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        if first {
            first = false;
            if parsed.iter().any(Option::is_none) && record.iter().any(|f| !f.is_empty()) {
                continue;
            }
        }
        if let Some(expected) = width {
            if record.len() != expected {
                return Err(CsvError::RowWidth {
                    row: line,
                    expected,
                    found: record.len(),
                });
            }
        }
        let values = parsed
            .into_iter()
            .enumerate()
            .map(|(column, v)| {
                v.ok_or_else(|| CsvError::NumericParse {
                    row: line,
                    column: column + 1,
                    value: record[column].to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { line, values });
    }
    Ok(rows)
}

pub fn format_row(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out
}

pub fn write_rows<'a>(mut writer: impl Write, rows: impl IntoIterator<Item = &'a [f64]>) -> io::Result<()> {
    for row in rows {
        writeln!(writer, "{}", format_row(row))?;
    }
    writer.flush()
}
