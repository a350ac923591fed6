//! CSV ingestion and artifact writers.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::Context;
use groupnet::DenseMatrix;
use serde::Serialize;

#[derive(Debug)]
pub enum CsvError {
    Io(csv::Error),
    Empty,
    RaggedRows { line: u64, expected: usize, found: usize },
    ParseError { row: u64, column: usize, value: String },
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsvError::Io(e) => write!(f, "{e}"),
            CsvError::Empty => write!(f, "no numeric rows"),
            CsvError::RaggedRows { line, expected, found } => {
                write!(f, "line {line}: expected {expected} fields, found {found}")
            }
            CsvError::ParseError { row, column, value } => {
                write!(f, "row {row}, column {column}: cannot parse {value:?} as a finite number")
            }
        }
    }
}

impl std::error::Error for CsvError {}

impl CsvError {
    pub fn kind(&self) -> &'static str {
        match self {
            CsvError::Io(_) => "Io",
            CsvError::Empty => "Empty",
            CsvError::RaggedRows { .. } => "RaggedRows",
            CsvError::ParseError { .. } => "ParseError",
        }
    }
}

/// Row-major numeric table with an optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Table {
    pub fn to_matrix(&self) -> groupnet::Result<DenseMatrix> {
        DenseMatrix::from_row_major(self.rows, self.cols, &self.data)
    }

    /// All cells in row order; for one-column files this is the column.
    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a rectangular numeric CSV. A first row with no numeric cell is
/// taken as the header. Column numbers in errors are 1-based.
pub fn parse_csv<R: Read>(reader: R) -> Result<Table, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut header = None;
    let mut data = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(CsvError::Io)?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && rec.iter().all(|f| f.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect::<Vec<_>>());
            cols = rec.len();
            continue;
        }
        if rows == 0 && header.is_none() {
            cols = rec.len();
        }
        if rec.len() != cols {
            return Err(CsvError::RaggedRows { line, expected: cols, found: rec.len() });
        }
        for (j, f) in rec.iter().enumerate() {
            let v =
                parse_cell(f).ok_or_else(|| CsvError::ParseError { row: line, column: j + 1, value: f.to_string() })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CsvError::Empty);
    }
    Ok(Table { header, rows, cols, data })
}

pub fn load_csv(path: &Path) -> anyhow::Result<Table> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_csv(f).with_context(|| format!("reading {}", path.display()))
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> anyhow::Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("x{}", j + 1)).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, (0..m.nrows()).map(|i| m.row(i).into_iter().map(fmt_num).collect()))
}

pub fn write_column(path: &Path, name: &str, v: &[f64]) -> anyhow::Result<()> {
    write_table(path, &[name], v.iter().map(|x| vec![fmt_num(*x)]))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
