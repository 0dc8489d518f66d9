//! CSV and JSON ingestion/output.
//!
//! Wide tables have the header `date,COL1,...,COLK` with ISO dates; an empty
//! cell is a missing value. Numbers are written with Rust's shortest
//! round-trip formatting, so equal inputs give byte-identical files.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{IntradayRecord, IntradaySentiment, SentimentPanel, Source};

/// Dates, column names and a `T × K` matrix with `NaN` for missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

impl WideTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }

    pub fn select_rows(&self, rows: &[usize]) -> WideTable {
        WideTable {
            dates: rows.iter().map(|&r| self.dates[r]).collect(),
            columns: self.columns.clone(),
            values: DMatrix::from_fn(rows.len(), self.columns.len(), |i, j| self.values[(rows[i], j)]),
        }
    }
}

fn parse_date(s: &str, path: &Path, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| {
        Error::Parse(format!("{}:{line}: bad date '{s}': {e}", path.display()))
    })
}

fn parse_cell(s: &str, path: &Path, line: usize) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("{}:{line}: bad number '{s}': {e}", path.display())))
}

pub fn read_wide_csv(path: &Path) -> Result<WideTable> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
    let header = rdr.headers()?.clone();
    if header.is_empty() || header.get(0).map(str::trim) != Some("date") {
        return Err(Error::Parse(format!("{}: first column must be 'date'", path.display())));
    }
    let columns: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut dates = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != columns.len() + 1 {
            return Err(Error::Parse(format!(
                "{}:{line}: expected {} fields, found {}",
                path.display(),
                columns.len() + 1,
                rec.len()
            )));
        }
        dates.push(parse_date(&rec[0], path, line)?);
        for j in 0..columns.len() {
            data.push(parse_cell(&rec[j + 1], path, line)?);
        }
    }
    let values = DMatrix::from_row_slice(dates.len(), columns.len(), &data);
    Ok(WideTable { dates, columns, values })
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn write_wide_csv(path: &Path, dates: &[NaiveDate], columns: &[String], values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() != dates.len() || values.ncols() != columns.len() {
        return Err(Error::Dimension("table shape does not match its labels".into()));
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut head = vec!["date".to_string()];
    head.extend(columns.iter().cloned());
    w.write_record(&head)?;
    for (t, d) in dates.iter().enumerate() {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        rec.extend((0..columns.len()).map(|j| fmt(values[(t, j)])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with a header and pre-formatted rows.
pub fn write_rows_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn num(v: f64) -> String {
    fmt(v)
}

pub fn read_panel_csv(path: &Path, source: Source, synthetic: bool) -> Result<SentimentPanel> {
    let t = read_wide_csv(path)?;
    SentimentPanel::new(t.values, t.dates, t.columns, source, synthetic)
}

pub fn write_panel_csv(path: &Path, panel: &SentimentPanel) -> Result<()> {
    write_wide_csv(path, &panel.dates, &panel.assets, &panel.values)
}

/// `date,minute,ticker,score,buzz`.
pub fn read_intraday_csv(path: &Path) -> Result<IntradaySentiment> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let mut records = Vec::new();
    for rec in rdr.deserialize() {
        let r: IntradayRecord = rec?;
        records.push(r);
    }
    let out = IntradaySentiment { records };
    out.validate()?;
    Ok(out)
}

/// Single series `date,<name>`.
pub fn read_series_csv(path: &Path) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let t = read_wide_csv(path)?;
    if t.columns.len() != 1 {
        return Err(Error::Parse(format!(
            "{}: expected one value column, found {}",
            path.display(),
            t.columns.len()
        )));
    }
    Ok((t.dates, t.values.column(0).iter().copied().collect()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Parse(e.to_string()))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinReport {
    pub common: usize,
    /// Per input: dates present there but dropped by the join.
    pub dropped: Vec<Vec<NaiveDate>>,
}

/// Dates present in every input, and for each input the row indices of those
/// dates. Inputs must be strictly increasing.
pub fn inner_join(inputs: &[&[NaiveDate]]) -> Result<(Vec<NaiveDate>, Vec<Vec<usize>>, JoinReport)> {
    for (i, d) in inputs.iter().enumerate() {
        if let Some(w) = d.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("input {i}: dates not increasing at {}", w[1])));
        }
    }
    let Some(first) = inputs.first() else {
        return Ok((Vec::new(), Vec::new(), JoinReport { common: 0, dropped: Vec::new() }));
    };
    let mut common: BTreeSet<NaiveDate> = first.iter().copied().collect();
    for d in &inputs[1..] {
        let s: BTreeSet<NaiveDate> = d.iter().copied().collect();
        common = common.intersection(&s).copied().collect();
    }
    let dates: Vec<NaiveDate> = common.iter().copied().collect();
    let rows = inputs
        .iter()
        .map(|d| dates.iter().map(|x| d.binary_search(x).expect("in every input")).collect())
        .collect();
    let dropped = inputs
        .iter()
        .map(|d| d.iter().filter(|x| !common.contains(x)).copied().collect())
        .collect();
    Ok((dates.clone(), rows, JoinReport { common: dates.len(), dropped }))
}
