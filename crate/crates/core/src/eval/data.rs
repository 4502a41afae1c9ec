//! CSV ingestion for return series and numeric matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::scenarios::csv_err;

/// Daily return table: one row per date, one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct Returns {
    pub dates: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub tickers: Vec<String>,
}

impl Returns {
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::uniform(self.matrix.clone())
    }

    /// Single-column series (e.g. an index), erroring on wider tables.
    pub fn column(&self) -> Result<Vec<f64>> {
        if self.tickers.len() != 1 {
            return Err(Error::InvalidParams(format!(
                "expected a single series, found {} columns",
                self.tickers.len()
            )));
        }
        Ok(self.matrix.iter().map(|r| r[0]).collect())
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)
}

fn parse_cell(cell: &str, line: usize, col: usize) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            col: Some(col),
            msg: format!("not a finite number: '{cell}'"),
        })
}

/// Reads `date,tick1,...,tickd` followed by rows of an ISO date and decimals.
pub fn load_returns_csv(path: &Path) -> Result<Returns> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                col: None,
                msg: "missing header".into(),
            })
        }
    };
    if header.get(0) != Some("date") || header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            col: None,
            msg: "header must start with 'date' followed by tickers".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();
    let mut dates = Vec::new();
    let mut matrix = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            col: None,
            msg: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                col: None,
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let date = rec.get(0).unwrap();
        if !is_iso_date(date) {
            return Err(Error::Parse {
                line,
                col: Some(1),
                msg: format!("not an ISO date: '{date}'"),
            });
        }
        dates.push(date.to_owned());
        let row = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| parse_cell(c, line, j + 1))
            .collect::<Result<Vec<f64>>>()?;
        matrix.push(row);
    }
    if matrix.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Returns {
        dates,
        matrix,
        tickers,
    })
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Reads a numeric matrix. With `header`, the first row is returned as
/// column names; otherwise every row must be numeric.
pub fn read_numeric_csv(path: &Path, header: bool) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut rdr = reader(path)?;
    let mut names = None;
    let mut rows = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            col: None,
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    line,
                    col: None,
                    msg: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        if header && names.is_none() {
            names = Some(rec.iter().map(str::to_owned).collect());
            continue;
        }
        rows.push(
            rec.iter()
                .enumerate()
                .map(|(j, c)| parse_cell(c, line, j + 1))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((names, rows))
}

/// Reads a sample matrix, skipping a header row when the first row is not
/// numeric. Rows get uniform weights.
pub fn read_sample_csv(path: &Path) -> Result<DiscreteMeasure> {
    let first_numeric = {
        let mut rdr = reader(path)?;
        match rdr.records().next() {
            Some(Ok(r)) => r.iter().all(|c| c.parse::<f64>().is_ok()),
            Some(Err(e)) => return Err(csv_err(e)),
            None => return Err(Error::EmptyInput),
        }
    };
    let (_, rows) = read_numeric_csv(path, !first_numeric)?;
    DiscreteMeasure::uniform(rows)
}

/// Writes a sample matrix with header `x0,...,x{d-1}`.
pub fn write_sample_csv(path: &Path, sample: &DiscreteMeasure) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record((0..sample.dim()).map(|k| format!("x{k}")))
        .map_err(csv_err)?;
    for p in sample.points() {
        w.write_record(p.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a return table in the `date,tickers...` layout.
pub fn write_returns_csv(path: &Path, r: &Returns) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(std::iter::once("date".to_string()).chain(r.tickers.iter().cloned()))
        .map_err(csv_err)?;
    for (d, row) in r.dates.iter().zip(&r.matrix) {
        w.write_record(std::iter::once(d.clone()).chain(row.iter().map(|v| v.to_string())))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
