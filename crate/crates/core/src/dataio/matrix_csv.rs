//! Headerless matrix CSV: one matrix row per line, comma-separated floats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Parses a matrix file. Returns `None` for a file with no rows.
pub fn read(path: &Path) -> Result<Option<DMatrix<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<Option<DMatrix<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        message: format!("not a finite number: {f:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let cols = rows[0].len();
    Ok(Some(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])))
}

pub fn format(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    if m.ncols() == 0 {
        return out;
    }
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn write(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    super::write_atomic(path, format(m).as_bytes())
}
