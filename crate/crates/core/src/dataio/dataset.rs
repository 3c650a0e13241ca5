//! Labelled dataset CSV.
//!
//! ```text
//! #dim=3
//! alice,0.1,0.2,0.3
//! ?,0.0,1.5,-2.0
//! ```
//!
//! The first field is the class label, `?` for unlabeled rows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrixcore::FeatureMatrix;

pub const UNLABELED: &str = "?";

/// Parsed dataset file. May hold zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dim: usize,
    pub labels: Vec<Option<String>>,
    /// Row-major sample values, `labels.len() × dim`.
    pub values: Vec<f64>,
}

impl DatasetFile {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// D×N matrix with samples as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |i, j| self.values[j * self.dim + i])
    }

    /// Classes in order of first appearance.
    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for l in self.labels.iter().flatten() {
            if !names.contains(l) {
                names.push(l.clone());
            }
        }
        names
    }

    pub fn to_features(&self) -> Result<FeatureMatrix> {
        self.to_features_with(&self.class_names())
    }

    /// Uses a fixed class table; labels outside it are an error.
    pub fn to_features_with(&self, classes: &[String]) -> Result<FeatureMatrix> {
        if self.is_empty() {
            return Err(Error::InvalidInput("dataset has no samples".into()));
        }
        let labels = self
            .labels
            .iter()
            .map(|l| match l {
                None => Ok(None),
                Some(name) => classes
                    .iter()
                    .position(|c| c == name)
                    .map(Some)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown class label {name:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(self.matrix(), labels, classes.to_vec())
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<DatasetFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hidx, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let dim = header
        .trim()
        .strip_prefix("#dim=")
        .and_then(|d| d.trim().parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| err(hidx + 1, format!("expected header `#dim=<D>`, found {header:?}")))?;

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let mut fields = line.trim().split(',');
        let label = fields.next().unwrap_or("").trim();
        if label.is_empty() {
            return Err(err(lineno, "empty label".into()));
        }
        let row: Vec<&str> = fields.collect();
        if row.len() != dim {
            return Err(err(lineno, format!("expected {dim} features, found {}", row.len())));
        }
        for f in row {
            let v = f
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(lineno, format!("not a finite number: {:?}", f.trim())))?;
            values.push(v);
        }
        labels.push((label != UNLABELED).then(|| label.to_string()));
    }
    Ok(DatasetFile { dim, labels, values })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    read_dataset(path)?.to_features()
}

pub fn format_dataset(x: &FeatureMatrix) -> String {
    let mut out = format!("#dim={}\n", x.dim());
    for (j, col) in x.data().column_iter().enumerate() {
        let label = x.labels()[j].map_or(UNLABELED, |c| x.classes()[c].as_str());
        out.push_str(label);
        for v in col.iter() {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    super::write_atomic(path.as_ref(), format_dataset(x).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(text: &str) -> Result<DatasetFile> {
        parse_dataset(text, &PathBuf::from("mem.csv"))
    }

    #[test]
    fn labeled_and_unlabeled_rows() {
        let f = parse("#dim=2\na,1.0,2.0\n?,3.5,-1e-3\n").unwrap();
        let x = f.to_features().unwrap();
        assert_eq!(x.len(), 2);
        assert_eq!(x.labels(), &[Some(0), None]);
        assert_eq!(x.classes(), &["a".to_string()]);
        assert_eq!(x.data()[(1, 1)], -1e-3);
    }

    #[test]
    fn ragged_row_names_line_two() {
        match parse("#dim=2\na,1.0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_names_line() {
        match parse("#dim=1\na,1.0\nb,x\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("\"x\""));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_and_bad_header() {
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("a,1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn header_only_file_has_no_rows() {
        let f = parse("#dim=4\n").unwrap();
        assert!(f.is_empty());
        assert!(f.to_features().is_err());
    }

    #[test]
    fn round_trip_is_lossless() {
        let text = "#dim=3\nb,0.1,-2.5,3e-12\n?,1.0,0.0,-0.0\na,1234.5678,0.3333333333333333,7.0\n";
        let x = parse(text).unwrap().to_features().unwrap();
        let again = parse(&format_dataset(&x)).unwrap().to_features().unwrap();
        assert_eq!(x, again);
    }
}
