//! Row-major numeric datasets and CSV loading.

use std::path::Path;

use crate::error::{Error, Result};

/// Feature matrix (row-major, `n_rows x n_features`) with a regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    target: Vec<f64>,
    feature_names: Vec<String>,
    n_rows: usize,
    n_features: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major feature buffer.
    pub fn new(features: Vec<f64>, target: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        let n_rows = target.len();
        if n_rows == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if n_features == 0 {
            return Err(Error::InvalidInput("dataset has no feature columns".into()));
        }
        if features.len() != n_rows * n_features {
            return Err(Error::dims(
                "feature buffer",
                n_rows * n_features,
                features.len(),
            ));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in row {} column '{}'",
                pos / n_features,
                feature_names[pos % n_features]
            )));
        }
        if let Some(pos) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite target in row {pos}"
            )));
        }
        Ok(Self {
            features,
            target,
            feature_names,
            n_rows,
            n_features,
        })
    }

    /// Builds a dataset from rows; feature names default to `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != target.len() {
            return Err(Error::dims("target length", rows.len(), target.len()));
        }
        let mut flat = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Self::new(flat, target, names)
    }

    /// Reads a CSV with a header row; `target_column` names the response.
    pub fn from_csv<P: AsRef<Path>>(path: P, target_column: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let target_idx = headers
            .iter()
            .position(|h| h.trim() == target_column)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "target column '{target_column}' not found in header"
                ))
            })?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target_idx)
            .map(|(_, h)| h.trim().to_string())
            .collect();

        let mut features = Vec::new();
        let mut target = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} cells, header has {}",
                    row + 1,
                    record.len(),
                    headers.len()
                )));
            }
            for (col, cell) in record.iter().enumerate() {
                let value: f64 = cell.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!(
                        "non-numeric value '{cell}' in column '{}' (row {})",
                        &headers[col],
                        row + 1
                    ))
                })?;
                if col == target_idx {
                    target.push(value);
                } else {
                    features.push(value);
                }
            }
        }
        Self::new(features, target, names)
    }

    /// Writes the dataset as CSV with the target as the last column.
    pub fn to_csv<P: AsRef<Path>>(&self, path: P, target_column: &str) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_column);
        writer.write_record(&header)?;
        for i in 0..self.n_rows {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.target[i].to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Copy of the selected rows, in the given order (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::OutOfRange {
                    index: i,
                    len: self.n_rows,
                });
            }
            features.extend_from_slice(self.row(i));
            target.push(self.target[i]);
        }
        Self::new(features, target, self.feature_names.clone())
    }

    /// Same features with a replaced target.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.n_rows {
            return Err(Error::dims("target length", self.n_rows, target.len()));
        }
        Self::new(self.features.clone(), target, self.feature_names.clone())
    }

    pub fn target_mean(&self) -> f64 {
        self.target.iter().sum::<f64>() / self.n_rows as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(Dataset::from_rows(&[], vec![]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]], vec![0.0, 1.0]).is_err());
        assert!(Dataset::from_rows(&[vec![f64::NAN]], vec![0.0]).is_err());
    }

    #[test]
    fn csv_reports_bad_column_by_name() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,y\n1,2,3\n4,oops,6").unwrap();
        let err = Dataset::from_csv(f.path(), "y").unwrap_err().to_string();
        assert!(err.contains("'b'"), "{err}");

        let err = Dataset::from_csv(f.path(), "missing")
            .unwrap_err()
            .to_string();
        assert!(err.contains("missing"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::from_rows(&[vec![0.5, 1.25], vec![-3.0, 1e-7]], vec![1.0, 2.5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        ds.to_csv(&path, "target").unwrap();
        let back = Dataset::from_csv(&path, "target").unwrap();
        assert_eq!(back, ds);
    }
}
