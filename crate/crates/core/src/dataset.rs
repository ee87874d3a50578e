//! Labeled regression data and its CSV representation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix plus continuous labels.
///
/// Features are stored column-major since split search scans one feature
/// at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// Interprets a purely numeric string as a 0-based index, anything else
    /// as a column name.
    pub fn parse(raw: &str) -> Self {
        match raw.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(raw.to_string()),
        }
    }
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDataset("ragged feature rows".into()));
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for row in rows {
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::from_columns(columns, labels)
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let feature_names = (1..=columns.len()).map(|k| format!("x{k}")).collect();
        Self::with_names(columns, labels, feature_names)
    }

    pub fn with_names(
        columns: Vec<Vec<f64>>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if columns.is_empty() {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if feature_names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        for (k, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "feature column {} has {} values, expected {n}",
                    k + 1,
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "feature column {} has non-finite values",
                    k + 1
                )));
            }
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("labels must be finite".into()));
        }
        Ok(Dataset {
            columns,
            labels,
            feature_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Reads a CSV with a header row. Every non-label column must be numeric.
    pub fn read_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let label_idx = match label {
            LabelColumn::Name(name) => headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidDataset(format!("label column '{name}' not found")))?,
            LabelColumn::Index(i) if *i < headers.len() => *i,
            LabelColumn::Index(i) => {
                return Err(Error::InvalidDataset(format!(
                    "label column index {i} out of range for {} columns",
                    headers.len()
                )))
            }
        };
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_idx)
            .map(|(_, h)| h.clone())
            .collect();
        let mut columns = vec![Vec::new(); feature_names.len()];
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            // header is row 1
            let row = r + 2;
            if record.len() != headers.len() {
                return Err(Error::Parse {
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            let mut k = 0;
            for (j, cell) in record.iter().enumerate() {
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("non-numeric value '{cell}'"),
                })?;
                if j == label_idx {
                    labels.push(value);
                } else {
                    columns[k].push(value);
                    k += 1;
                }
            }
        }
        Self::with_names(columns, labels, feature_names)
    }

    /// Writes features followed by a label column named `label_name`.
    /// Values use the shortest representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, writer: W, label_name: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_name);
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_samples() {
            record.clear();
            record.extend(self.columns.iter().map(|c| c[i].to_string()));
            record.push(self.labels[i].to_string());
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
