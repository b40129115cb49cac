//! Row-major numeric matrices with optional per-row class labels.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `rows × cols` row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl DataMatrix {
    /// Builds a matrix, rejecting non-finite entries with the offending row.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            labels: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn with_labels<S: Into<String>>(
        mut self,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.rows {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                self.rows
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Sub-matrix made of the given rows (labels follow).
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            values,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// The first `n` columns.
    pub fn leading_columns(&self, n: usize) -> Self {
        let n = n.min(self.cols);
        let mut values = Vec::with_capacity(self.rows * n);
        for r in self.iter_rows() {
            values.extend_from_slice(&r[..n]);
        }
        Self {
            rows: self.rows,
            cols: n,
            values,
            labels: self.labels.clone(),
        }
    }

    /// Same values with labels dropped.
    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Distinct labels in first-appearance order, plus each row's index into
    /// that list.
    pub fn label_index(&self) -> Option<(Vec<String>, Vec<usize>)> {
        self.labels.as_ref().map(|l| label_index(l))
    }

    /// Reads a CSV with a header row. The column named `label_col`, if
    /// present, becomes the row labels; every other column must be numeric.
    pub fn read_csv(path: impl AsRef<Path>, label_col: &str) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_from(file, label_col)
    }

    pub fn read_csv_from<R: Read>(reader: R, label_col: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label_pos = headers.iter().position(|h| h == label_col);
        let cols = headers.len() - usize::from(label_pos.is_some());
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                if Some(j) == label_pos {
                    labels.push(field.to_string());
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidArgument(format!(
                        "row {i}, column `{}`: `{field}` is not numeric",
                        &headers[j]
                    ))
                })?;
                values.push(v);
            }
            rows += 1;
        }
        let m = Self::new(rows, cols, values)?;
        if label_pos.is_some() {
            m.with_labels(labels)
        } else {
            Ok(m)
        }
    }

    pub fn write_csv(&self, mut w: impl std::io::Write, header: &[&str]) -> Result<()> {
        let mut out = csv::Writer::from_writer(&mut w);
        let mut head: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        if self.labels.is_some() {
            head.push("label".into());
        }
        out.write_record(&head)?;
        for i in 0..self.rows {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].clone());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Distinct labels in first-appearance order, plus each item's position in
/// that list.
pub fn label_index(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut names: Vec<String> = Vec::new();
    let ids = labels
        .iter()
        .map(|l| match names.iter().position(|n| n == l) {
            Some(p) => p,
            None => {
                names.push(l.clone());
                names.len() - 1
            }
        })
        .collect();
    (names, ids)
}
