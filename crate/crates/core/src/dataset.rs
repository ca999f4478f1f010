//! Immutable point clouds and their CSV ingestion.
//!
//! A [`DataMatrix`] holds `M` points of dimension `n` in row-major order.
//! Every entry is finite; the matrix cannot be mutated after construction.
//! [`LabeledDataset`] adds optional per-point class identifiers, which are
//! opaque strings compared by exact equality.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("input file not found: {0}")]
    MissingFile(PathBuf),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("cell at row {row}, column {col} ({column}) is not a finite number: {value:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        column: String,
        value: String,
    },
    #[error("label column {0:?} is not in the header")]
    UnknownLabelColumn(String),
    #[error("no numeric feature columns")]
    NoFeatures,
    #[error("no data rows")]
    NoRows,
    #[error("matrix shape {rows}x{cols} does not match {len} values")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dataset has no labels")]
    NoLabels,
    #[error("{labels} labels for {points} points")]
    LabelCount { labels: usize, points: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major `M x n` matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DataMatrix {
    n_points: usize,
    dim: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    n_points: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for DataMatrix {
    type Error = DatasetError;
    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        DataMatrix::new(raw.n_points, raw.dim, raw.values)
    }
}

impl From<DataMatrix> for RawMatrix {
    fn from(m: DataMatrix) -> Self {
        RawMatrix {
            n_points: m.n_points,
            dim: m.dim,
            values: m.values,
        }
    }
}

impl DataMatrix {
    pub fn new(n_points: usize, dim: usize, values: Vec<f64>) -> Result<Self, DatasetError> {
        if n_points == 0 {
            return Err(DatasetError::NoRows);
        }
        if dim == 0 {
            return Err(DatasetError::NoFeatures);
        }
        if values.len() != n_points * dim {
            return Err(DatasetError::Shape {
                rows: n_points,
                cols: dim,
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            n_points,
            dim,
            values,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, DatasetError> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(DatasetError::RaggedRows {
                    row: i,
                    found: r.len(),
                    expected: dim,
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// Raw row-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies the listed rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.dim, values)
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let count = self.n_points as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        mean
    }

    /// Sample covariance (denominator `M - 1`), row-major `n x n`.
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.dim;
        let mean = self.mean();
        let mut cov = vec![0.0; n * n];
        let mut centered = vec![0.0; n];
        for r in self.rows() {
            for ((c, v), m) in centered.iter_mut().zip(r).zip(&mean) {
                *c = v - m;
            }
            for a in 0..n {
                let ca = centered[a];
                for b in a..n {
                    cov[a * n + b] += ca * centered[b];
                }
            }
        }
        let denom = (self.n_points.max(2) - 1) as f64;
        for a in 0..n {
            for b in a..n {
                let v = cov[a * n + b] / denom;
                cov[a * n + b] = v;
                cov[b * n + a] = v;
            }
        }
        cov
    }
}

/// A point cloud with optional class labels and the feature column names it
/// was read with.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    labels: Option<Vec<String>>,
    pub feature_names: Vec<String>,
    pub label_name: Option<String>,
}

impl LabeledDataset {
    pub fn unlabeled(data: DataMatrix) -> Self {
        let feature_names = (1..=data.dim()).map(|j| format!("x{j}")).collect();
        Self {
            data,
            labels: None,
            feature_names,
            label_name: None,
        }
    }

    pub fn with_labels(data: DataMatrix, labels: Vec<String>) -> Result<Self, DatasetError> {
        if labels.len() != data.n_points() {
            return Err(DatasetError::LabelCount {
                labels: labels.len(),
                points: data.n_points(),
            });
        }
        let mut ds = Self::unlabeled(data);
        ds.labels = Some(labels);
        ds.label_name = Some("label".to_string());
        Ok(ds)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Replaces the feature matrix, keeping labels. Used after transforms
    /// that preserve the number of points.
    pub fn map_data(&self, data: DataMatrix, feature_names: Vec<String>) -> Result<Self, DatasetError> {
        if data.n_points() != self.data.n_points() {
            return Err(DatasetError::LabelCount {
                labels: self.data.n_points(),
                points: data.n_points(),
            });
        }
        Ok(Self {
            data,
            labels: self.labels.clone(),
            feature_names,
            label_name: self.label_name.clone(),
        })
    }
}

/// Reads a delimited text file with a header row.
///
/// Lines starting with `#` are treated as comments, which lets the crate
/// read back its own outputs (they carry a provenance header).
pub fn ingest_csv(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
    delimiter: u8,
) -> Result<LabeledDataset, DatasetError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(DatasetError::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path)?;
    parse_csv(file, label_column, delimiter)
}

/// Parses CSV from any reader; see [`ingest_csv`].
pub fn parse_csv<R: std::io::Read>(
    reader: R,
    label_column: Option<&str>,
    delimiter: u8,
) -> Result<LabeledDataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::UnknownLabelColumn(name.to_string()))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| Some(j) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(DatasetError::NoFeatures);
    }

    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DatasetError::RaggedRows {
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        for &col in &feature_cols {
            let cell = &record[col];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(DatasetError::NonNumericCell {
                        row,
                        col,
                        column: header[col].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        if let (Some(idx), Some(labels)) = (label_idx, labels.as_mut()) {
            labels.push(record[idx].to_string());
        }
        n_rows += 1;
    }
    let data = DataMatrix::new(n_rows, feature_cols.len(), values)?;
    Ok(LabeledDataset {
        data,
        labels,
        feature_names: feature_cols.iter().map(|&j| header[j].clone()).collect(),
        label_name: label_idx.map(|j| header[j].clone()),
    })
}

/// Writes the dataset as CSV (header, features, label column last).
///
/// Values use Rust's shortest round-trip formatting, so re-ingesting the
/// file reproduces every entry bit for bit.
pub fn write_csv<W: Write>(
    ds: &LabeledDataset,
    out: W,
    delimiter: u8,
) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(out);
    let sep = delimiter as char;
    let mut header = ds.feature_names.join(&sep.to_string());
    if ds.labels.is_some() {
        header.push(sep);
        header.push_str(ds.label_name.as_deref().unwrap_or("label"));
    }
    writeln!(out, "{header}")?;
    for (i, row) in ds.data.rows().enumerate() {
        let mut line = String::with_capacity(row.len() * 20);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(sep);
            }
            line.push_str(&format!("{v:?}"));
        }
        if let Some(labels) = &ds.labels {
            line.push(sep);
            line.push_str(&labels[i]);
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Groups point indices (0-based) by class label; each list keeps input order.
pub fn class_partition(ds: &LabeledDataset) -> Result<BTreeMap<String, Vec<usize>>, DatasetError> {
    let labels = ds.labels().ok_or(DatasetError::NoLabels)?;
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l.clone()).or_default().push(i);
    }
    Ok(classes)
}

/// Maps labels to dense class indices in order of first appearance.
pub(crate) fn class_indices(labels: &[String]) -> Vec<u32> {
    let mut seen: BTreeMap<&str, u32> = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = seen.len() as u32;
            *seen.entry(l.as_str()).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, label: Option<&str>) -> Result<LabeledDataset, DatasetError> {
        parse_csv(text.as_bytes(), label, b',')
    }

    #[test]
    fn three_rows_two_columns() {
        let ds = parse("a,b\n1,2\n3,4\n5,6\n", None).unwrap();
        assert_eq!(ds.data.n_points(), 3);
        assert_eq!(ds.data.dim(), 2);
        assert!(ds.labels().is_none());
        assert_eq!(ds.data.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn label_column_is_removed() {
        let ds = parse("a,b\n1,2\n3,4\n5,6\n", Some("b")).unwrap();
        assert_eq!(ds.data.dim(), 1);
        assert_eq!(ds.labels().unwrap(), &["2", "4", "6"]);
        assert_eq!(ds.feature_names, vec!["a"]);
    }

    #[test]
    fn nan_cell_rejected() {
        let err = parse("a,b\n1,NaN\n", None).unwrap_err();
        assert!(matches!(err, DatasetError::NonNumericCell { row: 0, col: 1, .. }));
        let err = parse("a,b\n1,inf\n", None).unwrap_err();
        assert!(matches!(err, DatasetError::NonNumericCell { .. }));
        let err = parse("a,b\n1,\n", None).unwrap_err();
        assert!(matches!(err, DatasetError::NonNumericCell { .. }));
    }

    #[test]
    fn ragged_and_unknown_label() {
        let err = parse("a,b\n1,2\n3\n", None).unwrap_err();
        assert!(matches!(err, DatasetError::RaggedRows { row: 1, .. }));
        let err = parse("a,b\n1,2\n", Some("c")).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownLabelColumn(_)));
    }

    #[test]
    fn missing_file() {
        let err = ingest_csv("/nonexistent/definitely.csv", None, b',').unwrap_err();
        assert!(matches!(err, DatasetError::MissingFile(_)));
    }

    #[test]
    fn partition_groups_in_order() {
        let data = DataMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let ds = LabeledDataset::with_labels(data.clone(), vec!["a".into(), "b".into(), "a".into()]).unwrap();
        let p = class_partition(&ds).unwrap();
        assert_eq!(p["a"], vec![0, 2]);
        assert_eq!(p["b"], vec![1]);

        let single = LabeledDataset::with_labels(data.clone(), vec!["a".into(); 3]).unwrap();
        assert_eq!(class_partition(&single).unwrap()["a"], vec![0, 1, 2]);

        let none = LabeledDataset::unlabeled(data);
        assert!(matches!(class_partition(&none), Err(DatasetError::NoLabels)));
    }

    #[test]
    fn constructor_rejects_non_finite() {
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
        assert!(DataMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn comments_and_delimiter() {
        let ds = parse_csv("# provenance\na;b\n1;2\n".as_bytes(), None, b';').unwrap();
        assert_eq!(ds.data.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn covariance_matches_hand_value() {
        let m = DataMatrix::from_rows(&[[1.0, 2.0], [3.0, 6.0]]).unwrap();
        assert_eq!(m.mean(), vec![2.0, 4.0]);
        assert_eq!(m.covariance(), vec![2.0, 4.0, 4.0, 8.0]);
    }
}
