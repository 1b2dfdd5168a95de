//! Dense row-major feature tables.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An `n x p` table of finite `f64` values with one name per column.
///
/// Used both for the sample being explained and for the background data that
/// imputes absent features. Construction rejects NaN and infinities, so every
/// downstream computation can assume finite inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    names: Arc<[String]>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major `values`.
    pub fn new(values: Vec<f64>, n_rows: usize, names: Vec<String>) -> Result<Self> {
        let p = names.len();
        if n_rows == 0 || p == 0 {
            return Err(Error::InvalidMatrix(format!(
                "matrix must have at least one row and one column, got {n_rows}x{p}"
            )));
        }
        if values.len() != n_rows * p {
            return Err(Error::InvalidMatrix(format!(
                "expected {} values for a {n_rows}x{p} matrix, got {}",
                n_rows * p,
                values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidMatrix(format!("duplicate feature name '{name}'")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value {} at row {}, column '{}'",
                values[pos],
                pos / p,
                names[pos % p]
            )));
        }
        Ok(Self {
            values,
            n_rows,
            names: names.into(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], names: Vec<String>) -> Result<Self> {
        let p = names.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, rows.len(), names)
    }

    /// Like [`from_rows`](Self::from_rows) with generated names `x0, x1, ...`.
    pub fn from_rows_unnamed<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        Self::from_rows(rows, default_names(p))
    }

    // Internal constructor for buffers whose shape and finiteness are already
    // guaranteed by construction.
    pub(crate) fn from_parts(values: Vec<f64>, n_rows: usize, names: Arc<[String]>) -> Self {
        debug_assert_eq!(values.len(), n_rows * names.len());
        Self {
            values,
            n_rows,
            names,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub(crate) fn shared_names(&self) -> Arc<[String]> {
        Arc::clone(&self.names)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Rows at `indices`, in the given order. Indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidMatrix("row selection is empty".into()));
        }
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::InvalidMatrix(format!(
                    "row index {i} out of range for {} rows",
                    self.n_rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Self::from_parts(values, indices.len(), self.shared_names()))
    }

    /// Copy of the matrix with column `col` replaced.
    pub fn with_column(&self, col: usize, values: &[f64]) -> Result<Self> {
        if col >= self.n_features() || values.len() != self.n_rows {
            return Err(Error::InvalidMatrix(format!(
                "cannot replace column {col} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("replacement column is not finite".into()));
        }
        let mut out = self.clone();
        let p = self.n_features();
        for (i, v) in values.iter().enumerate() {
            out.values[i * p + col] = *v;
        }
        Ok(out)
    }

    /// Stacks `self` on top of `other`; both must share feature names.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.names != other.names {
            return Err(Error::InvalidMatrix("cannot stack matrices with different features".into()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self::from_parts(values, self.n_rows + other.n_rows, self.shared_names()))
    }
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}
