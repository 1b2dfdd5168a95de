//! The black-box model abstraction and its outputs.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Tolerance on probability rows summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Per-row model outputs: either class-probability rows or scalar predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Probabilities {
        classes: Arc<[String]>,
        /// Row-major `n x classes.len()` probabilities.
        values: Vec<f64>,
    },
    Scalars(Vec<f64>),
}

impl ModelOutput {
    /// Validates that every row is nonnegative and sums to one.
    pub fn probabilities(classes: Arc<[String]>, values: Vec<f64>) -> Result<Self> {
        let k = classes.len();
        if k == 0 {
            return Err(Error::InvalidOutput("no class labels".into()));
        }
        if values.len() % k != 0 {
            return Err(Error::InvalidOutput(format!(
                "{} probabilities do not divide into rows of {k}",
                values.len()
            )));
        }
        for (i, row) in values.chunks_exact(k).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidOutput(format!("row {i} has a negative or non-finite probability")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::InvalidOutput(format!("row {i} sums to {total}, not 1")));
            }
        }
        Ok(Self::Probabilities { classes, values })
    }

    pub fn scalars(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidOutput(format!("prediction {i} is not finite")));
        }
        Ok(Self::Scalars(values))
    }

    pub fn n_rows(&self) -> usize {
        match self {
            Self::Probabilities { classes, values } => values.len() / classes.len(),
            Self::Scalars(v) => v.len(),
        }
    }

    pub fn classes(&self) -> Option<&[String]> {
        match self {
            Self::Probabilities { classes, .. } => Some(classes),
            Self::Scalars(_) => None,
        }
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes()?.iter().position(|c| c == label)
    }

    /// Probability row `i`; `None` for scalar outputs.
    pub fn probability_row(&self, i: usize) -> Option<&[f64]> {
        match self {
            Self::Probabilities { classes, values } => {
                let k = classes.len();
                Some(&values[i * k..(i + 1) * k])
            }
            Self::Scalars(_) => None,
        }
    }

    /// Rows `start..start + len` as a new output.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        match self {
            Self::Probabilities { classes, values } => {
                let k = classes.len();
                Self::Probabilities {
                    classes: Arc::clone(classes),
                    values: values[start * k..(start + len) * k].to_vec(),
                }
            }
            Self::Scalars(v) => Self::Scalars(v[start..start + len].to_vec()),
        }
    }

    /// Index of the most probable class in row `i`. Ties go to the lower index.
    pub fn argmax(&self, i: usize) -> Option<usize> {
        let row = self.probability_row(i)?;
        let mut best = 0;
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = c;
            }
        }
        Some(best)
    }
}

/// A fitted model that maps a feature matrix to one output per row.
pub trait BlackBoxModel: Send + Sync {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput>;

    /// Whether `predict` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

impl<M: BlackBoxModel + ?Sized> BlackBoxModel for &M {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        (**self).predict(x)
    }
    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }
}

impl<M: BlackBoxModel + ?Sized> BlackBoxModel for Box<M> {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        (**self).predict(x)
    }
    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }
}

/// Wraps a per-row scalar function as a model.
///
/// ```
/// use gshap::{BlackBoxModel, FeatureMatrix, FnModel, ModelOutput};
///
/// let model = FnModel::new(|row: &[f64]| row[0] + row[1]);
/// let x = FeatureMatrix::from_rows_unnamed(&[[3.0, 5.0]]).unwrap();
/// assert_eq!(model.predict(&x).unwrap(), ModelOutput::Scalars(vec![8.0]));
/// ```
pub struct FnModel<F> {
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> BlackBoxModel for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        ModelOutput::scalars(x.rows().map(&self.f).collect())
    }
}

/// Constant scalar model.
#[derive(Debug, Clone, Copy)]
pub struct ConstantModel(pub f64);

impl BlackBoxModel for ConstantModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        ModelOutput::scalars(vec![self.0; x.n_rows()])
    }
}
