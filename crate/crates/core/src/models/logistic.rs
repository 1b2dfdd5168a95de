use std::sync::Arc;

use super::knn::encode_labels;
use crate::error::{Error, Result};
use crate::ingest::Standardizer;
use crate::matrix::FeatureMatrix;
use crate::model::{BlackBoxModel, ModelOutput};

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of a linear logit over fixed data.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticObjective {
    rows: Vec<f64>,
    dim: usize,
    y: Vec<f64>,
}

impl LogisticObjective {
    /// `rows` is row-major with `dim` columns; `y` holds 0/1 targets.
    pub fn new(rows: Vec<f64>, dim: usize, y: Vec<f64>) -> Self {
        assert_eq!(rows.len(), y.len() * dim);
        Self { rows, dim, y }
    }

    fn logit(&self, i: usize, weights: &[f64], bias: f64) -> f64 {
        let row = &self.rows[i * self.dim..(i + 1) * self.dim];
        bias + row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        let n = self.y.len() as f64;
        (0..self.y.len())
            .map(|i| {
                let z = self.logit(i, weights, bias);
                softplus(z) - self.y[i] * z
            })
            .sum::<f64>()
            / n
    }

    /// Gradient with respect to `(weights, bias)`.
    pub fn gradient(&self, weights: &[f64], bias: f64) -> (Vec<f64>, f64) {
        let n = self.y.len() as f64;
        let mut gw = vec![0.0; self.dim];
        let mut gb = 0.0;
        for i in 0..self.y.len() {
            let r = sigmoid(self.logit(i, weights, bias)) - self.y[i];
            let row = &self.rows[i * self.dim..(i + 1) * self.dim];
            gw.iter_mut().zip(row).for_each(|(g, x)| *g += r * x);
            gb += r;
        }
        gw.iter_mut().for_each(|g| *g /= n);
        (gw, gb / n)
    }
}

/// Binary logistic regression on standardized features, trained by
/// full-batch gradient descent.
///
/// A step that would increase the training loss is retried with half the
/// learning rate, so the recorded loss never goes up.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticClassifier {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
    classes: Arc<[String]>,
    loss_history: Vec<f64>,
}

impl LogisticClassifier {
    /// The second label in sorted order is the positive class.
    pub fn fit(train: &FeatureMatrix, labels: &[String], epochs: usize, learning_rate: f64) -> Result<Self> {
        if labels.len() != train.n_rows() {
            return Err(Error::Fit(format!(
                "{} labels for {} training rows",
                labels.len(),
                train.n_rows()
            )));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Fit(format!("learning rate must be positive, got {learning_rate}")));
        }
        let (classes, idx) = encode_labels(labels);
        if classes.len() != 2 {
            return Err(Error::Fit(format!(
                "logistic regression needs exactly two classes, found {}",
                classes.len()
            )));
        }
        let standardizer = Standardizer::fit(train);
        let rows = standardizer.transform(train)?.as_slice().to_vec();
        let p = train.n_features();
        let objective = LogisticObjective::new(rows, p, idx.iter().map(|&c| c as f64).collect());

        let mut weights = vec![0.0; p];
        let mut bias = 0.0;
        let mut lr = learning_rate;
        let mut loss = objective.loss(&weights, bias);
        let mut loss_history = vec![loss];
        for _ in 0..epochs {
            let (gw, gb) = objective.gradient(&weights, bias);
            loop {
                let cand_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - lr * g).collect();
                let cand_b = bias - lr * gb;
                let cand_loss = objective.loss(&cand_w, cand_b);
                if cand_loss <= loss {
                    weights = cand_w;
                    bias = cand_b;
                    loss = cand_loss;
                    break;
                }
                lr *= 0.5;
                if lr < 1e-12 {
                    break;
                }
            }
            loss_history.push(loss);
        }

        Ok(Self {
            standardizer,
            weights,
            bias,
            classes,
            loss_history,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Training loss before the first epoch and after each one.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }
}

impl BlackBoxModel for LogisticClassifier {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        if x.n_features() != self.weights.len() {
            return Err(Error::InvalidMatrix(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                x.n_features()
            )));
        }
        let mut values = Vec::with_capacity(2 * x.n_rows());
        let mut z = Vec::with_capacity(self.weights.len());
        for row in x.rows() {
            z.clear();
            self.standardizer.transform_row_into(row, &mut z);
            let logit = self.bias + z.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>();
            let p1 = sigmoid(logit);
            values.push(1.0 - p1);
            values.push(p1);
        }
        ModelOutput::probabilities(Arc::clone(&self.classes), values)
    }
}
