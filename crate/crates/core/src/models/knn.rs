use std::sync::Arc;

use super::neighbors::NeighborIndex;
use crate::error::{Error, Result};
use crate::ingest::Standardizer;
use crate::matrix::FeatureMatrix;
use crate::model::{BlackBoxModel, ModelOutput};

/// Euclidean k-nearest-neighbour search on standardized features.
#[derive(Debug, Clone, PartialEq)]
struct Knn {
    standardizer: Standardizer,
    index: NeighborIndex,
    k: usize,
    n_features: usize,
}

impl Knn {
    fn fit(train: &FeatureMatrix, tie_keys: Vec<f64>, k: usize) -> Result<Self> {
        let n = train.n_rows();
        if k == 0 || k > n {
            return Err(Error::Fit(format!("k = {k} must be in 1..={n}")));
        }
        let standardizer = Standardizer::fit(train);
        let points = standardizer.transform(train)?.as_slice().to_vec();
        let p = train.n_features();
        let index = NeighborIndex::new(points, p, tie_keys, train.as_slice().to_vec(), p);
        Ok(Self {
            standardizer,
            index,
            k,
            n_features: p,
        })
    }

    /// Calls `visit(row, neighbours)` for every query row.
    fn for_each_neighbourhood(&self, x: &FeatureMatrix, mut visit: impl FnMut(usize, &[usize])) -> Result<()> {
        if x.n_features() != self.n_features {
            return Err(Error::InvalidMatrix(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_features()
            )));
        }
        let mut query = Vec::with_capacity(self.n_features);
        let mut scratch = Vec::with_capacity(self.index.len());
        for (i, row) in x.rows().enumerate() {
            query.clear();
            self.standardizer.transform_row_into(row, &mut query);
            let nn = self.index.nearest(&query, self.k, &mut scratch);
            visit(i, &nn);
        }
        Ok(())
    }
}

/// Class labels in sorted order plus each row's class index.
pub(crate) fn encode_labels(labels: &[String]) -> (Arc<[String]>, Vec<usize>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes.into(), idx)
}

/// Neighbour-vote classifier.
///
/// Class probabilities are `(votes + α) / (k + α·C)`; with the default
/// `α = 0` they are plain vote fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnClassifier {
    knn: Knn,
    labels: Vec<usize>,
    classes: Arc<[String]>,
    smoothing: f64,
}

impl KnnClassifier {
    pub fn fit(train: &FeatureMatrix, labels: &[String], k: usize) -> Result<Self> {
        Self::fit_smoothed(train, labels, k, 0.0)
    }

    /// Fits with an additive pseudo-count `smoothing` per class, which keeps
    /// every class probability strictly positive when `smoothing > 0`.
    pub fn fit_smoothed(train: &FeatureMatrix, labels: &[String], k: usize, smoothing: f64) -> Result<Self> {
        if labels.len() != train.n_rows() {
            return Err(Error::Fit(format!(
                "{} labels for {} training rows",
                labels.len(),
                train.n_rows()
            )));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::Fit(format!("smoothing must be finite and nonnegative, got {smoothing}")));
        }
        let (classes, idx) = encode_labels(labels);
        if classes.len() < 2 {
            return Err(Error::Fit("need at least two classes".into()));
        }
        let knn = Knn::fit(train, idx.iter().map(|&c| c as f64).collect(), k)?;
        Ok(Self {
            knn,
            labels: idx,
            classes,
            smoothing,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn k(&self) -> usize {
        self.knn.k
    }
}

impl BlackBoxModel for KnnClassifier {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        let c = self.classes.len();
        let denom = self.knn.k as f64 + self.smoothing * c as f64;
        let mut values = Vec::with_capacity(x.n_rows() * c);
        let mut votes = vec![0usize; c];
        self.knn.for_each_neighbourhood(x, |_, nn| {
            votes.iter_mut().for_each(|v| *v = 0);
            for &i in nn {
                votes[self.labels[i]] += 1;
            }
            values.extend(votes.iter().map(|&v| (v as f64 + self.smoothing) / denom));
        })?;
        ModelOutput::probabilities(Arc::clone(&self.classes), values)
    }
}

/// Mean target of the `k` nearest training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnRegressor {
    knn: Knn,
    targets: Vec<f64>,
}

impl KnnRegressor {
    pub fn fit(train: &FeatureMatrix, targets: &[f64], k: usize) -> Result<Self> {
        if targets.len() != train.n_rows() {
            return Err(Error::Fit(format!(
                "{} targets for {} training rows",
                targets.len(),
                train.n_rows()
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Fit("targets must be finite".into()));
        }
        let knn = Knn::fit(train, targets.to_vec(), k)?;
        Ok(Self {
            knn,
            targets: targets.to_vec(),
        })
    }
}

impl BlackBoxModel for KnnRegressor {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        let mut out = Vec::with_capacity(x.n_rows());
        self.knn.for_each_neighbourhood(x, |_, nn| {
            out.push(nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64);
        })?;
        ModelOutput::scalars(out)
    }
}
