//! Small built-in models and an adapter for external ones.
//!
//! Nearest-neighbour and logistic models standardize features with
//! parameters learned from their training data. All built-in models are
//! immutable once fitted and safe to call from several threads.

mod external;
mod knn;
mod logistic;
mod neighbors;
mod pca;

pub use external::{ExternalModel, ExternalOutput};
pub use knn::{KnnClassifier, KnnRegressor};
pub use logistic::{LogisticClassifier, LogisticObjective};
pub use pca::{Pca, PcaKnnRegressor};

use crate::error::Result;
use crate::matrix::FeatureMatrix;
use crate::model::{BlackBoxModel, ModelOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    KnnClassifier,
    KnnRegressor,
    LogisticClassifier,
    PcaKnnPipeline,
    External,
}

/// Any of the models this crate can fit or attach.
#[derive(Debug)]
pub enum FittedModel {
    KnnClassifier(KnnClassifier),
    KnnRegressor(KnnRegressor),
    Logistic(LogisticClassifier),
    PcaKnn(PcaKnnRegressor),
    External(ExternalModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::KnnClassifier(_) => ModelKind::KnnClassifier,
            Self::KnnRegressor(_) => ModelKind::KnnRegressor,
            Self::Logistic(_) => ModelKind::LogisticClassifier,
            Self::PcaKnn(_) => ModelKind::PcaKnnPipeline,
            Self::External(_) => ModelKind::External,
        }
    }

    fn inner(&self) -> &dyn BlackBoxModel {
        match self {
            Self::KnnClassifier(m) => m,
            Self::KnnRegressor(m) => m,
            Self::Logistic(m) => m,
            Self::PcaKnn(m) => m,
            Self::External(m) => m,
        }
    }
}

impl BlackBoxModel for FittedModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        self.inner().predict(x)
    }

    fn concurrent_safe(&self) -> bool {
        self.inner().concurrent_safe()
    }
}

pub fn fit_knn_classifier(train: &FeatureMatrix, labels: &[String], k: usize) -> Result<FittedModel> {
    KnnClassifier::fit(train, labels, k).map(FittedModel::KnnClassifier)
}

pub fn fit_knn_regressor(train: &FeatureMatrix, targets: &[f64], k: usize) -> Result<FittedModel> {
    KnnRegressor::fit(train, targets, k).map(FittedModel::KnnRegressor)
}

pub fn fit_logistic_classifier(
    train: &FeatureMatrix,
    labels: &[String],
    epochs: usize,
    learning_rate: f64,
) -> Result<FittedModel> {
    LogisticClassifier::fit(train, labels, epochs, learning_rate).map(FittedModel::Logistic)
}

pub fn fit_pca_knn_regressor(
    train: &FeatureMatrix,
    targets: &[f64],
    components: usize,
    k: usize,
) -> Result<FittedModel> {
    PcaKnnRegressor::fit(train, targets, components, k).map(FittedModel::PcaKnn)
}

pub fn external_model(command: &str, output: ExternalOutput, concurrent_safe: bool) -> Result<FittedModel> {
    ExternalModel::new(command, output, concurrent_safe).map(FittedModel::External)
}
