//! Generalized functions `g(f, X, Ω)`: scalar summaries of a model's output
//! over a whole sample.
//!
//! Every variant is oriented so that larger values mean "more of the
//! phenomenon being explained": more confidence that the sample is purely
//! positive-class, a larger intergroup gap, or better model performance
//! (mean squared error is negated for that reason).

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::model::{BlackBoxModel, ModelOutput};

/// A scalar function of a model's outputs over a sample.
///
/// Extra arguments (class sets, group membership, labels) are bound when the
/// function is constructed, so evaluation only needs the model's outputs for
/// the `n` rows of the (possibly hybrid) sample.
pub trait GeneralizedFunction: Send + Sync {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64>;

    fn evaluate(&self, model: &dyn BlackBoxModel, x: &FeatureMatrix) -> Result<f64> {
        let output = model.predict(x)?;
        if output.n_rows() != x.n_rows() {
            return Err(Error::InvalidOutput(format!(
                "model returned {} rows for {} inputs",
                output.n_rows(),
                x.n_rows()
            )));
        }
        self.evaluate_output(&output)
    }
}

impl<G: GeneralizedFunction + ?Sized> GeneralizedFunction for &G {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64> {
        (**self).evaluate_output(output)
    }
}

impl<G: GeneralizedFunction + ?Sized> GeneralizedFunction for Box<G> {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64> {
        (**self).evaluate_output(output)
    }
}

/// Which per-row number to read from a model's output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputTarget {
    /// The scalar prediction of a regressor.
    Scalar,
    /// The probability of one class.
    Class(String),
}

impl OutputTarget {
    pub fn values(&self, output: &ModelOutput) -> Result<Vec<f64>> {
        match (self, output) {
            (OutputTarget::Scalar, ModelOutput::Scalars(v)) => Ok(v.clone()),
            (OutputTarget::Scalar, ModelOutput::Probabilities { .. }) => Err(Error::Config(
                "classification model needs a designated class".into(),
            )),
            (OutputTarget::Class(label), ModelOutput::Probabilities { .. }) => {
                let c = class_index(output, label)?;
                Ok((0..output.n_rows())
                    .map(|i| output.probability_row(i).unwrap()[c])
                    .collect())
            }
            (OutputTarget::Class(label), ModelOutput::Scalars(_)) => Err(Error::Config(format!(
                "class '{label}' requested from a model with scalar output"
            ))),
        }
    }
}

fn class_index(output: &ModelOutput, label: &str) -> Result<usize> {
    output
        .class_index(label)
        .ok_or_else(|| Error::Config(format!("model has no class '{label}'")))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean model output over the sample. With a single row this is the
/// quantity explained by classic SHAP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputG {
    pub target: OutputTarget,
}

impl OutputG {
    pub fn new(target: OutputTarget) -> Self {
        Self { target }
    }

    pub fn scalar() -> Self {
        Self::new(OutputTarget::Scalar)
    }
}

impl GeneralizedFunction for OutputG {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64> {
        Ok(mean(&self.target.values(output)?))
    }
}

pub fn output_g(model: &dyn BlackBoxModel, x: &FeatureMatrix, target: &OutputTarget) -> Result<f64> {
    OutputG::new(target.clone()).evaluate(model, x)
}

/// Positive and negative class sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    positive: Vec<String>,
    negative: Vec<String>,
}

impl ClassPartition {
    pub fn new<S: Into<String>>(
        positive: impl IntoIterator<Item = S>,
        negative: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let positive: Vec<String> = positive.into_iter().map(Into::into).collect();
        let negative: Vec<String> = negative.into_iter().map(Into::into).collect();
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::Config("positive and negative class sets must be nonempty".into()));
        }
        let pos: HashSet<&str> = positive.iter().map(String::as_str).collect();
        if let Some(shared) = negative.iter().find(|c| pos.contains(c.as_str())) {
            return Err(Error::Config(format!(
                "class '{shared}' is both positive and negative"
            )));
        }
        Ok(Self { positive, negative })
    }

    pub fn positive(&self) -> &[String] {
        &self.positive
    }

    pub fn negative(&self) -> &[String] {
        &self.negative
    }

    pub fn swapped(&self) -> Self {
        Self {
            positive: self.negative.clone(),
            negative: self.positive.clone(),
        }
    }
}

/// Probability that every observation is positive-class, given that either
/// all are positive or all are negative:
///
/// `Π_i P_i / (Π_i P_i + Π_i N_i)` with `P_i`, `N_i` the positive and negative
/// class mass of row `i`.
///
/// Products are accumulated as sums of logs. When some rows carry exactly zero
/// positive (or negative) mass, the value is the limit obtained by letting
/// those zeros shrink to a common infinitesimal: the side with fewer vanishing
/// factors wins outright, and equal counts fall back to the ratio of the
/// nonzero factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationG {
    pub partition: ClassPartition,
}

impl ClassificationG {
    pub fn new(partition: ClassPartition) -> Self {
        Self { partition }
    }
}

impl GeneralizedFunction for ClassificationG {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64> {
        if output.classes().is_none() {
            return Err(Error::Config(
                "classification g needs class-probability output".into(),
            ));
        }
        let pos_idx = self
            .partition
            .positive
            .iter()
            .map(|c| class_index(output, c))
            .collect::<Result<Vec<_>>>()?;
        let neg_idx = self
            .partition
            .negative
            .iter()
            .map(|c| class_index(output, c))
            .collect::<Result<Vec<_>>>()?;

        let mut log_pos = LogProduct::default();
        let mut log_neg = LogProduct::default();
        for i in 0..output.n_rows() {
            let row = output.probability_row(i).unwrap();
            let pos: f64 = pos_idx.iter().map(|&c| row[c]).sum();
            let neg: f64 = neg_idx.iter().map(|&c| row[c]).sum();
            if pos == 0.0 && neg == 0.0 {
                return Err(Error::DegenerateProbability(format!(
                    "row {i} has zero mass on both the positive and negative classes"
                )));
            }
            log_pos.push(pos);
            log_neg.push(neg);
        }
        Ok(log_pos.share_against(&log_neg))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct LogProduct {
    log_sum: f64,
    zeros: usize,
}

impl LogProduct {
    fn push(&mut self, factor: f64) {
        if factor == 0.0 {
            self.zeros += 1;
        } else {
            self.log_sum += factor.ln();
        }
    }

    /// `self / (self + other)` for the two products.
    fn share_against(&self, other: &Self) -> f64 {
        match self.zeros.cmp(&other.zeros) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Greater => 0.0,
            std::cmp::Ordering::Equal => logistic(self.log_sum - other.log_sum),
        }
    }
}

fn logistic(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

pub fn classification_g(
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    partition: &ClassPartition,
) -> Result<f64> {
    ClassificationG::new(partition.clone()).evaluate(model, x)
}

/// A distance between the per-row outputs of group 0 and group 1.
pub trait GroupDifference: Send + Sync {
    fn difference(&self, group0: &[f64], group1: &[f64]) -> Result<f64>;
}

/// How intergroup differences are measured.
#[derive(Clone)]
pub enum DifferenceMeasure {
    /// `mean1 / mean0 - 1`, the disparate-impact form.
    RelativeMean,
    /// `mean1 - mean0`.
    AbsoluteMean,
    Custom(Arc<dyn GroupDifference>),
}

impl fmt::Debug for DifferenceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RelativeMean => f.write_str("RelativeMean"),
            Self::AbsoluteMean => f.write_str("AbsoluteMean"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl GroupDifference for DifferenceMeasure {
    fn difference(&self, group0: &[f64], group1: &[f64]) -> Result<f64> {
        match self {
            Self::RelativeMean => {
                let m0 = mean(group0);
                if m0 == 0.0 {
                    return Err(Error::DivisionByZero(
                        "relative difference with a zero group-0 mean".into(),
                    ));
                }
                Ok(mean(group1) / m0 - 1.0)
            }
            Self::AbsoluteMean => Ok(mean(group1) - mean(group0)),
            Self::Custom(d) => d.difference(group0, group1),
        }
    }
}

/// Group membership of each sample row plus the difference measure.
#[derive(Debug, Clone)]
pub struct GroupAssignment {
    in_group1: Vec<bool>,
    measure: DifferenceMeasure,
}

impl GroupAssignment {
    /// `in_group1[i]` marks row `i` as a member of group 1; others are group 0.
    pub fn new(in_group1: Vec<bool>, measure: DifferenceMeasure) -> Result<Self> {
        let ones = in_group1.iter().filter(|&&b| b).count();
        if ones == 0 || ones == in_group1.len() {
            return Err(Error::Config("both groups must be nonempty".into()));
        }
        Ok(Self { in_group1, measure })
    }

    pub fn membership(&self) -> &[bool] {
        &self.in_group1
    }

    pub fn measure(&self) -> &DifferenceMeasure {
        &self.measure
    }

    /// The same rows with groups 0 and 1 exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            in_group1: self.in_group1.iter().map(|b| !b).collect(),
            measure: self.measure.clone(),
        }
    }
}

/// The per-row quantity compared between groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecisionIndicator {
    /// 1 when the most probable class is the given label, else 0.
    Argmax(String),
    /// The probability of the given label.
    Probability(String),
    /// The scalar prediction itself.
    Scalar,
}

impl DecisionIndicator {
    fn values(&self, output: &ModelOutput) -> Result<Vec<f64>> {
        match self {
            Self::Argmax(label) => {
                if output.classes().is_none() {
                    return Err(Error::Config("argmax decision needs class probabilities".into()));
                }
                let c = class_index(output, label)?;
                Ok((0..output.n_rows())
                    .map(|i| if output.argmax(i) == Some(c) { 1.0 } else { 0.0 })
                    .collect())
            }
            Self::Probability(label) => OutputTarget::Class(label.clone()).values(output),
            Self::Scalar => OutputTarget::Scalar.values(output),
        }
    }
}

/// Difference in model output between two groups of the sample.
#[derive(Debug, Clone)]
pub struct IntergroupG {
    pub groups: GroupAssignment,
    pub indicator: DecisionIndicator,
}

impl IntergroupG {
    pub fn new(groups: GroupAssignment, indicator: DecisionIndicator) -> Self {
        Self { groups, indicator }
    }
}

impl GeneralizedFunction for IntergroupG {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64> {
        let membership = self.groups.membership();
        if output.n_rows() != membership.len() {
            return Err(Error::Config(format!(
                "group assignment covers {} rows but the sample has {}",
                membership.len(),
                output.n_rows()
            )));
        }
        let values = self.indicator.values(output)?;
        let (mut g0, mut g1) = (Vec::new(), Vec::new());
        for (v, &in1) in values.into_iter().zip(membership) {
            if in1 { g1.push(v) } else { g0.push(v) }
        }
        self.groups.measure().difference(&g0, &g1)
    }
}

pub fn intergroup_g(
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    groups: &GroupAssignment,
    indicator: &DecisionIndicator,
) -> Result<f64> {
    IntergroupG::new(groups.clone(), indicator.clone()).evaluate(model, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    RSquared,
    /// Reported negated, so larger is better.
    MeanSquaredError,
}

/// Labels for the sample rows and the loss to score them with.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    y: Vec<f64>,
    loss: Loss,
}

impl LabelSet {
    pub fn new(y: Vec<f64>, loss: Loss) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Config("label set is empty".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("labels must be finite".into()));
        }
        if loss == Loss::RSquared {
            if y.len() < 2 {
                return Err(Error::DegenerateVariance("R² needs at least two labels".into()));
            }
            if y.iter().all(|&v| v == y[0]) {
                return Err(Error::DegenerateVariance("R² needs nonconstant labels".into()));
            }
        }
        Ok(Self { y, loss })
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Scores `predictions` against the labels.
    pub fn score(&self, predictions: &[f64]) -> Result<f64> {
        if predictions.len() != self.y.len() {
            return Err(Error::Config(format!(
                "{} labels for {} predictions",
                self.y.len(),
                predictions.len()
            )));
        }
        let ss_res: f64 = self
            .y
            .iter()
            .zip(predictions)
            .map(|(y, f)| (y - f).powi(2))
            .sum();
        match self.loss {
            Loss::MeanSquaredError => Ok(-ss_res / self.y.len() as f64),
            Loss::RSquared => {
                let y_bar = mean(&self.y);
                let ss_tot: f64 = self.y.iter().map(|y| (y - y_bar).powi(2)).sum();
                if ss_tot == 0.0 {
                    return Err(Error::DegenerateVariance("labels have zero variance".into()));
                }
                Ok(1.0 - ss_res / ss_tot)
            }
        }
    }
}

/// Model performance on the sample, measured against bound labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LossG {
    pub labels: LabelSet,
    pub target: OutputTarget,
}

impl LossG {
    pub fn new(labels: LabelSet, target: OutputTarget) -> Self {
        Self { labels, target }
    }
}

impl GeneralizedFunction for LossG {
    fn evaluate_output(&self, output: &ModelOutput) -> Result<f64> {
        self.labels.score(&self.target.values(output)?)
    }
}

pub fn loss_g(model: &dyn BlackBoxModel, x: &FeatureMatrix, labels: &LabelSet) -> Result<f64> {
    LossG::new(labels.clone(), OutputTarget::Scalar).evaluate(model, x)
}
