//! Generalized Shapley additive explanations.
//!
//! Classic SHAP attributes a single model output `f(x)` to the input features.
//! This crate attributes any scalar function `g(f, X, Ω)` of a model's outputs
//! over a whole sample `X`, relative to a background sample `Z`:
//!
//! ```text
//! φ_j = Σ_{S ⊆ F \ {j}} |S|! (p - |S| - 1)! / p! · (g(S ∪ {j}) - g(S))
//! ```
//!
//! where `g(S)` evaluates `g` on hybrid rows whose features outside `S` are
//! imputed from the background. The attributions sum to
//! `g(f, X, Ω) - g(f, Z, Ω)`.
//!
//! Built-in choices of `g` live in [`genfns`]: mean output, the
//! all-positive-class probability of a sample, intergroup differences, and
//! loss. Estimation lives in [`engine`]; [`models`] has small reference models
//! and a subprocess adapter for external ones; [`ingest`] loads and prepares
//! data.
//!
//! ```
//! use gshap::{exact_gshap, EngineConfig, FeatureMatrix, FnModel, OutputG};
//!
//! let model = FnModel::new(|r: &[f64]| r[0] + r[1]);
//! let x = FeatureMatrix::from_rows_unnamed(&[[3.0, 5.0]])?;
//! let z = FeatureMatrix::from_rows_unnamed(&[[0.0, 0.0]])?;
//! let expl = exact_gshap(&OutputG::scalar(), &model, &x, &z, &EngineConfig::exact())?;
//! assert_eq!(expl.phi, vec![3.0, 5.0]);
//! # Ok::<(), gshap::Error>(())
//! ```

pub mod coalition;
pub mod engine;
mod error;
mod explanation;
pub mod genfns;
pub mod ingest;
mod matrix;
mod model;
pub mod models;
pub mod selfcheck;

pub use coalition::{coalition_weight, hybrid_compose, Coalition, WeightTable};
pub use engine::{
    comparison_report, evaluate_coalition, exact_gshap, explain, normalize, sampled_gshap,
    Comparison, EngineConfig, Mode,
};
pub use error::{Error, ErrorKind, Result};
pub use explanation::{EstimationMeta, Explanation, Method};
pub use genfns::{
    ClassPartition, ClassificationG, DecisionIndicator, DifferenceMeasure, GeneralizedFunction,
    GroupAssignment, IntergroupG, LabelSet, Loss, LossG, OutputG, OutputTarget,
};
pub use matrix::FeatureMatrix;
pub use model::{BlackBoxModel, ConstantModel, FnModel, ModelOutput};

// The guide's code listings compile and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/shapley-values.md")]
    mod shapley_values {}
    #[doc = include_str!("../../../book/src/background.md")]
    mod background {}
    #[doc = include_str!("../../../book/src/generalized-functions.md")]
    mod generalized_functions {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
