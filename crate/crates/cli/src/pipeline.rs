//! The explain pipeline: load, split, fit, build the background, select the
//! sample, explain, report.

use std::fmt;

use gshap::ingest::{
    load_csv, ordered_split, shuffle_background, train_test_split, Dataset, Schema, ShuffleMode,
};
use gshap::models::{self, ExternalOutput, FittedModel};
use gshap::{
    comparison_report, explain, BlackBoxModel, ClassPartition, ClassificationG, DecisionIndicator,
    DifferenceMeasure, EngineConfig, Error, ErrorKind, Explanation, FeatureMatrix,
    GeneralizedFunction, GroupAssignment, IntergroupG, LabelSet, Loss, LossG, Mode, OutputG,
    OutputTarget,
};
use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{
    DecisionKind, EngineKind, ExplainArgs, ExplainMode, LossKind, MeasureKind, SampleSource,
    ShuffleKind, SplitKind,
};
use crate::report::{Comparison, Report, SampleInfo};
use crate::spec::{parse_group_col, parse_model, parse_sample_select, ModelSpec, SampleSelect};

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl Failure {
    pub fn config(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    fn data(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Compute => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error [{}]: {}", self.stage, self.message)
    }
}

pub trait AtStage<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> AtStage<T> for gshap::Result<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e: Error| Failure {
            stage,
            kind: e.kind(),
            message: e.to_string(),
        })
    }
}

/// Independent seeds for each randomized step, all derived from `--seed`.
struct Seeds {
    split: u64,
    background: u64,
    select: u64,
    sample_shuffle: u64,
}

impl Seeds {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            split: rng.next_u64(),
            background: rng.next_u64(),
            select: rng.next_u64(),
            sample_shuffle: rng.next_u64(),
        }
    }
}

fn load_schema(text: &str) -> Result<Schema, Failure> {
    if text.trim_end().ends_with(".json") {
        let raw = std::fs::read_to_string(text)
            .map_err(|e| Failure::config("config", format!("cannot read schema {text}: {e}")))?;
        serde_json::from_str(&raw).map_err(|e| Failure::config("config", format!("invalid schema {text}: {e}")))
    } else {
        Schema::parse(text).at("config")
    }
}

fn engine_config(a: &ExplainArgs) -> Result<EngineConfig, Failure> {
    let cfg = EngineConfig {
        mode: match a.engine {
            EngineKind::Exact => Mode::Exact,
            EngineKind::Sampled => Mode::Sampled,
        },
        permutations: a.permutations,
        background_draws: a.background_draws,
        seed: a.seed,
        ..EngineConfig::default()
    };
    cfg.validate().at("config")?;
    Ok(cfg)
}

fn fit(spec: &ModelSpec, a: &ExplainArgs, train: &Dataset) -> Result<FittedModel, Failure> {
    if let ModelSpec::External { command } = spec {
        let output = if a.external_classifier {
            ExternalOutput::Probabilities
        } else {
            ExternalOutput::Scalar
        };
        return models::external_model(command, output, a.external_concurrent).at("fit");
    }
    let target = train
        .target
        .as_ref()
        .ok_or_else(|| Failure::config("fit", "fitting a built-in model needs a target column"))?;
    let x = &train.features;
    match *spec {
        ModelSpec::KnnClassifier { k, smoothing } => {
            models::KnnClassifier::fit_smoothed(x, &target.values, k, smoothing)
                .map(FittedModel::KnnClassifier)
                .at("fit")
        }
        ModelSpec::Logistic { epochs, learning_rate } => {
            models::fit_logistic_classifier(x, &target.values, epochs, learning_rate).at("fit")
        }
        ModelSpec::KnnRegressor { k } => {
            models::fit_knn_regressor(x, &target.as_f64().at("fit")?, k).at("fit")
        }
        ModelSpec::PcaKnn { components, k } => {
            models::fit_pca_knn_regressor(x, &target.as_f64().at("fit")?, components, k).at("fit")
        }
        ModelSpec::External { .. } => unreachable!("handled above"),
    }
}

fn model_classes(model: &dyn BlackBoxModel, x: &FeatureMatrix) -> Result<Vec<String>, Failure> {
    let probe = x.select_rows(&[0]).at("explain")?;
    let out = model.predict(&probe).at("explain")?;
    out.classes()
        .map(<[String]>::to_vec)
        .ok_or_else(|| Failure::config("config", "this mode needs a classifier"))
}

fn select_rows(
    select: &SampleSelect,
    source: &Dataset,
    model: &dyn BlackBoxModel,
    seed: u64,
) -> Result<Vec<usize>, Failure> {
    let n = source.n_rows();
    let out_of_range = |i: usize| Failure::data("select", format!("row {i} is out of range for {n} sample rows"));
    let rows = match select {
        SampleSelect::All => (0..n).collect(),
        SampleSelect::Range { start, end } => {
            if *end > n {
                return Err(out_of_range(*end - 1));
            }
            (*start..*end).collect()
        }
        SampleSelect::Rows(rows) => {
            if let Some(&i) = rows.iter().find(|&&i| i >= n) {
                return Err(out_of_range(i));
            }
            rows.clone()
        }
        SampleSelect::Class { label, count } => {
            let out = model.predict(&source.features).at("select")?;
            let classes = out
                .classes()
                .ok_or_else(|| Failure::config("select", "class selection needs a classifier"))?;
            let c = classes
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Failure::config("select", format!("model has no class '{label}'")))?;
            let matching: Vec<usize> = (0..n).filter(|&i| out.argmax(i) == Some(c)).collect();
            match count {
                None => matching,
                Some(m) if *m > matching.len() => {
                    return Err(Failure::data(
                        "select",
                        format!("asked for {m} rows predicted as '{label}', only {} exist", matching.len()),
                    ))
                }
                Some(m) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut picked: Vec<usize> =
                        sample(&mut rng, matching.len(), *m).into_iter().map(|k| matching[k]).collect();
                    picked.sort_unstable();
                    picked
                }
            }
        }
    };
    if rows.is_empty() {
        return Err(Failure::data("select", "the sample selector matched no rows"));
    }
    Ok(rows)
}

fn positive_label(a: &ExplainArgs, what: &str) -> Result<String, Failure> {
    a.positive_classes
        .first()
        .cloned()
        .ok_or_else(|| Failure::config("config", format!("{what} needs --positive-classes")))
}

fn group_function(
    a: &ExplainArgs,
    full: &Dataset,
    sample: &Dataset,
    classifier: bool,
) -> Result<IntergroupG, Failure> {
    let (name, value) = parse_group_col(a.group_col.as_deref().unwrap_or_default());
    let all = full
        .group
        .as_ref()
        .ok_or_else(|| Failure::config("config", "group-diff mode needs --group-col"))?;
    let group1 = match value {
        Some(v) => v,
        None => {
            let distinct = all.distinct();
            if distinct.len() != 2 {
                return Err(Failure::config(
                    "config",
                    format!(
                        "group column '{name}' has {} values; name the group-1 value with --group-col {name}=VALUE",
                        distinct.len()
                    ),
                ));
            }
            distinct[1].clone()
        }
    };
    let labels = &sample.group.as_ref().expect("group column bound").values;
    let membership: Vec<bool> = labels.iter().map(|v| *v == group1).collect();
    let measure = match a.group_measure {
        MeasureKind::Relative => DifferenceMeasure::RelativeMean,
        MeasureKind::Absolute => DifferenceMeasure::AbsoluteMean,
    };
    let groups = GroupAssignment::new(membership, measure).at("select")?;
    let indicator = if classifier {
        let label = positive_label(a, "group-diff mode with a classifier")?;
        match a.decision {
            DecisionKind::Argmax => DecisionIndicator::Argmax(label),
            DecisionKind::Probability => DecisionIndicator::Probability(label),
        }
    } else {
        DecisionIndicator::Scalar
    };
    Ok(IntergroupG::new(groups, indicator))
}

fn loss_function(a: &ExplainArgs, sample: &Dataset, classifier: bool) -> Result<LossG, Failure> {
    let target = sample
        .target
        .as_ref()
        .ok_or_else(|| Failure::config("config", "failure mode needs --label-col"))?;
    let (y, output) = if classifier {
        let label = positive_label(a, "failure mode with a classifier")?;
        let y = target.values.iter().map(|v| f64::from(u8::from(*v == label))).collect();
        (y, OutputTarget::Class(label))
    } else {
        (target.as_f64().at("select")?, OutputTarget::Scalar)
    };
    let loss = match a.loss {
        LossKind::R2 => Loss::RSquared,
        LossKind::Mse => Loss::MeanSquaredError,
    };
    Ok(LossG::new(LabelSet::new(y, loss).at("select")?, output))
}

fn run_one(
    name: &str,
    g: &dyn GeneralizedFunction,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    cfg: &EngineConfig,
) -> Result<(Comparison, Explanation), Failure> {
    let expl = explain(g, model, x, z, cfg).at("explain")?;
    let cmp = comparison_report(g, model, x, &expl).at("explain")?;
    Ok((Comparison::new(name, cmp, &expl), expl))
}

pub fn run_explain(a: &ExplainArgs) -> Result<Report, Failure> {
    // Configuration checks happen before any data is read.
    let spec = parse_model(&a.model).map_err(|m| Failure::config("config", m))?;
    let select = parse_sample_select(&a.sample_select).map_err(|m| Failure::config("config", m))?;
    let cfg = engine_config(a)?;
    let mut schema = load_schema(&a.schema)?;
    if let Some(label) = &a.label_col {
        schema.target = Some(label.clone());
    }
    if let Some(text) = &a.group_col {
        let (name, _) = parse_group_col(text);
        match &schema.group {
            Some(existing) if *existing != name => {
                return Err(Failure::config(
                    "config",
                    format!("--group-col {name} conflicts with schema group {existing}"),
                ))
            }
            _ => schema.group = Some(name),
        }
    }
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(Failure::config("config", format!("--test-fraction {} must be in (0, 1)", a.test_fraction)));
    }
    let classifier = spec.is_classifier(a.external_classifier);
    match a.mode {
        ExplainMode::Classification => {
            positive_label(a, "classification mode")?;
            if !classifier {
                return Err(Failure::config("config", "classification mode needs a classifier"));
            }
        }
        ExplainMode::GroupDiff if a.group_col.is_none() && schema.group.is_none() => {
            return Err(Failure::config("config", "group-diff mode needs --group-col"));
        }
        ExplainMode::Failure => {
            if schema.target.is_none() {
                return Err(Failure::config("config", "failure mode needs --label-col"));
            }
            if select != SampleSelect::All || a.shuffle_sample {
                return Err(Failure::config(
                    "config",
                    "failure mode always compares the full training and test sets",
                ));
            }
        }
        _ => {}
    }
    let seeds = Seeds::new(a.seed);

    let ds = load_csv(&a.data, &schema).at("load")?;
    let (train, test) = match a.split {
        SplitKind::Random => train_test_split(&ds, a.test_fraction, seeds.split),
        SplitKind::Ordered => ordered_split(&ds, a.test_fraction),
    }
    .at("split")?;

    let model = fit(&spec, a, &train)?;

    let z = match a.background_shuffle {
        ShuffleKind::Columns => shuffle_background(&train.features, seeds.background, ShuffleMode::Columns),
        ShuffleKind::Rows => shuffle_background(&train.features, seeds.background, ShuffleMode::Rows),
        ShuffleKind::None => train.features.clone(),
    };

    let mut report = Report::new(a, &cfg, z.n_rows());

    if a.mode == ExplainMode::Failure {
        for (name, part) in [("train", &train), ("test", &test)] {
            let g = loss_function(a, part, classifier)?;
            let (cmp, _) = run_one(name, &g, &model, &part.features, &z, &cfg)?;
            report.comparisons.push(cmp);
        }
        report.sample = SampleInfo {
            source: "train+test".into(),
            selector: a.sample_select.clone(),
            rows: train.n_rows() + test.n_rows(),
            shuffled: false,
        };
        return Ok(report);
    }

    let source = match a.sample_from {
        SampleSource::Train => &train,
        SampleSource::Test => &test,
    };
    let rows = select_rows(&select, source, &model, seeds.select)?;
    let sample = source.select_rows(&rows).at("select")?;
    let x = if a.shuffle_sample {
        shuffle_background(&sample.features, seeds.sample_shuffle, ShuffleMode::Columns)
    } else {
        sample.features.clone()
    };
    report.sample = SampleInfo {
        source: match a.sample_from {
            SampleSource::Train => "train",
            SampleSource::Test => "test",
        }
        .into(),
        selector: a.sample_select.clone(),
        rows: x.n_rows(),
        shuffled: a.shuffle_sample,
    };

    let g: Box<dyn GeneralizedFunction> = match a.mode {
        ExplainMode::Output => {
            if classifier {
                Box::new(OutputG::new(OutputTarget::Class(positive_label(a, "output mode with a classifier")?)))
            } else {
                Box::new(OutputG::scalar())
            }
        }
        ExplainMode::Classification => {
            let positive = a.positive_classes.clone();
            let negative = if a.negative_classes.is_empty() {
                model_classes(&model, &x)?
                    .into_iter()
                    .filter(|c| !positive.contains(c))
                    .collect()
            } else {
                a.negative_classes.clone()
            };
            Box::new(ClassificationG::new(ClassPartition::new(positive, negative).at("config")?))
        }
        ExplainMode::GroupDiff => Box::new(group_function(a, &ds, &sample, classifier)?),
        ExplainMode::Failure => unreachable!("handled above"),
    };
    let (cmp, _) = run_one("sample", g.as_ref(), &model, &x, &z, &cfg)?;
    report.comparisons.push(cmp);
    Ok(report)
}
