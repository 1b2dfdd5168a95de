use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gshap", version, about = "Generalized Shapley explanations of model behaviour over samples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model, explain a function of its outputs, and write reports.
    Explain(ExplainArgs),
    /// Run the axiom checks on built-in fixtures.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainMode {
    /// Mean model output over the sample.
    Output,
    /// Probability that every sample row belongs to the positive classes.
    Classification,
    /// Difference in decisions between two groups.
    GroupDiff,
    /// Model performance against labels, on training and test samples.
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineKind {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    R2,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecisionKind {
    Argmax,
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitKind {
    Random,
    Ordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShuffleKind {
    Columns,
    Rows,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleSource {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long, value_enum)]
    pub mode: ExplainMode,

    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,

    /// Column roles, inline (`target=y;group=g;features=a,b`) or a JSON file.
    #[arg(long, default_value = "")]
    pub schema: String,

    /// knn-classifier[:k=5,smoothing=0], knn-regressor[:k=5],
    /// logistic[:epochs=500,lr=0.5], pca-knn[:components=5,k=4] or
    /// external:COMMAND.
    #[arg(long)]
    pub model: String,

    /// Treat an external model's output as class probabilities.
    #[arg(long)]
    pub external_classifier: bool,

    /// Allow several external child processes to run at once.
    #[arg(long)]
    pub external_concurrent: bool,

    #[arg(long, value_delimiter = ',')]
    pub positive_classes: Vec<String>,

    #[arg(long, value_delimiter = ',')]
    pub negative_classes: Vec<String>,

    /// Group column, optionally with the value that marks group 1.
    #[arg(long, value_name = "NAME[=VALUE]")]
    pub group_col: Option<String>,

    #[arg(long, value_enum, default_value = "relative")]
    pub group_measure: MeasureKind,

    /// How a classifier's output becomes a decision in group-diff mode.
    #[arg(long, value_enum, default_value = "probability")]
    pub decision: DecisionKind,

    /// Target column; overrides the schema's target.
    #[arg(long)]
    pub label_col: Option<String>,

    #[arg(long, value_enum, default_value = "r2")]
    pub loss: LossKind,

    #[arg(long, value_enum, default_value = "exact")]
    pub engine: EngineKind,

    #[arg(long, default_value_t = 2048)]
    pub permutations: usize,

    #[arg(long, default_value_t = 16)]
    pub background_draws: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,

    #[arg(long, value_enum, default_value = "random")]
    pub split: SplitKind,

    #[arg(long, value_enum, default_value = "columns")]
    pub background_shuffle: ShuffleKind,

    /// Which split the sample is drawn from.
    #[arg(long, value_enum, default_value = "test")]
    pub sample_from: SampleSource,

    /// all, class:LABEL[:N], range:A..B or rows:I,J,...
    #[arg(long, default_value = "all")]
    pub sample_select: String,

    /// Shuffle the selected sample's feature columns, keeping each row's
    /// group label.
    #[arg(long)]
    pub shuffle_sample: bool,

    #[arg(long)]
    pub out_report: PathBuf,

    #[arg(long)]
    pub out_figure_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Corrupt one Shapley weight; the efficiency checks must then fail.
    #[arg(long, hide = true)]
    pub perturb_weights: bool,
}
