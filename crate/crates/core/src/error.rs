use std::fmt;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid coalition: {0}")]
    InvalidCoalition(String),

    #[error("coalition weight domain error: |S| = {s_size}, p = {p}")]
    WeightDomain { s_size: usize, p: usize },

    #[error("cannot compose hybrid rows: {0}")]
    Composition(String),

    #[error("invalid model output: {0}")]
    InvalidOutput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate probabilities: {0}")]
    DegenerateProbability(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("{p} features exceeds the exact-mode limit of {max}; use sampled mode instead")]
    TooManyFeatures { p: usize, max: usize },

    #[error("cannot normalize attributions whose sum is zero")]
    ZeroSum,

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("external model failed: {message}{}", fmt_diagnostics(.diagnostics))]
    Adapter { message: String, diagnostics: String },

    #[error("load error{}: {message}", fmt_location(.row, .column))]
    Load {
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("while evaluating coalition {coalition}: {source}")]
    AtCoalition {
        coalition: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Compute,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::TooManyFeatures { .. } => ErrorKind::Config,
            Error::InvalidMatrix(_) | Error::Load { .. } | Error::Split(_) | Error::Io(_) => {
                ErrorKind::Data
            }
            Error::AtCoalition { source, .. } => source.kind(),
            _ => ErrorKind::Compute,
        }
    }

    pub(crate) fn load(row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Load {
            row,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }
}

fn fmt_location(row: &Option<usize>, column: &Option<String>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!(" at row {r}, column '{c}'"),
        (Some(r), None) => format!(" at row {r}"),
        (None, Some(c)) => format!(" in column '{c}'"),
        (None, None) => String::new(),
    }
}

fn fmt_diagnostics(diagnostics: &str) -> impl fmt::Display + '_ {
    struct D<'a>(&'a str);
    impl fmt::Display for D<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if self.0.trim().is_empty() {
                Ok(())
            } else {
                write!(f, " (child stderr: {})", self.0.trim())
            }
        }
    }
    D(diagnostics)
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
