//! Parsers for the compact flag values.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    KnnClassifier { k: usize, smoothing: f64 },
    KnnRegressor { k: usize },
    Logistic { epochs: usize, learning_rate: f64 },
    PcaKnn { components: usize, k: usize },
    External { command: String },
}

impl ModelSpec {
    pub fn is_classifier(&self, external_classifier: bool) -> bool {
        match self {
            Self::KnnClassifier { .. } | Self::Logistic { .. } => true,
            Self::KnnRegressor { .. } | Self::PcaKnn { .. } => false,
            Self::External { .. } => external_classifier,
        }
    }
}

fn params(text: &str) -> Result<BTreeMap<&str, &str>, String> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("model parameter '{part}' is not key=value"))?;
        out.insert(k.trim(), v.trim());
    }
    Ok(out)
}

fn take<T: std::str::FromStr>(p: &mut BTreeMap<&str, &str>, key: &str, default: T) -> Result<T, String> {
    match p.remove(key) {
        Some(v) => v.parse().map_err(|_| format!("cannot parse model parameter {key}={v}")),
        None => Ok(default),
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec, String> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    if kind == "external" {
        if rest.trim().is_empty() {
            return Err("external model needs a command: external:COMMAND".into());
        }
        return Ok(ModelSpec::External {
            command: rest.to_owned(),
        });
    }
    let mut p = params(rest)?;
    let spec = match kind {
        "knn-classifier" => ModelSpec::KnnClassifier {
            k: take(&mut p, "k", 5)?,
            smoothing: take(&mut p, "smoothing", 0.0)?,
        },
        "knn-regressor" => ModelSpec::KnnRegressor {
            k: take(&mut p, "k", 5)?,
        },
        "logistic" => ModelSpec::Logistic {
            epochs: take(&mut p, "epochs", 500)?,
            learning_rate: take(&mut p, "lr", 0.5)?,
        },
        "pca-knn" => ModelSpec::PcaKnn {
            components: take(&mut p, "components", 5)?,
            k: take(&mut p, "k", 4)?,
        },
        other => return Err(format!("unknown model kind '{other}'")),
    };
    if let Some(key) = p.keys().next() {
        return Err(format!("unknown parameter '{key}' for model {kind}"));
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleSelect {
    All,
    /// Rows the model assigns to `label`, optionally subsampled by seed.
    Class { label: String, count: Option<usize> },
    /// Half-open row range.
    Range { start: usize, end: usize },
    Rows(Vec<usize>),
}

pub fn parse_sample_select(text: &str) -> Result<SampleSelect, String> {
    let bad = || format!("cannot parse sample selector '{text}'");
    if text == "all" {
        return Ok(SampleSelect::All);
    }
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    match kind {
        "class" => {
            let (label, count) = match rest.rsplit_once(':') {
                Some((l, n)) => (l, Some(n.parse().map_err(|_| bad())?)),
                None => (rest, None),
            };
            if label.is_empty() {
                return Err(bad());
            }
            Ok(SampleSelect::Class {
                label: label.to_owned(),
                count,
            })
        }
        "range" => {
            let (a, b) = rest.split_once("..").ok_or_else(bad)?;
            let start = a.trim().parse().map_err(|_| bad())?;
            let end = b.trim().parse().map_err(|_| bad())?;
            if start >= end {
                return Err(format!("sample range {start}..{end} is empty"));
            }
            Ok(SampleSelect::Range { start, end })
        }
        "rows" => {
            let rows = rest
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| bad()))
                .collect::<Result<Vec<usize>, _>>()?;
            if rows.is_empty() {
                return Err(bad());
            }
            Ok(SampleSelect::Rows(rows))
        }
        _ => Err(bad()),
    }
}

/// `NAME` or `NAME=VALUE`.
pub fn parse_group_col(text: &str) -> (String, Option<String>) {
    match text.split_once('=') {
        Some((n, v)) => (n.trim().to_owned(), Some(v.trim().to_owned())),
        None => (text.trim().to_owned(), None),
    }
}
