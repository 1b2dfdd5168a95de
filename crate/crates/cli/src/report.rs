use std::fmt::Write as _;
use std::path::Path;

use gshap::engine::normalize_values;
use gshap::{EngineConfig, Explanation, Method, Mode};
use serde::Serialize;

use crate::args::{ExplainArgs, ExplainMode};

#[derive(Debug, Serialize)]
pub struct EngineInfo {
    pub method: Method,
    pub seed: u64,
    pub permutations: Option<usize>,
    pub background_draws: Option<usize>,
    pub background_rows: usize,
}

#[derive(Debug, Default, Serialize)]
pub struct SampleInfo {
    pub source: String,
    pub selector: String,
    pub rows: usize,
    pub shuffled: bool,
}

#[derive(Debug, Serialize)]
pub struct FeatureRow {
    pub feature: String,
    pub phi: f64,
    pub stderr: Option<f64>,
    /// Absent when the attributions sum to zero.
    pub normalized_phi: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub name: String,
    pub g_sample: f64,
    pub g_background: f64,
    pub difference: f64,
    pub phi_sum: f64,
    pub g_evaluations: usize,
    pub features: Vec<FeatureRow>,
}

impl Comparison {
    pub fn new(name: &str, cmp: gshap::Comparison, expl: &Explanation) -> Self {
        let normalized = normalize_values(&expl.phi).ok();
        let features = expl
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, f)| FeatureRow {
                feature: f.clone(),
                phi: expl.phi[j],
                stderr: expl.stderr.as_ref().map(|s| s[j]),
                normalized_phi: normalized.as_ref().map(|n| n[j]),
            })
            .collect();
        Self {
            name: name.to_owned(),
            g_sample: cmp.g_sample,
            g_background: cmp.g_background,
            difference: cmp.difference,
            phi_sum: expl.phi_sum(),
            g_evaluations: expl.meta.g_evaluations,
            features,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub mode: &'static str,
    pub data: String,
    pub model: String,
    pub engine: EngineInfo,
    pub sample: SampleInfo,
    pub comparisons: Vec<Comparison>,
}

impl Report {
    pub fn new(a: &ExplainArgs, cfg: &EngineConfig, background_rows: usize) -> Self {
        let sampled = cfg.mode == Mode::Sampled;
        Self {
            mode: match a.mode {
                ExplainMode::Output => "output",
                ExplainMode::Classification => "classification",
                ExplainMode::GroupDiff => "group-diff",
                ExplainMode::Failure => "failure",
            },
            data: a.data.display().to_string(),
            model: a.model.clone(),
            engine: EngineInfo {
                method: if sampled { Method::Sampled } else { Method::Exact },
                seed: cfg.seed,
                permutations: sampled.then_some(cfg.permutations),
                background_draws: sampled.then_some(cfg.background_draws),
                background_rows,
            },
            sample: SampleInfo::default(),
            comparisons: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per feature; a `phi`/`normalized_phi` column pair per
    /// comparison. A single comparison uses unprefixed column names.
    pub fn figure_csv(&self) -> String {
        let mut out = String::from("feature");
        let single = self.comparisons.len() == 1;
        for c in &self.comparisons {
            if single {
                out.push_str(",phi,normalized_phi");
            } else {
                let _ = write!(out, ",{0}_phi,{0}_normalized_phi", c.name);
            }
        }
        out.push('\n');
        let n = self.comparisons.first().map_or(0, |c| c.features.len());
        for j in 0..n {
            out.push_str(&csv_field(&self.comparisons[0].features[j].feature));
            for c in &self.comparisons {
                let f = &c.features[j];
                let _ = write!(out, ",{}", f.phi);
                out.push(',');
                if let Some(v) = f.normalized_phi {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{}: g(sample) = {}, g(background) = {}, difference = {}",
                c.name, c.g_sample, c.g_background, c.difference
            );
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn write(path: &Path, contents: &str) -> std::io::Result<()> {
    std::fs::write(path, contents)
}
