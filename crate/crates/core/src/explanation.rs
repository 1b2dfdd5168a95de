use serde::Serialize;

/// How an [`Explanation`] was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Sampled,
}

/// Estimator bookkeeping carried alongside the attributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationMeta {
    pub seed: u64,
    /// Permutations drawn (sampled mode only).
    pub permutations: Option<usize>,
    /// Background offsets used per coalition evaluation.
    pub background_draws: usize,
    /// Number of times the generalized function was evaluated.
    pub g_evaluations: usize,
}

/// Per-feature attributions of `g_full - g_empty`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub feature_names: Vec<String>,
    pub phi: Vec<f64>,
    /// `g` with every feature taken from the sample.
    pub g_full: f64,
    /// `g` with every feature imputed from the background.
    pub g_empty: f64,
    /// Standard error per feature; present for sampled estimates with at
    /// least two permutations.
    pub stderr: Option<Vec<f64>>,
    pub method: Method,
    pub meta: EstimationMeta,
}

impl Explanation {
    pub fn n_features(&self) -> usize {
        self.phi.len()
    }

    pub fn phi_sum(&self) -> f64 {
        self.phi.iter().sum()
    }

    /// `|sum(phi) - (g_full - g_empty)|`, the efficiency residual.
    pub fn efficiency_gap(&self) -> f64 {
        (self.phi_sum() - (self.g_full - self.g_empty)).abs()
    }
}
