//! Feature coalitions, Shapley weights, and hybrid-row composition.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Largest feature count a [`Coalition`] bitmask can represent.
pub const MAX_FEATURES: usize = 64;

/// A subset of the feature indices `0..p`, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition {
    mask: u64,
    p: usize,
}

impl Coalition {
    pub fn empty(p: usize) -> Result<Self> {
        check_p(p)?;
        Ok(Self { mask: 0, p })
    }

    pub fn full(p: usize) -> Result<Self> {
        check_p(p)?;
        Ok(Self { mask: full_mask(p), p })
    }

    pub fn from_indices(indices: &[usize], p: usize) -> Result<Self> {
        check_p(p)?;
        let mut mask = 0u64;
        for &j in indices {
            if j >= p {
                return Err(Error::InvalidCoalition(format!(
                    "feature index {j} out of range for p = {p}"
                )));
            }
            mask |= 1 << j;
        }
        Ok(Self { mask, p })
    }

    pub fn from_mask(mask: u64, p: usize) -> Result<Self> {
        check_p(p)?;
        if mask & !full_mask(p) != 0 {
            return Err(Error::InvalidCoalition(format!(
                "mask {mask:#x} has bits beyond p = {p}"
            )));
        }
        Ok(Self { mask, p })
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Total number of features `p` (not the coalition size).
    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, j: usize) -> bool {
        j < self.p && self.mask & (1 << j) != 0
    }

    pub fn with(&self, j: usize) -> Self {
        debug_assert!(j < self.p);
        Self {
            mask: self.mask | (1 << j),
            p: self.p,
        }
    }

    pub fn without(&self, j: usize) -> Self {
        Self {
            mask: self.mask & !(1 << j),
            p: self.p,
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: !self.mask & full_mask(self.p),
            p: self.p,
        }
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| self.contains(j))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, j) in self.members().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}

fn check_p(p: usize) -> Result<()> {
    if p == 0 || p > MAX_FEATURES {
        return Err(Error::InvalidCoalition(format!(
            "feature count must be in 1..={MAX_FEATURES}, got {p}"
        )));
    }
    Ok(())
}

fn full_mask(p: usize) -> u64 {
    if p == 64 {
        u64::MAX
    } else {
        (1u64 << p) - 1
    }
}

/// Feature counts up to this use the exact integer path in [`coalition_weight`].
const EXACT_WEIGHT_LIMIT: usize = 20;

/// The Shapley weight `|S|! (p - |S| - 1)! / p!` of a coalition of size
/// `s_size` that excludes the feature being scored.
///
/// The weight equals `1 / (p * C(p-1, |S|))`. For `p <= 20` the binomial is
/// computed exactly in integers; larger `p` goes through log-factorials.
///
/// ```
/// # use gshap::coalition_weight;
/// assert_eq!(coalition_weight(0, 2).unwrap(), 0.5);
/// assert!((coalition_weight(1, 3).unwrap() - 1.0 / 6.0).abs() < 1e-15);
/// assert!(coalition_weight(3, 3).is_err());
/// ```
pub fn coalition_weight(s_size: usize, p: usize) -> Result<f64> {
    if p == 0 || s_size >= p {
        return Err(Error::WeightDomain { s_size, p });
    }
    if p <= EXACT_WEIGHT_LIMIT {
        let denom = p as u64 * binomial(p as u64 - 1, s_size as u64);
        return Ok(1.0 / denom as f64);
    }
    let log_w = ln_factorial(s_size) + ln_factorial(p - s_size - 1) - ln_factorial(p);
    Ok(log_w.exp())
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    // Each intermediate is itself a binomial coefficient, so the division is exact.
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Precomputed weights `w[s] = coalition_weight(s, p)` for `s in 0..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    weights: Vec<f64>,
}

impl WeightTable {
    pub fn new(p: usize) -> Result<Self> {
        let weights = (0..p)
            .map(|s| coalition_weight(s, p))
            .collect::<Result<Vec<_>>>()?;
        if weights.is_empty() {
            return Err(Error::WeightDomain { s_size: 0, p });
        }
        Ok(Self { weights })
    }

    /// Builds a table from explicit weights. Used for fault-injection checks.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, s_size: usize) -> f64 {
        self.weights[s_size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Builds hybrid rows: row `i`, column `j` comes from `sample` when `j` is in
/// `coalition` and from `background_rows` row `i` otherwise.
///
/// `background_rows` must already be paired with `sample` row for row.
pub fn hybrid_compose(
    sample: &FeatureMatrix,
    background_rows: &FeatureMatrix,
    coalition: &Coalition,
) -> Result<FeatureMatrix> {
    if sample.feature_names() != background_rows.feature_names() {
        return Err(Error::Composition(
            "sample and background have different feature names".into(),
        ));
    }
    if sample.n_rows() != background_rows.n_rows() {
        return Err(Error::Composition(format!(
            "sample has {} rows but background has {}",
            sample.n_rows(),
            background_rows.n_rows()
        )));
    }
    if coalition.n_features() != sample.n_features() {
        return Err(Error::Composition(format!(
            "coalition over {} features applied to {} columns",
            coalition.n_features(),
            sample.n_features()
        )));
    }
    let n = sample.n_rows();
    let mut values = Vec::with_capacity(n * sample.n_features());
    for i in 0..n {
        compose_row(sample.row(i), background_rows.row(i), coalition.mask(), &mut values);
    }
    Ok(FeatureMatrix::from_parts(values, n, sample.shared_names()))
}

/// Appends one hybrid row to `out`.
#[inline]
pub(crate) fn compose_row(sample: &[f64], background: &[f64], mask: u64, out: &mut Vec<f64>) {
    out.extend(
        sample
            .iter()
            .zip(background)
            .enumerate()
            .map(|(j, (&x, &z))| if mask & (1 << j) != 0 { x } else { z }),
    );
}
