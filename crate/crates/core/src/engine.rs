//! Exact and Monte-Carlo estimation of generalized Shapley values.
//!
//! A coalition `S` is valued by composing hybrid rows (sample columns in `S`,
//! background columns elsewhere) and evaluating `g` on the model's output for
//! them. Sample row `i` is paired with background row `(i + offset) mod |Z|`,
//! so each draw imputes every sample row from one coherent background row.
//!
//! * Exact mode sweeps every offset of a background capped at
//!   [`EngineConfig::background_cap`] rows, values all `2^p` coalitions once,
//!   and assembles the weighted sums. The induced set function is fixed, so
//!   efficiency, symmetry and dummy hold to rounding.
//! * Sampled mode walks seeded random feature orderings. Each ordering uses
//!   one random offset per background draw along its whole chain, so the
//!   marginal contributions of one ordering telescope exactly.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coalition::{compose_row, Coalition, WeightTable, MAX_FEATURES};
use crate::error::{Error, Result};
use crate::explanation::{EstimationMeta, Explanation, Method};
use crate::genfns::GeneralizedFunction;
use crate::matrix::FeatureMatrix;
use crate::model::BlackBoxModel;

/// Rows sent to the model in one `predict` call.
const MAX_BATCH_ROWS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub mode: Mode,
    /// Largest feature count accepted in exact mode.
    pub max_exact_features: usize,
    /// Feature orderings drawn in sampled mode.
    pub permutations: usize,
    /// Random background offsets per ordering in sampled mode.
    pub background_draws: usize,
    /// Background rows swept in exact mode; larger backgrounds are
    /// subsampled by seed.
    pub background_cap: usize,
    pub seed: u64,
    /// Fan work out over threads when the model allows it.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Exact,
            max_exact_features: 16,
            permutations: 2048,
            background_draws: 16,
            background_cap: 64,
            seed: 0,
            parallel: true,
        }
    }
}

impl EngineConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn sampled(permutations: usize, seed: u64) -> Self {
        Self {
            mode: Mode::Sampled,
            permutations,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::Config("permutation count must be at least 1".into()));
        }
        if self.background_draws == 0 {
            return Err(Error::Config("background draws must be at least 1".into()));
        }
        if self.background_cap == 0 {
            return Err(Error::Config("background cap must be at least 1".into()));
        }
        if self.max_exact_features > MAX_FEATURES {
            return Err(Error::Config(format!(
                "exact mode cannot exceed {MAX_FEATURES} features"
            )));
        }
        Ok(())
    }
}

/// Values coalitions for one `(g, model, X, Z)` problem and counts `g` calls.
struct Game<'a, G: ?Sized> {
    g: &'a G,
    model: &'a dyn BlackBoxModel,
    x: &'a FeatureMatrix,
    background: FeatureMatrix,
    evaluations: AtomicUsize,
}

impl<'a, G: GeneralizedFunction + ?Sized> Game<'a, G> {
    fn new(
        g: &'a G,
        model: &'a dyn BlackBoxModel,
        x: &'a FeatureMatrix,
        z: &FeatureMatrix,
        background: FeatureMatrix,
    ) -> Result<Self> {
        if x.feature_names() != z.feature_names() {
            return Err(Error::Composition(
                "sample and background have different feature names".into(),
            ));
        }
        if x.n_features() > MAX_FEATURES {
            return Err(Error::Config(format!(
                "at most {MAX_FEATURES} features are supported, got {}",
                x.n_features()
            )));
        }
        Ok(Self {
            g,
            model,
            x,
            background,
            evaluations: AtomicUsize::new(0),
        })
    }

    fn p(&self) -> usize {
        self.x.n_features()
    }

    fn n_background(&self) -> usize {
        self.background.n_rows()
    }

    /// `g` on the unimputed sample.
    fn full_value(&self) -> Result<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let full = Coalition::full(self.p())?;
        self.g
            .evaluate(self.model, self.x)
            .map_err(|e| annotate(e, &full))
    }

    /// `g` for each `(coalition mask, background offset)` pair.
    fn values(&self, items: &[(u64, usize)]) -> Result<Vec<f64>> {
        let n = self.x.n_rows();
        let p = self.p();
        let items_per_batch = (MAX_BATCH_ROWS / n).max(1);
        let mut out = Vec::with_capacity(items.len());
        for batch in items.chunks(items_per_batch) {
            let mut buf = Vec::with_capacity(batch.len() * n * p);
            for &(mask, offset) in batch {
                for i in 0..n {
                    let z = self.background.row((i + offset) % self.n_background());
                    compose_row(self.x.row(i), z, mask, &mut buf);
                }
            }
            let hybrid = FeatureMatrix::from_parts(buf, batch.len() * n, self.x.shared_names());
            let output = self.model.predict(&hybrid)?;
            if output.n_rows() != hybrid.n_rows() {
                return Err(Error::InvalidOutput(format!(
                    "model returned {} rows for {} inputs",
                    output.n_rows(),
                    hybrid.n_rows()
                )));
            }
            for (k, &(mask, _)) in batch.iter().enumerate() {
                let chunk = output.slice(k * n, n);
                let v = self.g.evaluate_output(&chunk).map_err(|e| {
                    annotate(e, &Coalition::from_mask(mask, p).expect("mask within p"))
                })?;
                out.push(v);
            }
            self.evaluations.fetch_add(batch.len(), Ordering::Relaxed);
        }
        Ok(out)
    }

    /// Mean of `g` over the given offsets for one coalition.
    fn mean_value(&self, mask: u64, offsets: &[usize]) -> Result<f64> {
        let items: Vec<_> = offsets.iter().map(|&o| (mask, o)).collect();
        let values = self.values(&items)?;
        // Centred on the first value so that identical draws average to
        // exactly that value.
        let first = values[0];
        Ok(first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64)
    }

    fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}

fn annotate(err: Error, coalition: &Coalition) -> Error {
    match err {
        e @ Error::AtCoalition { .. } => e,
        e => Error::AtCoalition {
            coalition: coalition.to_string(),
            source: Box::new(e),
        },
    }
}

/// The background swept in exact mode: all of `z`, or `cap` rows chosen by
/// seed (kept in their original order) when `z` is larger.
fn exact_background(z: &FeatureMatrix, cap: usize, seed: u64) -> Result<FeatureMatrix> {
    if z.n_rows() <= cap {
        return Ok(z.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, z.n_rows(), cap).into_vec();
    idx.sort_unstable();
    z.select_rows(&idx)
}

fn use_threads(cfg: &EngineConfig, model: &dyn BlackBoxModel) -> bool {
    cfg.parallel && model.concurrent_safe()
}

fn check_exact(p: usize, cfg: &EngineConfig) -> Result<()> {
    if p > cfg.max_exact_features {
        return Err(Error::TooManyFeatures {
            p,
            max: cfg.max_exact_features,
        });
    }
    Ok(())
}

/// Mean of `g(model, hybrid(X, Z_draw, S))` over background draws.
///
/// Exact mode sweeps offsets `0..min(|Z|, cap)` of the (capped) background;
/// sampled mode draws `background_draws` seeded offsets over all of `Z`.
pub fn evaluate_coalition<G: GeneralizedFunction + ?Sized>(
    g: &G,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    coalition: &Coalition,
    cfg: &EngineConfig,
) -> Result<f64> {
    cfg.validate()?;
    if coalition.n_features() != x.n_features() {
        return Err(Error::Composition(format!(
            "coalition over {} features applied to {} columns",
            coalition.n_features(),
            x.n_features()
        )));
    }
    let (background, offsets) = match cfg.mode {
        Mode::Exact => {
            let b = exact_background(z, cfg.background_cap, cfg.seed)?;
            let offsets = (0..b.n_rows()).collect::<Vec<_>>();
            (b, offsets)
        }
        Mode::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let offsets = (0..cfg.background_draws)
                .map(|_| rng.gen_range(0..z.n_rows()))
                .collect();
            (z.clone(), offsets)
        }
    };
    let game = Game::new(g, model, x, z, background)?;
    if coalition.len() == x.n_features() {
        return game.full_value();
    }
    game.mean_value(coalition.mask(), &offsets)
}

/// Exact generalized Shapley values by full coalition enumeration.
///
/// ```
/// use gshap::{exact_gshap, EngineConfig, FeatureMatrix, FnModel, OutputG};
///
/// let model = FnModel::new(|r: &[f64]| r[0] * r[1]);
/// let x = FeatureMatrix::from_rows_unnamed(&[[2.0, 3.0]]).unwrap();
/// let z = FeatureMatrix::from_rows_unnamed(&[[0.0, 0.0]]).unwrap();
/// let e = exact_gshap(&OutputG::scalar(), &model, &x, &z, &EngineConfig::exact()).unwrap();
/// assert_eq!(e.phi, vec![3.0, 3.0]);
/// ```
pub fn exact_gshap<G: GeneralizedFunction + ?Sized>(
    g: &G,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    cfg: &EngineConfig,
) -> Result<Explanation> {
    cfg.validate()?;
    check_exact(x.n_features(), cfg)?;
    let weights = WeightTable::new(x.n_features())?;
    exact_gshap_with_weights(g, model, x, z, cfg, &weights)
}

/// [`exact_gshap`] with a caller-supplied weight table. A table that is not
/// the Shapley table breaks efficiency, which is how the self-check proves it
/// can detect a faulty engine.
pub fn exact_gshap_with_weights<G: GeneralizedFunction + ?Sized>(
    g: &G,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    cfg: &EngineConfig,
    weights: &WeightTable,
) -> Result<Explanation> {
    cfg.validate()?;
    let p = x.n_features();
    check_exact(p, cfg)?;
    if weights.n_features() != p {
        return Err(Error::Config(format!(
            "weight table is for {} features, sample has {p}",
            weights.n_features()
        )));
    }
    let background = exact_background(z, cfg.background_cap, cfg.seed)?;
    let offsets: Vec<usize> = (0..background.n_rows()).collect();
    let game = Game::new(g, model, x, z, background)?;

    let full = (1u64 << p) - 1;
    let value = |mask: u64| -> Result<f64> {
        if mask == full {
            game.full_value()
        } else {
            game.mean_value(mask, &offsets)
        }
    };
    let table: Vec<f64> = if use_threads(cfg, model) {
        (0..=full).into_par_iter().map(value).collect::<Result<_>>()?
    } else {
        (0..=full).map(value).collect::<Result<_>>()?
    };

    let phi = (0..p)
        .map(|j| {
            let bit = 1u64 << j;
            (0..=full)
                .filter(|mask| mask & bit == 0)
                .map(|mask| {
                    let w = weights.weight(mask.count_ones() as usize);
                    w * (table[(mask | bit) as usize] - table[mask as usize])
                })
                .sum()
        })
        .collect();

    Ok(Explanation {
        feature_names: x.feature_names().to_vec(),
        phi,
        g_full: table[full as usize],
        g_empty: table[0],
        stderr: None,
        method: Method::Exact,
        meta: EstimationMeta {
            seed: cfg.seed,
            permutations: None,
            background_draws: offsets.len(),
            g_evaluations: game.evaluations(),
        },
    })
}

/// Contributions gathered along one feature ordering.
struct PermutationSample {
    /// Mean marginal contribution of each feature, indexed by feature.
    contributions: Vec<f64>,
    /// Mean value of the empty coalition over this ordering's draws.
    start: f64,
}

/// Generalized Shapley values estimated from seeded random feature orderings.
pub fn sampled_gshap<G: GeneralizedFunction + ?Sized>(
    g: &G,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    cfg: &EngineConfig,
) -> Result<Explanation> {
    cfg.validate()?;
    let game = Game::new(g, model, x, z, z.clone())?;
    let p = x.n_features();
    let m = cfg.permutations;
    let draws = cfg.background_draws;

    // Every ordering and offset is drawn up front so results do not depend
    // on how the work is scheduled.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut plans = Vec::with_capacity(m);
    for _ in 0..m {
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        let offsets: Vec<usize> = (0..draws)
            .map(|_| rng.gen_range(0..game.n_background()))
            .collect();
        plans.push((order, offsets));
    }

    let g_full = game.full_value()?;
    let walk = |(order, offsets): &(Vec<usize>, Vec<usize>)| -> Result<PermutationSample> {
        // Chain masks before the final (full) coalition.
        let mut masks = Vec::with_capacity(p);
        let mut mask = 0u64;
        masks.push(mask);
        for &j in &order[..p - 1] {
            mask |= 1 << j;
            masks.push(mask);
        }
        let items: Vec<(u64, usize)> = offsets
            .iter()
            .flat_map(|&o| masks.iter().map(move |&mk| (mk, o)))
            .collect();
        let values = game.values(&items)?;

        let mut contributions = vec![0.0; p];
        let mut start = 0.0;
        for chain in values.chunks_exact(p) {
            start += chain[0];
            for (k, &j) in order.iter().enumerate() {
                let next = if k + 1 < p { chain[k + 1] } else { g_full };
                contributions[j] += next - chain[k];
            }
        }
        let d = offsets.len() as f64;
        contributions.iter_mut().for_each(|c| *c /= d);
        Ok(PermutationSample {
            contributions,
            start: start / d,
        })
    };
    let samples: Vec<PermutationSample> = if use_threads(cfg, model) {
        plans.par_iter().map(walk).collect::<Result<_>>()?
    } else {
        plans.iter().map(walk).collect::<Result<_>>()?
    };

    let mf = m as f64;
    let phi: Vec<f64> = (0..p)
        .map(|j| samples.iter().map(|s| s.contributions[j]).sum::<f64>() / mf)
        .collect();
    let g_empty = samples.iter().map(|s| s.start).sum::<f64>() / mf;
    let stderr = (m >= 2).then(|| {
        (0..p)
            .map(|j| {
                let ss: f64 = samples
                    .iter()
                    .map(|s| (s.contributions[j] - phi[j]).powi(2))
                    .sum();
                (ss / (mf - 1.0)).sqrt() / mf.sqrt()
            })
            .collect()
    });

    Ok(Explanation {
        feature_names: x.feature_names().to_vec(),
        phi,
        g_full,
        g_empty,
        stderr,
        method: Method::Sampled,
        meta: EstimationMeta {
            seed: cfg.seed,
            permutations: Some(m),
            background_draws: draws,
            g_evaluations: game.evaluations(),
        },
    })
}

/// Runs the estimator selected by `cfg.mode`.
pub fn explain<G: GeneralizedFunction + ?Sized>(
    g: &G,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    cfg: &EngineConfig,
) -> Result<Explanation> {
    match cfg.mode {
        Mode::Exact => exact_gshap(g, model, x, z, cfg),
        Mode::Sampled => sampled_gshap(g, model, x, z, cfg),
    }
}

/// Attributions rescaled to sum to one.
///
/// Signs are kept, so with mixed-sign attributions some entries fall outside
/// `[0, 1]`.
pub fn normalize(expl: &Explanation) -> Result<Vec<f64>> {
    normalize_values(&expl.phi)
}

pub fn normalize_values(phi: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = phi.iter().sum();
    let scale: f64 = phi.iter().map(|v| v.abs()).sum();
    // Sums that are zero up to cancellation error count as zero.
    if scale == 0.0 || total.abs() <= 16.0 * f64::EPSILON * scale || !total.is_finite() {
        return Err(Error::ZeroSum);
    }
    Ok(phi.iter().map(|v| v / total).collect())
}

/// `g` on the sample, `g` on the background, and their difference.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub g_sample: f64,
    pub g_background: f64,
    pub difference: f64,
}

/// The difference decomposed by `expl`: `g(f, X)` on the unimputed sample
/// against the explanation's fully imputed baseline.
pub fn comparison_report<G: GeneralizedFunction + ?Sized>(
    g: &G,
    model: &dyn BlackBoxModel,
    x: &FeatureMatrix,
    expl: &Explanation,
) -> Result<Comparison> {
    let g_sample = g.evaluate(model, x)?;
    Ok(Comparison {
        g_sample,
        g_background: expl.g_empty,
        difference: g_sample - expl.g_empty,
    })
}
