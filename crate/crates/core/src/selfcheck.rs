//! Axiom checks on small built-in fixtures.
//!
//! [`run_selfcheck`] exercises the exact and sampled engines on problems with
//! known answers and reports each check against its tolerance. The CLI's
//! `selfcheck` command prints this table and exits nonzero on any failure.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::WeightTable;
use crate::engine::{exact_gshap_with_weights, sampled_gshap, EngineConfig};
use crate::error::Result;
use crate::explanation::Explanation;
use crate::genfns::{ClassPartition, ClassificationG, OutputG};
use crate::matrix::FeatureMatrix;
use crate::model::FnModel;
use crate::models::KnnClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub limit: Limit,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64, limit: Limit) -> Self {
        let passed = match limit {
            Limit::AtMost => value <= tolerance,
            Limit::AtLeast => value >= tolerance,
        };
        Self {
            name,
            value,
            tolerance,
            limit,
            passed,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelfCheckOptions {
    pub seed: u64,
    /// Scales one Shapley weight so the efficiency checks must fail.
    pub perturb_weights: bool,
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Fixed-width table, one line per check.
pub fn render_table(checks: &[Check]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<28} {:>14} {:>4} {:>10}  result", "check", "value", "", "tolerance");
    for c in checks {
        let op = match c.limit {
            Limit::AtMost => "<=",
            Limit::AtLeast => ">=",
        };
        let _ = writeln!(
            out,
            "{:<28} {:>14.6e} {:>4} {:>10.1e}  {}",
            c.name,
            c.value,
            op,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    out
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    FeatureMatrix::from_rows_unnamed(&rows).expect("finite fixture")
}

fn weights_for(p: usize, perturb: bool) -> Result<WeightTable> {
    let table = WeightTable::new(p)?;
    if !perturb {
        return Ok(table);
    }
    let mut w = table.as_slice().to_vec();
    w[0] *= 1.5;
    Ok(WeightTable::from_weights(w))
}

fn relative_gap(e: &Explanation) -> f64 {
    let scale = e.g_full.abs().max(e.g_empty.abs()).max(1.0);
    e.efficiency_gap().abs() / scale
}

/// Direct interventional Shapley values of one row against a background,
/// computed from the permutation definition.
fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], z: &FeatureMatrix) -> Vec<f64> {
    let p = x.len();
    let mut phi = vec![0.0; p];
    let mut order: Vec<usize> = (0..p).collect();
    let mut count = 0usize;
    let value = |present: &[bool]| -> f64 {
        z.rows()
            .map(|b| {
                let r: Vec<f64> = (0..p).map(|j| if present[j] { x[j] } else { b[j] }).collect();
                f(&r)
            })
            .sum::<f64>()
            / z.n_rows() as f64
    };
    loop {
        let mut present = vec![false; p];
        let mut prev = value(&present);
        for &j in &order {
            present[j] = true;
            let next = value(&present);
            phi[j] += next - prev;
            prev = next;
        }
        count += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    phi.iter_mut().for_each(|v| *v /= count as f64);
    phi
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn nonlinear(r: &[f64]) -> f64 {
    r[0] * r[1] + (r[2] - 0.5 * r[3]).tanh() + 0.3 * r[4] * r[4]
}

/// Runs every check. Errors only come from the engine itself.
pub fn run_selfcheck(opts: &SelfCheckOptions) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cfg = EngineConfig {
        seed: opts.seed,
        ..EngineConfig::exact()
    };
    let mut checks = Vec::new();

    // Efficiency on a regression output.
    let model = FnModel::new(nonlinear);
    let x = random_matrix(&mut rng, 6, 5);
    let z = random_matrix(&mut rng, 10, 5);
    let g = OutputG::scalar();
    let e = exact_gshap_with_weights(&g, &model, &x, &z, &cfg, &weights_for(5, opts.perturb_weights)?)?;
    checks.push(Check::new("efficiency/output", relative_gap(&e), 1e-9, Limit::AtMost));

    // Efficiency on a classification g over a fitted classifier.
    let train = random_matrix(&mut rng, 40, 3);
    let labels: Vec<String> = train
        .rows()
        .map(|r| if r[0] + r[1] > 0.0 { "pos" } else { "neg" }.to_string())
        .collect();
    let knn = KnnClassifier::fit_smoothed(&train, &labels, 5, 1.0)?;
    let cg = ClassificationG::new(ClassPartition::new(["pos"], ["neg"])?);
    let xs = random_matrix(&mut rng, 4, 3);
    let e = exact_gshap_with_weights(&cg, &knn, &xs, &train, &cfg, &weights_for(3, opts.perturb_weights)?)?;
    checks.push(Check::new("efficiency/classification", relative_gap(&e), 1e-9, Limit::AtMost));

    // Symmetry: columns 0 and 1 carry identical values and enter the model
    // symmetrically.
    let sym = FnModel::new(|r: &[f64]| (r[0] + r[1]).powi(2) + r[0] * r[1] * r[2] + r[3]);
    let dup = |m: &FeatureMatrix| -> Result<FeatureMatrix> { m.with_column(1, &m.column(0)) };
    let xs = dup(&random_matrix(&mut rng, 5, 4))?;
    let zs = dup(&random_matrix(&mut rng, 8, 4))?;
    let e = exact_gshap_with_weights(&g, &sym, &xs, &zs, &cfg, &WeightTable::new(4)?)?;
    checks.push(Check::new("symmetry", (e.phi[0] - e.phi[1]).abs(), 1e-9, Limit::AtMost));

    // Dummy: the model never reads column 3.
    let dummy = FnModel::new(|r: &[f64]| r[0].sin() * r[1] + r[2]);
    let xd = random_matrix(&mut rng, 5, 4);
    let zd = random_matrix(&mut rng, 8, 4);
    let e = exact_gshap_with_weights(&g, &dummy, &xd, &zd, &cfg, &WeightTable::new(4)?)?;
    checks.push(Check::new("dummy", e.phi[3].abs(), 0.0, Limit::AtMost));

    // Classic reduction: one sample row, mean output.
    let x1 = random_matrix(&mut rng, 1, 5);
    let e = exact_gshap_with_weights(&g, &model, &x1, &z, &cfg, &WeightTable::new(5)?)?;
    let direct = permutation_shapley(&nonlinear, x1.row(0), &z);
    let gap = e.phi.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::new("classic_reduction", gap, 1e-9, Limit::AtMost));

    // Estimator consistency: sampled within 4 standard errors of exact.
    let mut within = 0usize;
    let mut total = 0usize;
    for trial in 0..4u64 {
        let xc = random_matrix(&mut rng, 3, 5);
        let zc = random_matrix(&mut rng, 12, 5);
        let exact = exact_gshap_with_weights(&g, &model, &xc, &zc, &cfg, &WeightTable::new(5)?)?;
        let scfg = EngineConfig {
            background_draws: 4,
            ..EngineConfig::sampled(1024, opts.seed.wrapping_add(trial))
        };
        let s = sampled_gshap(&g, &model, &xc, &zc, &scfg)?;
        let se = s.stderr.as_deref().unwrap_or_default();
        for j in 0..5 {
            total += 1;
            if (s.phi[j] - exact.phi[j]).abs() <= 4.0 * se[j] + 1e-12 {
                within += 1;
            }
        }
    }
    checks.push(Check::new(
        "estimator_consistency",
        within as f64 / total as f64,
        0.9,
        Limit::AtLeast,
    ));

    // Determinism: repeated sampled runs are bitwise equal.
    let scfg = EngineConfig::sampled(256, opts.seed);
    let a = sampled_gshap(&g, &model, &x, &z, &scfg)?;
    let b = sampled_gshap(&g, &model, &x, &z, &scfg)?;
    let same = a.phi.iter().zip(&b.phi).all(|(u, v)| u.to_bits() == v.to_bits());
    checks.push(Check::new("determinism", if same { 0.0 } else { 1.0 }, 0.0, Limit::AtMost));

    Ok(checks)
}
