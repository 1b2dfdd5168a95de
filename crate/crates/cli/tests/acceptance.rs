//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gshap::engine::exact_gshap;
use gshap::genfns::classification_g;
use gshap::models::{KnnClassifier, KnnRegressor, LogisticClassifier, PcaKnnRegressor};
use gshap::{
    sampled_gshap, BlackBoxModel, ClassPartition, ClassificationG, DecisionIndicator,
    DifferenceMeasure, EngineConfig, FeatureMatrix, FnModel, GeneralizedFunction, GroupAssignment,
    IntergroupG, LabelSet, Loss, LossG, ModelOutput, OutputG, OutputTarget,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Verdict = Result<String, String>;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    FeatureMatrix::from_rows_unnamed(&rows).unwrap()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

// ---------------------------------------------------------------------------
// Criterion 1: efficiency over random instances.

struct Fitted {
    classifier: Vec<Box<dyn BlackBoxModel>>,
    regressor: Vec<Box<dyn BlackBoxModel>>,
}

fn fit_models(rng: &mut ChaCha8Rng, p: usize) -> Fitted {
    let train = random_matrix(rng, 60, p);
    let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let score = |r: &[f64]| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let labels: Vec<String> = train.rows().map(|r| if score(r) > 0.0 { "yes" } else { "no" }.to_string()).collect();
    let targets: Vec<f64> = train.rows().map(|r| score(r) + r[0] * r[0]).collect();
    let components = rng.gen_range(1..=p.min(3));
    Fitted {
        classifier: vec![
            Box::new(KnnClassifier::fit_smoothed(&train, &labels, 5, 0.5).unwrap()),
            Box::new(LogisticClassifier::fit(&train, &labels, 100, 0.5).unwrap()),
        ],
        regressor: vec![
            Box::new(KnnRegressor::fit(&train, &targets, 4).unwrap()),
            Box::new(PcaKnnRegressor::fit(&train, &targets, components, 4).unwrap()),
        ],
    }
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = EngineConfig::exact();
    let mut instances = 0;
    let mut worst: f64 = 0.0;
    while instances < 120 {
        let p = rng.gen_range(2..=8);
        let n = rng.gen_range(2..=5);
        let models = fit_models(&mut rng, p);
        let x = random_matrix(&mut rng, n, p);
        let nz = rng.gen_range(3..=10);
        let z = random_matrix(&mut rng, nz, p);
        let mut membership: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        membership.shuffle(&mut rng);
        let groups = GroupAssignment::new(membership, DifferenceMeasure::AbsoluteMean).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y01: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();

        let class_gs: Vec<Box<dyn GeneralizedFunction>> = vec![
            Box::new(OutputG::new(OutputTarget::Class("yes".into()))),
            Box::new(ClassificationG::new(ClassPartition::new(["yes"], ["no"]).unwrap())),
            Box::new(IntergroupG::new(groups.clone(), DecisionIndicator::Probability("yes".into()))),
            Box::new(LossG::new(LabelSet::new(y01, Loss::MeanSquaredError).unwrap(), OutputTarget::Class("yes".into()))),
        ];
        let reg_gs: Vec<Box<dyn GeneralizedFunction>> = vec![
            Box::new(OutputG::scalar()),
            Box::new(IntergroupG::new(groups, DecisionIndicator::Scalar)),
            Box::new(LossG::new(LabelSet::new(y, Loss::RSquared).unwrap(), OutputTarget::Scalar)),
        ];
        let pairs = models
            .classifier
            .iter()
            .flat_map(|m| class_gs.iter().map(move |g| (m, g)))
            .chain(models.regressor.iter().flat_map(|m| reg_gs.iter().map(move |g| (m, g))));
        for (m, g) in pairs {
            let e = exact_gshap(g.as_ref(), m.as_ref(), &x, &z, &cfg).map_err(|e| e.to_string())?;
            // Relative to the g magnitudes, with an absolute floor near zero.
            let scale = e.g_full.abs().max(e.g_empty.abs()).max(1.0);
            let rel = e.efficiency_gap() / scale;
            worst = worst.max(rel);
            instances += 1;
        }
    }
    let detail = format!("{instances} instances, worst relative gap {worst:.2e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Criterion 2: single-row output explanations equal directly computed
// Shapley values.

fn direct_shapley(model: &dyn BlackBoxModel, x: &[f64], z: &FeatureMatrix) -> Vec<f64> {
    let p = x.len();
    let value = |subset: usize| -> f64 {
        let rows: Vec<Vec<f64>> = z
            .rows()
            .map(|b| (0..p).map(|j| if subset >> j & 1 == 1 { x[j] } else { b[j] }).collect())
            .collect();
        let ModelOutput::Scalars(v) = model.predict(&FeatureMatrix::from_rows_unnamed(&rows).unwrap()).unwrap() else {
            panic!("scalar model expected")
        };
        v.iter().sum::<f64>() / v.len() as f64
    };
    (0..p)
        .map(|j| {
            (0..1usize << p)
                .filter(|s| s >> j & 1 == 0)
                .map(|s| {
                    let k = s.count_ones() as usize;
                    factorial(k) * factorial(p - k - 1) / factorial(p) * (value(s | 1 << j) - value(s))
                })
                .sum()
        })
        .collect()
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let p = rng.gen_range(1..=6);
        let x = random_matrix(&mut rng, 1, p);
        let nz = rng.gen_range(1..=12);
        let z = random_matrix(&mut rng, nz, p);
        let model: Box<dyn BlackBoxModel> = if trial % 2 == 0 {
            let c: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Box::new(FnModel::new(move |r: &[f64]| {
                let s: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
                s.tanh() + r[0] * r[p - 1] + s * s * 0.1
            }))
        } else {
            let train = random_matrix(&mut rng, 40, p);
            let t: Vec<f64> = train.rows().map(|r| r.iter().map(|v| v.sin()).sum()).collect();
            Box::new(KnnRegressor::fit(&train, &t, 3).unwrap())
        };
        let e = exact_gshap(&OutputG::scalar(), model.as_ref(), &x, &z, &EngineConfig::exact()).map_err(|e| e.to_string())?;
        let oracle = direct_shapley(model.as_ref(), x.row(0), &z);
        for (a, b) in e.phi.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    let detail = format!("50 instances, worst |phi - direct| {worst:.2e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: sampled estimates cover exact values.

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut covered = 0;
    let mut coords_out = 0;
    for trial in 0..100u64 {
        let p = rng.gen_range(2..=8);
        let c: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = FnModel::new(move |r: &[f64]| {
            let s: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            s.sin() + r[0] * r[p - 1] - 0.2 * r[p / 2] * r[p / 2]
        });
        let x = random_matrix(&mut rng, 4, p);
        let z = random_matrix(&mut rng, 16, p);
        let g = OutputG::scalar();
        let exact = exact_gshap(&g, &model, &x, &z, &EngineConfig::exact()).map_err(|e| e.to_string())?;
        let cfg = EngineConfig {
            background_draws: 2,
            ..EngineConfig::sampled(4096, 1000 + trial)
        };
        let s = sampled_gshap(&g, &model, &x, &z, &cfg).map_err(|e| e.to_string())?;
        let se = s.stderr.as_ref().ok_or("no standard errors")?;
        let misses = (0..p).filter(|&j| (s.phi[j] - exact.phi[j]).abs() > 4.0 * se[j]).count();
        coords_out += misses;
        if misses == 0 {
            covered += 1;
        }
    }
    let detail = format!("{covered}/100 trials fully within 4 stderr ({coords_out} coordinates outside)");
    if covered >= 95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: dummy and symmetry.

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut dummy_max: f64 = 0.0;
    let mut sym_max: f64 = 0.0;
    for _ in 0..20 {
        let p = rng.gen_range(3..=7);
        // The model reads every column except the last.
        let model = FnModel::new(move |r: &[f64]| {
            let s: f64 = r[..p - 1].iter().sum();
            s.tanh() + r[0] * r[1]
        });
        let x = random_matrix(&mut rng, 5, p);
        let z = random_matrix(&mut rng, 9, p);
        for g in [
            Box::new(OutputG::scalar()) as Box<dyn GeneralizedFunction>,
            Box::new(IntergroupG::new(
                GroupAssignment::new(vec![true, false, true, false, false], DifferenceMeasure::AbsoluteMean).unwrap(),
                DecisionIndicator::Scalar,
            )),
        ] {
            let e = exact_gshap(g.as_ref(), &model, &x, &z, &EngineConfig::exact()).map_err(|e| e.to_string())?;
            dummy_max = dummy_max.max(e.phi[p - 1].abs());
        }

        // Columns 0 and 1 are copies and the model is symmetric in them.
        let dup = |m: FeatureMatrix| m.with_column(1, &m.column(0)).unwrap();
        let x = dup(random_matrix(&mut rng, 5, p));
        let z = dup(random_matrix(&mut rng, 9, p));
        let sym = FnModel::new(|r: &[f64]| (r[0] * r[1]).sin() + r[0] + r[1] + r[2] * (r[0] + r[1]));
        let e = exact_gshap(&OutputG::scalar(), &sym, &x, &z, &EngineConfig::exact()).map_err(|e| e.to_string())?;
        sym_max = sym_max.max((e.phi[0] - e.phi[1]).abs());
    }
    let detail = format!("max |dummy phi| {dummy_max:e}, max duplicate gap {sym_max:.2e}");
    if dummy_max == 0.0 && sym_max <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// CLI fixtures.

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gshap")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "gshap exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn phi_by_feature(cmp: &Value) -> Vec<(String, f64)> {
    cmp["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["feature"].as_str().unwrap().to_owned(), f["phi"].as_f64().unwrap()))
        .collect()
}

/// Recidivism-like data: group membership shifts prior counts and age, and
/// the outcome depends on both and on the group itself.
fn intergroup_fixture(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut rows = Vec::new();
    for _ in 0..8000 {
        let group = rng.gen_bool(0.5);
        let g = f64::from(u8::from(group));
        let priors = (rng.gen_range(0.0..1.0f64) * (2.0 + 4.0 * g)).floor() + (normal(&mut rng).abs() * 1.5 * (1.0 + g)).floor();
        let age = (35.0 - 6.0 * g + 9.0 * normal(&mut rng)).clamp(18.0, 75.0).round();
        let charge = f64::from(u8::from(rng.gen_bool(0.4)));
        let sex = f64::from(u8::from(rng.gen_bool(0.8)));
        let juvenile = (normal(&mut rng).abs() * 0.7).floor();
        let logit = -1.0 + 0.45 * priors - 0.06 * (age - 35.0) + 0.4 * g + 0.2 * charge + 0.1 * sex + 0.1 * juvenile;
        let y = rng.gen_bool(1.0 / (1.0 + (-logit).exp()));
        rows.push(vec![
            format!("{priors}"),
            format!("{age}"),
            format!("{charge}"),
            format!("{sex}"),
            format!("{juvenile}"),
            format!("{g}"),
            if y { "yes" } else { "no" }.to_string(),
        ]);
    }
    write_csv(path, &["priors", "age", "charge", "sex", "juvenile", "race", "reoffend"], &rows);
}

fn intergroup_args<'a>(data: &'a str, report: &'a str) -> Vec<&'a str> {
    vec![
        "explain",
        "--mode",
        "group-diff",
        "--data",
        data,
        "--schema",
        "target=reoffend;group=race;features=priors,age,charge,sex,juvenile,race",
        "--model",
        "logistic:epochs=300,lr=0.5",
        "--group-col",
        "race=1",
        "--positive-classes",
        "yes",
        "--seed",
        "7",
        "--out-report",
        report,
    ]
}

fn criterion_5(dir: &Path) -> Verdict {
    let data = dir.join("intergroup.csv");
    intergroup_fixture(&data);
    let data = data.to_str().unwrap();
    let report = dir.join("c5_test.json");
    run_cli(&intergroup_args(data, report.to_str().unwrap()))?;
    let r = read_json(&report);
    let cmp = &r["comparisons"][0];
    let diff = cmp["difference"].as_f64().unwrap();
    let mut phi = phi_by_feature(cmp);
    phi.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    let mut top: Vec<&str> = phi[..3].iter().map(|(n, _)| n.as_str()).collect();
    top.sort_unstable();

    let shuffled = dir.join("c5_shuffled.json");
    let mut args = intergroup_args(data, shuffled.to_str().unwrap());
    args.extend(["--sample-from", "train", "--shuffle-sample"]);
    run_cli(&args)?;
    let s = read_json(&shuffled);
    let shuffled_diff = s["comparisons"][0]["g_sample"].as_f64().unwrap();

    let detail = format!("diff {diff:.4}, top-3 {top:?}, shuffled-sample g {shuffled_diff:.4}");
    if diff > 0.0 && top == ["age", "priors", "race"] && shuffled_diff.abs() <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Three well-separated classes in four dimensions.
fn species_fixture(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let centres = [("setosa", [0.0, 0.0, 0.0, 0.0]), ("versicolor", [4.0, 4.0, 0.0, 2.0]), ("virginica", [8.0, 0.0, 4.0, 4.0])];
    let mut rows = Vec::new();
    for i in 0..150 {
        let (label, c) = centres[i % 3];
        let mut r: Vec<String> = c.iter().map(|m| format!("{:.3}", m + 0.6 * normal(&mut rng))).collect();
        r.push(label.to_string());
        rows.push(r);
    }
    write_csv(path, &["sepal_length", "sepal_width", "petal_length", "petal_width", "species"], &rows);
}

fn max_abs_phi(report: &Path) -> f64 {
    phi_by_feature(&read_json(report)["comparisons"][0])
        .iter()
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

fn criterion_6(dir: &Path) -> Verdict {
    let data = dir.join("species.csv");
    species_fixture(&data);
    let data = data.to_str().unwrap();
    let base = |report: &Path, select: &str| -> Result<(), String> {
        run_cli(&[
            "explain",
            "--mode",
            "classification",
            "--data",
            data,
            "--schema",
            "target=species",
            "--model",
            "knn-classifier:k=5,smoothing=0.5",
            "--positive-classes",
            "versicolor",
            "--sample-select",
            select,
            "--seed",
            "3",
            "--out-report",
            report.to_str().unwrap(),
        ])
    };
    let pure = dir.join("c6_pure.json");
    base(&pure, "class:versicolor:10")?;
    let mixed = dir.join("c6_mixed.json");
    base(&mixed, "range:0..10")?;
    let g_pure = read_json(&pure)["comparisons"][0]["g_sample"].as_f64().unwrap();
    let (a, b) = (max_abs_phi(&pure), max_abs_phi(&mixed));
    let ratio = b / a;
    let detail = format!("pure g {g_pure:.4}, max|phi| pure {a:.4e}, mixed {b:.4e}, ratio {ratio:.2e}");
    if g_pure >= 0.99 && ratio <= 0.2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Monthly series where the effect of `loans` on the target flips sign in
/// the final quarter of the data.
fn forecasting_fixture(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let n = 400;
    let mut rows = Vec::new();
    for t in 0..n {
        let late = t >= n * 3 / 4;
        let loans = normal(&mut rng);
        let rates = normal(&mut rng);
        let income = normal(&mut rng);
        let permits = normal(&mut rng);
        let wages = normal(&mut rng);
        let salaries = wages + 0.05 * normal(&mut rng);
        let loan_effect = if late { -2.0 } else { 2.0 };
        let y = loan_effect * loans - 1.0 * rates + 1.0 * income + 0.5 * permits + 0.8 * wages + 0.3 * normal(&mut rng);
        rows.push(
            [loans, rates, income, permits, wages, salaries, y]
                .iter()
                .map(|v| format!("{v:.5}"))
                .collect(),
        );
    }
    write_csv(path, &["loans", "rates", "income", "permits", "wages", "salaries", "price_index"], &rows);
}

fn criterion_7(dir: &Path) -> Verdict {
    let data = dir.join("forecast.csv");
    forecasting_fixture(&data);
    let report = dir.join("c7.json");
    let figure = dir.join("c7.csv");
    run_cli(&[
        "explain",
        "--mode",
        "failure",
        "--data",
        data.to_str().unwrap(),
        "--label-col",
        "price_index",
        "--model",
        "pca-knn:components=5,k=4",
        "--split",
        "ordered",
        "--loss",
        "r2",
        "--seed",
        "11",
        "--out-report",
        report.to_str().unwrap(),
        "--out-figure-data",
        figure.to_str().unwrap(),
    ])?;
    let r = read_json(&report);
    let train = phi_by_feature(&r["comparisons"][0]);
    let test = phi_by_feature(&r["comparisons"][1]);
    let most_negative = test.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let loans_train = train.iter().find(|(n, _)| n == "loans").unwrap().1;
    let loans_test = test.iter().find(|(n, _)| n == "loans").unwrap().1;
    let detail = format!(
        "most negative test phi: {} ({:.4}); loans train {loans_train:.4}, test {loans_test:.4}",
        most_negative.0, most_negative.1
    );
    if most_negative.0 == "loans" && loans_train >= 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8(dir: &Path) -> Verdict {
    let species = dir.join("species.csv");
    let intergroup = dir.join("intergroup.csv");
    let species = species.to_str().unwrap();
    let intergroup = intergroup.to_str().unwrap();
    let configs: Vec<Vec<&str>> = vec![
        vec![
            "explain", "--mode", "classification", "--data", species, "--schema", "target=species",
            "--model", "knn-classifier:k=5,smoothing=0.5", "--positive-classes", "virginica",
            "--sample-select", "class:virginica:8", "--engine", "sampled", "--permutations", "300",
            "--background-draws", "4", "--seed", "42",
        ],
        vec![
            "explain", "--mode", "group-diff", "--data", intergroup, "--schema",
            "target=reoffend;group=race;features=priors,age,charge,sex,juvenile,race",
            "--model", "logistic:epochs=100", "--group-col", "race=1", "--positive-classes", "yes",
            "--decision", "argmax", "--engine", "sampled", "--permutations", "64", "--seed", "5",
        ],
        vec![
            "explain", "--mode", "output", "--data", species, "--schema", "target=species",
            "--model", "knn-classifier:k=3", "--positive-classes", "setosa", "--seed", "9",
        ],
    ];
    for (i, cfg) in configs.iter().enumerate() {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let report = dir.join(format!("c8_{i}_{run}.json"));
            let figure = dir.join(format!("c8_{i}_{run}.csv"));
            let mut args = cfg.clone();
            args.extend(["--out-report", report.to_str().unwrap(), "--out-figure-data", figure.to_str().unwrap()]);
            run_cli(&args)?;
            outputs.push((std::fs::read(&report).unwrap(), std::fs::read(&figure).unwrap()));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("configuration {i} produced different reports"));
        }
    }
    Ok(format!("{} configurations byte-identical across repeated runs", configs.len()))
}

// ---------------------------------------------------------------------------
// Criterion 9: log-space classification function.

fn naive_classification(rows: &[Vec<f64>], pos: &[usize]) -> f64 {
    let mut a = 1.0;
    let mut b = 1.0;
    for r in rows {
        let p: f64 = pos.iter().map(|&c| r[c]).sum();
        a *= p;
        b *= 1.0 - p;
    }
    a / (a + b)
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let partition = ClassPartition::new(["a", "c"], ["b"]).unwrap();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=30);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v / s).collect()
            })
            .collect();
        let naive = naive_classification(&rows, &[0, 2]);
        if !naive.is_finite() {
            continue;
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let lookup = flat.clone();
        let model = FnModelProb::new(classes.clone(), lookup);
        let x = FeatureMatrix::from_rows_unnamed(&(0..n).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let v = classification_g(&model, &x, &partition).map_err(|e| e.to_string())?;
        worst = worst.max((v - naive).abs());
        compared += 1;
    }

    // 200 rows at probability 1e-4 on either side: the naive products
    // underflow to 0/0.
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|i| if i % 2 == 0 { vec![1e-4, 1.0 - 2e-4, 1e-4] } else { vec![0.5 - 5e-5, 1e-4, 0.5 - 5e-5] })
        .collect();
    let naive = naive_classification(&rows, &[0, 2]);
    let model = FnModelProb::new(classes, rows.iter().flatten().copied().collect());
    let x = FeatureMatrix::from_rows_unnamed(&(0..200).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
    let v = classification_g(&model, &x, &partition).map_err(|e| e.to_string())?;
    let detail = format!("{compared} comparisons, worst gap {worst:.2e}; n=200 value {v} (naive {naive})");
    if worst <= 1e-9 && v.is_finite() && naive.is_nan() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Returns fixed probability rows, indexed by the single feature value.
struct FnModelProb {
    classes: std::sync::Arc<[String]>,
    table: Vec<f64>,
}

impl FnModelProb {
    fn new(classes: Vec<String>, table: Vec<f64>) -> Self {
        Self {
            classes: classes.into(),
            table,
        }
    }
}

impl BlackBoxModel for FnModelProb {
    fn predict(&self, x: &FeatureMatrix) -> gshap::Result<ModelOutput> {
        let c = self.classes.len();
        let values = x
            .rows()
            .flat_map(|r| {
                let i = r[0] as usize;
                self.table[i * c..(i + 1) * c].to_vec()
            })
            .collect();
        ModelOutput::probabilities(self.classes.clone(), values)
    }
}

// ---------------------------------------------------------------------------

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| Err("panicked".to_string()));
    let elapsed = start.elapsed();
    let suffix = format!(" [{:.1}s]", elapsed.as_secs_f64());
    match (result, limit) {
        (Ok(d), Some(l)) if elapsed > l => Err(format!("{d}; exceeded {}s limit{suffix}", l.as_secs())),
        (Ok(d), _) => Ok(d + &suffix),
        (Err(d), _) => Err(d + &suffix),
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir: PathBuf = tmp.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict>, Option<Duration>)> = vec![
        ("efficiency", Box::new(criterion_1), Some(Duration::from_secs(60))),
        ("classic-shap reduction", Box::new(criterion_2), None),
        ("estimator consistency", Box::new(criterion_3), Some(Duration::from_secs(300))),
        ("dummy and symmetry", Box::new(criterion_4), None),
        ("intergroup reproduction", Box::new({ let d = dir.clone(); move || criterion_5(&d) }), None),
        ("classification purity", Box::new({ let d = dir.clone(); move || criterion_6(&d) }), None),
        ("model-failure reproduction", Box::new({ let d = dir.clone(); move || criterion_7(&d) }), None),
        ("determinism", Box::new({ let d = dir.clone(); move || criterion_8(&d) }), None),
        ("log-space robustness", Box::new(criterion_9), None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let (tag, detail) = match timed(limit, check) {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {} ({name}): {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
