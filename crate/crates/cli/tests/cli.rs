use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gshap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gshap")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Two classes split by the sign of `a`; `b` is noise.
fn write_fixture(dir: &Path) -> String {
    let mut s = String::from("a,b,label\n");
    for i in 0..80 {
        let a = (i as f64 - 39.5) / 10.0;
        let b = ((i * 37) % 17) as f64 / 17.0;
        let label = if a > 0.0 { "pos" } else { "neg" };
        s.push_str(&format!("{a},{b},{label}\n"));
    }
    let path = dir.join("fixture.csv");
    std::fs::write(&path, s).unwrap();
    path.to_str().unwrap().to_owned()
}

fn explain(data: &str, report: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "explain",
        "--data",
        data,
        "--schema",
        "target=label",
        "--out-report",
        report.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    gshap(&args)
}

#[test]
fn output_mode_writes_report_and_figure() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_fixture(dir.path());
    let report = dir.path().join("r.json");
    let figure = dir.path().join("f.csv");
    let o = explain(
        &data,
        &report,
        &[
            "--mode",
            "output",
            "--model",
            "knn-classifier:k=3",
            "--positive-classes",
            "pos",
            "--out-figure-data",
            figure.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let c = &r["comparisons"][0];
    let total = c["phi_sum"].as_f64().unwrap();
    let diff = c["difference"].as_f64().unwrap();
    assert!((total - diff).abs() < 1e-9);
    let fig = std::fs::read_to_string(&figure).unwrap();
    let mut lines = fig.lines();
    assert_eq!(lines.next(), Some("feature,phi,normalized_phi"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn failure_mode_with_perfect_fit_has_zero_train_loss() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_fixture(dir.path());
    let report = dir.path().join("r.json");
    let o = explain(
        &data,
        &report,
        &[
            "--mode",
            "failure",
            "--model",
            "knn-classifier:k=1",
            "--positive-classes",
            "pos",
            "--loss",
            "mse",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let names: Vec<&str> = r["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["train", "test"]);
    // A 1-NN model reproduces its training labels, so the loss is zero.
    assert_eq!(r["comparisons"][0]["g_sample"].as_f64().unwrap(), 0.0);
}

#[test]
fn config_errors_exit_one_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_fixture(dir.path());
    let report = dir.path().join("r.json");
    let o = explain(&data, &report, &["--mode", "output", "--model", "svm"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error [config]"), "{}", stderr(&o));

    let o = explain(&data, &report, &["--mode", "sideways", "--model", "knn-classifier"]);
    assert_eq!(o.status.code(), Some(1));

    let o = explain(&data, &report, &["--mode", "classification", "--model", "knn-regressor"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!report.exists());
}

#[test]
fn data_errors_exit_two_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let missing = dir.path().join("missing.csv");
    let o = explain(
        missing.to_str().unwrap(),
        &report,
        &["--mode", "output", "--model", "knn-classifier", "--positive-classes", "pos"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error [load]"), "{}", stderr(&o));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,label\n1,2,pos\n3,oops,neg\n").unwrap();
    let o = explain(
        bad.to_str().unwrap(),
        &report,
        &["--mode", "output", "--model", "knn-classifier", "--positive-classes", "pos"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'b'"), "{}", stderr(&o));
}

#[test]
fn external_model_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_fixture(dir.path());
    let report = dir.path().join("r.json");
    let script = dir.path().join("model.py");
    std::fs::write(
        &script,
        "import sys\n\
         for line in sys.stdin:\n\
         \x20   line = line.strip()\n\
         \x20   if line.startswith('a'):\n\
         \x20       continue\n\
         \x20   if not line:\n\
         \x20       sys.stdout.flush()\n\
         \x20       continue\n\
         \x20   a, b = map(float, line.split(','))\n\
         \x20   print(2 * a)\n",
    )
    .unwrap();
    let model = format!("external:python3 -u {}", script.display());
    let o = gshap(&[
        "explain",
        "--mode",
        "output",
        "--data",
        &data,
        "--schema",
        "target=label",
        "--model",
        &model,
        "--out-report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let f = &r["comparisons"][0]["features"];
    // A model that ignores `b` gives it nothing.
    assert_eq!(f[1]["phi"].as_f64().unwrap(), 0.0);
}

#[test]
fn selfcheck_exit_codes() {
    let o = gshap(&["selfcheck"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.matches("PASS").count(), 7, "{out}");

    let o = gshap(&["selfcheck", "--perturb-weights"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("error [selfcheck]"));
}
