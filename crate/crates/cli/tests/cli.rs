use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rulefuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulefuse"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rulefuse(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Three features, 200 rows, a step response plus a linear term.
fn three_feature_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("a,b,c,y\n");
    for i in 0..200 {
        let a = (i as f64 * 0.37).sin();
        let b = ((i * 7) % 13) as f64;
        let c = i as f64 / 200.0;
        let y = if a > 0.2 { 3.0 } else { -1.0 } + 0.5 * b + c;
        text.push_str(&format!("{a},{b},{c},{y}\n"));
    }
    let path = dir.join("three.csv");
    fs::write(&path, text).unwrap();
    path
}

/// Friedman data plus a 30-tree ensemble in `dir`.
fn small_setup(dir: &Path) {
    ok(
        dir,
        &["synth", "--rows", "300", "--seed", "3", "--out", "data.csv"],
    );
    ok(
        dir,
        &["synth", "--rows", "200", "--seed", "4", "--out", "test.csv"],
    );
    ok(
        dir,
        &[
            "train", "--data", "data.csv", "--target", "y", "--trees", "30", "--seed", "5",
            "--out", "ens.json",
        ],
    );
}

#[test]
fn train_defaults_on_three_features() {
    let dir = tempfile::tempdir().unwrap();
    three_feature_csv(dir.path());
    ok(
        dir.path(),
        &["train", "--data", "three.csv", "--target", "y"],
    );
    let doc = json(dir.path().join("ensemble.json"));
    let trees = doc["trees"].as_array().unwrap();
    assert_eq!(trees.len(), 500);
    let leaves: usize = trees
        .iter()
        .map(|t| {
            t["nodes"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|n| n.get("value").is_some())
                .count()
        })
        .sum();
    assert!(leaves > 0 && leaves <= 4000, "{leaves} leaves");

    let manifest = json(dir.path().join("ensemble.json.manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["params"]["trees"], 500);
    assert_eq!(manifest["params"]["depth"], 3);
    assert_eq!(manifest["seed"], 0);
    assert_eq!(
        manifest["input_digests"]["three.csv"]
            .as_str()
            .unwrap()
            .len(),
        64
    );
    assert!(manifest["version"].is_string());
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn single_leaf_ensemble_predicts_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    three_feature_csv(dir.path());
    let args = [
        "train",
        "--data",
        "three.csv",
        "--target",
        "y",
        "--trees",
        "1",
        "--depth",
        "0",
        "--no-bootstrap",
    ];
    ok(dir.path(), &args);
    let doc = json(dir.path().join("ensemble.json"));
    let nodes = doc["trees"][0]["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 1);
    let ys: Vec<f64> = fs::read_to_string(dir.path().join("three.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let value = nodes[0]["value"].as_f64().unwrap();
    assert!(
        (value - mean).abs() <= 1e-12 * mean.abs().max(1.0),
        "{value} vs {mean}"
    );
}

#[test]
fn same_flags_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--rows", "150", "--out", "d.csv"]);
    let train = |out: &str| {
        ok(
            dir.path(),
            &[
                "train", "--data", "d.csv", "--target", "y", "--trees", "20", "--out", out,
            ],
        )
    };
    train("a.json");
    train("b.json");
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );
    let digest = |f: &str| {
        json(dir.path().join(f))["output_digests"]
            .as_object()
            .unwrap()
            .values()
            .next()
            .unwrap()
            .clone()
    };
    assert_eq!(
        digest("a.json.manifest.json"),
        digest("b.json.manifest.json")
    );
}

#[test]
fn input_errors_name_the_column_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    three_feature_csv(dir.path());
    let out = rulefuse(
        dir.path(),
        &["train", "--data", "three.csv", "--target", "missing"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));

    fs::write(dir.path().join("bad.csv"), "a,b,y\n1,oops,2\n").unwrap();
    let out = rulefuse(dir.path(), &["train", "--data", "bad.csv", "--target", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'b'"));
}

#[test]
fn path_grid_two_and_feature_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    let d = dir.path();
    ok(
        d,
        &[
            "path",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--grid",
            "2",
            "--out",
            "p.json",
        ],
    );
    let points = json(d.join("p.json"));
    let points = points.as_array().unwrap();
    assert_eq!(points.len(), 2);
    let (l0, l1) = (
        points[0]["lambda_s"].as_f64().unwrap(),
        points[1]["lambda_s"].as_f64().unwrap(),
    );
    assert!((l1 / l0 - 1e-3).abs() < 1e-12);
    assert_eq!(points[0]["n_nonzero"], 0);
    assert!(points[1]["validation_mse"].as_f64().is_some());
    let manifest = json(d.join("p.json.manifest.json"));
    assert_eq!(manifest["params"]["valid_frac"], 0.2);
    assert_eq!(manifest["input_digests"].as_object().unwrap().len(), 2);

    // RuleFit configuration: L1 without fusion
    ok(
        d,
        &[
            "path",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--penalty",
            "l1",
            "--lambda-f-ratio",
            "0",
            "--grid",
            "10",
            "--out",
            "l1.json",
        ],
    );
    let l1 = json(d.join("l1.json"));
    assert!(l1.as_array().unwrap().iter().all(|p| p["lambda_f"] == 0.0));

    fs::write(d.join("narrow.csv"), "a,b,y\n1,2,3\n4,5,6\n").unwrap();
    let out = rulefuse(
        d,
        &[
            "path",
            "--ensemble",
            "ens.json",
            "--data",
            "narrow.csv",
            "--target",
            "y",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("feature-count mismatch"));
}

#[test]
fn extract_budgets_and_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    let d = dir.path();
    ok(
        d,
        &[
            "path",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--grid",
            "30",
            "--out",
            "p.json",
        ],
    );

    ok(
        d,
        &[
            "extract",
            "--ensemble",
            "ens.json",
            "--path",
            "p.json",
            "--max-rules",
            "0",
            "--out-prefix",
            "empty",
        ],
    );
    let empty = json(d.join("empty.rules.json"));
    assert!(empty["rules"].as_array().unwrap().is_empty());
    assert!(empty["intercept"].as_f64().unwrap().abs() > 0.0);
    let text = fs::read_to_string(d.join("empty.rules.txt")).unwrap();
    assert!(text.trim().starts_with("INTERCEPT"));

    ok(
        d,
        &[
            "extract",
            "--ensemble",
            "ens.json",
            "--path",
            "p.json",
            "--test-data",
            "test.csv",
            "--target",
            "y",
            "--out-prefix",
            "m",
        ],
    );
    let rules = json(d.join("m.rules.json"));
    let n = rules["rules"].as_array().unwrap().len();
    assert!(n <= 15);
    let stats = json(d.join("m.stats.json"));
    assert_eq!(stats["n_rules"].as_u64().unwrap() as usize, n);
    assert!(stats["test_mse"].as_f64().unwrap() > 0.0);
    let manifest = json(d.join("m.rules.json.manifest.json"));
    assert_eq!(manifest["output_digests"].as_object().unwrap().len(), 3);
}

#[test]
fn infeasible_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    let d = dir.path();
    ok(
        d,
        &[
            "path",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--grid",
            "20",
            "--out",
            "p.json",
        ],
    );
    // keep only the densest point so that no model fits a budget of 1
    let mut points = json(d.join("p.json"));
    let last = points.as_array().unwrap().last().unwrap().clone();
    assert!(last["n_nonzero"].as_u64().unwrap() > 1);
    points = Value::Array(vec![last]);
    fs::write(d.join("dense.json"), points.to_string()).unwrap();
    let out = rulefuse(
        d,
        &[
            "extract",
            "--ensemble",
            "ens.json",
            "--path",
            "dense.json",
            "--max-rules",
            "1",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bench_report_and_monotone_traces() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    let d = dir.path();
    ok(
        d,
        &[
            "bench",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--lambda-s",
            "50",
        ],
    );
    let report = json(d.join("bench.json"));
    for side in ["greedy", "cyclic"] {
        assert!(report[side]["updates_to_target"].as_u64().is_some());
        assert!(report[side]["seconds_to_target"].as_f64().unwrap() >= 0.0);
    }
    assert!(report["target_objective"].as_f64().is_some());
    let csv = fs::read_to_string(d.join("bench_traces.csv")).unwrap();
    let mut prev: Option<(String, f64)> = None;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let v: f64 = cells[2].parse().unwrap();
        if let Some((name, p)) = &prev {
            if name == cells[0] {
                assert!(v <= *p, "trace rises: {line}");
            }
        }
        prev = Some((cells[0].to_string(), v));
    }

    // a huge lambda leaves nothing to do; the report is still complete
    ok(
        d,
        &[
            "bench",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--lambda-s",
            "1e12",
            "--out",
            "t.json",
        ],
    );
    let trivial = json(d.join("t.json"));
    assert_eq!(trivial["greedy"]["updates_to_target"], 0);
    assert!(trivial["update_ratio"].is_null());
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    let d = dir.path();
    ok(
        d,
        &[
            "path",
            "--ensemble",
            "ens.json",
            "--data",
            "data.csv",
            "--target",
            "y",
            "--grid",
            "15",
            "--out",
            "p.json",
        ],
    );
    let before = fs::read(d.join("p.json")).unwrap();
    ok(d, &["replay", "p.json.manifest.json"]);
    assert_eq!(fs::read(d.join("p.json")).unwrap(), before);
    ok(d, &["replay", "ens.json.manifest.json"]);

    // a changed input is refused
    ok(
        d,
        &[
            "synth", "--rows", "300", "--seed", "99", "--out", "data.csv",
        ],
    );
    let out = rulefuse(d, &["replay", "p.json.manifest.json"]);
    assert_eq!(out.status.code(), Some(2));
}
