use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcp")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn out_str(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn explain_worked_example() {
    let dir = tmp();
    let out = fcp(&["explain", "--model", &data("worked_example.model.json"), "--input", "0.5,0.8", "--out", out_str(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(dir.path().join("explanation.json"));
    let last = &doc["layers"][2]["compositions"];
    let want = [[0.04, 0.96], [0.53, -0.47]];
    for i in 0..2 {
        for k in 0..2 {
            assert!((last[i][k].as_f64().unwrap() - want[i][k]).abs() <= 0.01);
        }
    }
    assert_eq!(doc["degenerate_rows"].as_array().unwrap().len(), 0);
}

#[test]
fn explain_prints_without_out_dir() {
    let out = fcp(&["explain", "--model", &data("worked_example.model.json"), "--input", "-0.5,0.8"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["instance"][0].as_f64(), Some(-0.5));
}

#[test]
fn train_german_credit() {
    let dir = tmp();
    let german = data("german.data");
    let before = std::fs::read(&german).unwrap();
    let out = fcp(&["train", "--data", &german, "--format", "uci-german", "--seed", "7", "--out", out_str(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("train_report.json"));
    let acc = report["test_accuracy"].as_f64().unwrap();
    assert!((0.735..=0.835).contains(&acc), "test accuracy {acc}");
    assert_eq!(report["train_size"], 800);
    assert_eq!(report["widths"], serde_json::json!([20, 40, 20, 2]));
    let losses = std::fs::read_to_string(dir.path().join("train_loss.csv")).unwrap();
    assert_eq!(losses.lines().count(), 101);
    assert!(losses.starts_with("epoch,mean_loss\n"));
    assert!(dir.path().join("model.json").exists());
    assert_eq!(std::fs::read(&german).unwrap(), before);
}

#[test]
fn flip_curve_shape() {
    let dir = tmp();
    let out = fcp(&[
        "flip", "--data", &data("pima.csv"), "--schema", &data("pima.schema.json"),
        "--reps", "2", "--epochs", "5", "--activation", "elu,tanh", "--out", out_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["flip_curves.csv", "flip_curves_random.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("activation,k,kappa_mean,kappa_std,reps"));
        let rows: Vec<&str> = lines.collect();
        // Pima has 7 features, so k runs 0..=7 for each activation.
        assert_eq!(rows.len(), 2 * 8);
        assert!(rows[0].starts_with("elu,0,"));
        assert!(rows[8].starts_with("tanh,0,"));
        assert!(rows.iter().all(|r| r.ends_with(",2")));
    }
}

#[test]
fn compare_single_feature_dataset() {
    let dir = tmp();
    let csv = dir.path().join("one.csv");
    let schema = dir.path().join("one.json");
    let mut text = String::from("x,y\n");
    for i in 0..20 {
        text.push_str(&format!("{},{}\n", i, if i < 10 { "a" } else { "b" }));
    }
    std::fs::write(&csv, text).unwrap();
    std::fs::write(&schema, r#"{"features":[{"name":"x","kind":"numeric"}],"label":"y"}"#).unwrap();
    let model_dir = dir.path().join("model");
    let args = ["--data", csv.to_str().unwrap(), "--schema", schema.to_str().unwrap(), "--epochs", "5"];
    let out = fcp(&[&["train"][..], &args, &["--out", model_dir.to_str().unwrap()]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = model_dir.join("model.json");
    let cmp_dir = dir.path().join("cmp");
    let out = fcp(&[
        "compare", "--data", csv.to_str().unwrap(), "--schema", schema.to_str().unwrap(),
        "--model", model.to_str().unwrap(), "--out", cmp_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(cmp_dir.join("compare.json"));
    assert_eq!(doc["features"][0]["fcp_rank"], 1);
    assert_eq!(doc["features"][0]["lrp_rank"], 1);
    assert_eq!(doc["features"][0]["fcp_score"].as_f64(), Some(1.0));
    let fcp_csv = std::fs::read_to_string(cmp_dir.join("attribution_fcp.csv")).unwrap();
    assert!(fcp_csv.starts_with("feature,name,score,method,scope\n0,x,1,fcp,global\n"));
    let lrp_csv = std::fs::read_to_string(cmp_dir.join("attribution_lrp.csv")).unwrap();
    assert!(lrp_csv.contains(",lrp,global"));
}

#[test]
fn importance_of_one_instance() {
    let dir = tmp();
    let out = fcp(&["importance", "--model", &data("worked_example.model.json"), "--input", "0.5,0.8", "--out", out_str(dir.path())]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("importance.csv")).unwrap();
    let scores: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!((scores[0] - 0.04).abs() <= 0.01 && (scores[1] - 0.96).abs() <= 0.01);
}

#[test]
fn exit_codes() {
    let dir = tmp();
    let o = out_str(dir.path());
    // Configuration problems.
    assert_eq!(fcp(&["explain", "--model", "/definitely/missing.json", "--input", "1"]).status.code(), Some(2));
    assert_eq!(fcp(&["train", "--data", &data("pima.csv"), "--out", o]).status.code(), Some(2));
    assert_eq!(
        fcp(&["train", "--data", &data("pima.csv"), "--schema", &data("pima.schema.json"), "--activation", "cubic", "--out", o]).status.code(),
        Some(2)
    );
    // Data problems.
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "npreg,glu,bp,skin,bmi,ped,age,type\n1,2,3,4,5,x,7,Yes\n").unwrap();
    let out = fcp(&["train", "--data", bad.to_str().unwrap(), "--schema", &data("pima.schema.json"), "--out", o]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1, column ped"));
    assert_eq!(fcp(&["explain", "--model", &data("worked_example.model.json"), "--input", "1,2,3"]).status.code(), Some(3));
    // Degenerate decision row.
    let out = fcp(&["importance", "--model", &data("worked_example.model.json"), "--input", "0,0", "--out", o]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("fcp importance:"));
}
