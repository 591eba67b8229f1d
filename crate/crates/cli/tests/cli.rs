use std::path::Path;
use std::process::{Command, Output};

fn ncl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncl")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn stationary_pair02_coherence() {
    let out = ncl(&["stationary", "--target", "pair:0,2", "--alpha", "1.207"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let c = doc["coherences"]["0,2"].as_f64().unwrap();
    assert!((c - 0.88).abs() < 0.005, "coherence {c}");
    assert!(doc["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    assert!(doc["support"].as_array().unwrap().iter().any(|p| p[0] == 0 && p[1] == 2));
}

#[test]
fn sweep_fock1_is_monotone() {
    let out = ncl(&["sweep", "--target", "fock:1", "--alpha-grid", "0:4:0.1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "r,coherence,fidelity,purity"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 41);
    for w in rows.windows(2) {
        assert!(w[1][2] > w[0][2]);
    }
    for row in &rows {
        assert!((row[2] - (1.0 - (-row[0] * row[0]).exp())).abs() < 1e-12);
    }
    assert!(rows[40][2] > 1.0 - 1e-6);
}

#[test]
fn simulate_constant_loss_reaches_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("f_const.json");
    std::fs::write(&profile, r#"{"n_max": 3, "f": [1, 1, 1, 1], "tail": "hold"}"#).unwrap();
    let diag = dir.path().join("diag.csv");
    let out = ncl(&[
        "simulate",
        "--profile",
        profile.to_str().unwrap(),
        "--alpha",
        "1",
        "--gamma",
        "1",
        "--t",
        "20",
        "--diagnostics",
        diag.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&stdout(&out));
    let vacuum = rows.iter().find(|r| r[0] == 0.0 && r[1] == 0.0).unwrap();
    assert!((vacuum[2] - 1.0).abs() < 1e-8);
    assert!(rows.iter().filter(|r| r[0] != 0.0 || r[1] != 0.0).all(|r| r[2].abs() < 1e-8 && r[3].abs() < 1e-8));
    let diag_text = std::fs::read_to_string(&diag).unwrap();
    assert!(diag_text.lines().any(|l| l == "t,trace_error,min_xi,herm_error"));
}

#[test]
fn outputs_are_deterministic() {
    let args = ["stationary", "--target", "comb:3,1", "--alpha", "2.5", "--format", "csv"];
    let a = ncl(&args);
    let b = ncl(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = ncl(&["stationary", "--target", "comb:3,1", "--alpha", "2.4", "--format", "csv"]);
    let hash = |o: &Output| stdout(o).lines().nth(1).unwrap().to_string();
    assert_ne!(hash(&a), hash(&other));
}

#[test]
fn design_round_trips_through_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    let out = ncl(&["design", "--target", "pair:4,9", "--n-max", "30", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["provenance"]["notes"]["target"], "pair:4,9");
    let from_file = ncl(&["stationary", "--profile", path.to_str().unwrap(), "--alpha", "2.9", "--n-max", "30", "--format", "csv"]);
    let inline = ncl(&["stationary", "--target", "pair:4,9", "--alpha", "2.9", "--n-max", "30", "--format", "csv"]);
    assert!(from_file.status.success() && inline.status.success());
    assert_eq!(data_rows(&stdout(&from_file)), data_rows(&stdout(&inline)));
}

#[test]
fn optimize_pair02() {
    let out = ncl(&["optimize", "--target", "pair:0,2", "--r-min", "0.2", "--r-max", "3"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((doc["r_opt"].as_f64().unwrap() - 1.207).abs() < 0.01);
    assert_eq!(doc["meta"]["boundary"], false);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_elimination_beam_splitter() {
    let dir = tempfile::tempdir().unwrap();
    // F_01 = g a, F_10 = g a†: linear loss after elimination
    let ad = (0..4)
        .flat_map(|i| (0..4).map(move |j| if i == j + 1 { format!("[{}, 0]", (i as f64).sqrt()) } else { "[0, 0]".into() }))
        .collect::<Vec<_>>()
        .join(",");
    let json = format!(
        r#"{{"kept_dim": 4, "lossy_dim": 3, "gamma": 20, "terms": [
            {{"m": 0, "n": 1, "op": "a", "coeff": [1, 0]}},
            {{"m": 1, "n": 0, "op": "matrix", "coeff": [1, 0], "matrix": [{ad}]}}]}}"#
    );
    let path = write(dir.path(), "bs.json", &json);
    let out = ncl(&["verify-elimination", "--expansion", &path, "--alpha", "0.5", "--t", "20", "--generator", "second-order"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 61);
    assert!(rows.iter().all(|r| r[1] < 0.02), "{rows:?}");
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(ncl(&["sweep", "--target", "pair:3,1", "--alpha-grid", "0:1:0.5"]).status.code(), Some(2));
    assert_eq!(ncl(&["sweep", "--target", "fock:1", "--alpha-grid", "0:1"]).status.code(), Some(2));
    assert_eq!(ncl(&["stationary", "--profile", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(ncl(&["stationary", "--target", "pair:4,9", "--alpha", "1", "--n-max", "10"]).status.code(), Some(2));
    assert_eq!(ncl(&["selftest", "--only", "13"]).status.code(), Some(2));
    assert_eq!(ncl(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn threads_env_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_ncl"))
        .args(["design", "--target", "fock:2"])
        .env("NCL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_ncl"))
        .args(["sweep", "--target", "fock:2", "--alpha-grid", "0:2:0.5"])
        .env("NCL_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn selftest_subset() {
    let out = ncl(&["selftest", "--only", "1,5,6"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}
