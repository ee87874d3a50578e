use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use lssfind_cli::manifest::RunManifest;
use lssfind_cli::{run, Cli};
use tempfile::TempDir;

fn lssfind(dir: &Path, args: &[&str]) -> String {
    let mut argv = vec!["lssfind", "--out-dir", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    run(Cli::parse_from(argv), &mut out).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    String::from_utf8(out).unwrap()
}

fn exit_code(dir: &Path, args: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_lssfind"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, n: &str) {
    lssfind(dir, &["--seed", "1", "simulate", "--j", "1", "--l", "2", "--snr", "2", "--n", n]);
}

#[test]
fn simulate_records_noise_level() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    lssfind(d, &["simulate", "--j", "1", "--l", "2", "--snr", "1", "--n", "1000"]);
    let truth = json(&d.join("truth.json"));
    assert_eq!(truth["sigma2"].as_f64().unwrap(), 0.25);
    assert_eq!(truth["model_bsis"], serde_json::json!(["1-,2-"]));
    lssfind(d, &["simulate", "--j", "2", "--l", "2", "--snr", "0.5", "--n", "10"]);
    assert_eq!(json(&d.join("truth.json"))["sigma"].as_f64().unwrap(), 1.0);

    let first = fs::read(d.join("data.csv")).unwrap();
    lssfind(d, &["simulate", "--j", "2", "--l", "2", "--snr", "0.5", "--n", "10"]);
    assert_eq!(fs::read(d.join("data.csv")).unwrap(), first);
    assert_ne!(exit_code(d, &["simulate", "--j", "5", "--l", "5"]), 0);
}

#[test]
fn tiny_training_set() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("toy.csv"), "a,b,y\n0.1,0.2,1\n0.4,0.9,2\n0.8,0.3,3\n0.6,0.6,3\n").unwrap();
    let data = d.join("toy.csv");
    lssfind(d, &["train", "--data", data.to_str().unwrap(), "--n-trees", "1"]);
    let forest = lssfind::Forest::read_json(fs::File::open(d.join("forest.json")).unwrap()).unwrap();
    assert_eq!(forest.n_trees(), 1);
    assert!((forest.trees[0].kraft_sum() - 1.0).abs() < 1e-12);
    assert_eq!(forest.feature_names, ["a", "b"]);
}

#[test]
fn training_is_reproducible_and_manifest_replays() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    simulate(d, "300");
    let data = d.join("data.csv");
    let data = data.to_str().unwrap();
    lssfind(d, &["--seed", "5", "train", "--data", data, "--n-trees", "20", "--mtry", "10"]);
    let a = fs::read(d.join("forest.json")).unwrap();
    lssfind(d, &["--seed", "5", "train", "--data", data, "--n-trees", "20", "--mtry", "10"]);
    assert_eq!(fs::read(d.join("forest.json")).unwrap(), a);

    let manifest: RunManifest = serde_json::from_value(json(&d.join("train-manifest.json"))).unwrap();
    assert_eq!(manifest.config.train.as_ref().unwrap().forest.mtry, Some(10));
    let replay = d.join("replay");
    fs::create_dir(&replay).unwrap();
    let m = d.join("train-manifest.json");
    lssfind(&replay, &["--config", m.to_str().unwrap(), "train"]);
    assert_eq!(fs::read(replay.join("forest.json")).unwrap(), a);
}

#[test]
fn explain_modes_and_batches() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    simulate(d, "2000");
    let data = d.join("data.csv");
    lssfind(d, &["train", "--data", data.to_str().unwrap(), "--n-trees", "60"]);
    let forest = d.join("forest.json");
    let forest = forest.to_str().unwrap();

    // below tau in both signal coordinates
    let mut x = vec!["0.5"; 20];
    x[0] = "0.2";
    x[1] = "0.3";
    let point = x.join(",");
    lssfind(d, &["explain", "--forest", forest, "--point", &point, "--mode", "features", "--eta-dwp", "0.5"]);
    let exp = json(&d.join("explanation.json"));
    let feats: Vec<&str> = exp[0]["selected"].as_array().unwrap().iter().map(|s| s["feature"].as_str().unwrap()).collect();
    assert_eq!(feats, ["1-", "2-"]);

    // the training rows double as a 2000-point batch
    let points = d.join("data.csv");
    let points = points.to_str().unwrap();
    lssfind(d, &["explain", "--forest", forest, "--points", points, "--s-max", "2", "--eta-dwp", "0.3"]);
    let records = json(&d.join("explanation.json"));
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 2000);
    assert!(records.iter().enumerate().all(|(i, r)| r["point"] == i + 1));
    let first = fs::read(d.join("ranking.csv")).unwrap();
    let d1 = d.join("one-thread");
    lssfind(&d1, &["--threads", "1", "explain", "--forest", forest, "--points", points, "--s-max", "2", "--eta-dwp", "0.3"]);
    assert_eq!(fs::read(d1.join("ranking.csv")).unwrap(), first);

    lssfind(d, &["explain", "--forest", forest, "--point", &point, "--mode", "scores-only", "--s-max", "2"]);
    let pii = fs::read_to_string(d.join("pii.csv")).unwrap();
    let scores: Vec<f64> = pii.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(pii.lines().skip(1).take(3).any(|l| l.contains("\"1-,2-\"")));
}

#[test]
fn evaluate_outputs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.json"), "[]").unwrap();
    let grid = d.join("empty.json");
    lssfind(d, &["evaluate", "--grid", grid.to_str().unwrap(), "--scale", "full"]);
    assert_eq!(
        fs::read_to_string(d.join("results.csv")).unwrap(),
        "n,J,L,SNR,dwp_inclusion,pii_inclusion,roc_dwp,roc_pii,n_qualifying,seed\n"
    );
    let manifest = json(&d.join("evaluate-manifest.json"));
    let settings = &manifest["config"]["evaluate"]["settings"];
    assert_eq!(settings["n_trees"], 500);
    assert_eq!(settings["n_test"], 100);
    assert_eq!(settings["mtry"], 10);
    assert_eq!(settings["p"], 20);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "a,y\n0.1,1\nfoo,2\n").unwrap();
    let bad = d.join("bad.csv");
    assert_eq!(exit_code(d, &["train", "--data", bad.to_str().unwrap()]), 2);
    assert_eq!(exit_code(d, &["train", "--data", bad.to_str().unwrap(), "--label", "z"]), 2);
    assert_eq!(exit_code(d, &["explain", "--forest", bad.to_str().unwrap(), "--point", "1"]), 2);
    assert_eq!(exit_code(d, &["--threads", "0", "simulate", "--n", "5"]), 2);
    assert_eq!(exit_code(d, &["no-such-command"]), 2);
    assert_eq!(exit_code(d, &["simulate", "--n", "5"]), 0);
}
