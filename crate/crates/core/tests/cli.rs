//! Runs the binary stage by stage on the bundled fixture corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_webzsl");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn corpus(name: &str) -> String {
    fixture("corpus").join(name).display().to_string()
}

fn webzsl(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("WEBZSL_DIM")
        .env_remove("WEBZSL_SEED")
        .arg("--config")
        .arg(fixture("run.ini"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = webzsl(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path.as_ref()).unwrap()).unwrap()
}

fn run_stages(dir: &Path) {
    let meta = corpus("metadata.jsonl");
    ok(dir, &["ingest", "--metadata", &meta, "--out", "work/vocab.tsv"]);
    ok(dir, &["pairs", "--metadata", &meta, "--vocab", "work/vocab.tsv", "--mode", "voted", "--out", "work/pairs.txt"]);
    ok(dir, &["pairs", "--metadata", &meta, "--vocab", "work/vocab.tsv", "--mode", "raw", "--out", "work/raw.bin"]);
    ok(dir, &["train-embed", "--pairs", "work/pairs.txt", "--vocab", "work/vocab.tsv", "--out", "work/vectors.txt"]);
    ok(dir, &["export-cooc", "--pairs", "work/pairs.txt", "--vocab", "work/vocab.tsv", "--out", "work/cooc.txt"]);
    ok(dir, &["prototypes", "--class-names", &corpus("class_names.tsv"), "--embeddings", "work/vectors.txt", "--out", "work/protos.txt"]);
    let split = [
        "--features", &corpus("train_features.txt"),
        "--labels", &corpus("train_labels.txt"),
        "--seen", &corpus("seen.txt"),
        "--unseen", &corpus("unseen.txt"),
    ];
    let mut fit = vec!["zsl-fit", "--prototypes", "work/protos.txt", "--out", "work/model.txt"];
    fit.extend(split);
    ok(dir, &fit);
    eval(dir);
    ok(
        dir,
        &[
            "analyze", "--taxonomy", &corpus("taxonomy.tsv"), "--predictions", "eval/predictions.txt",
            "--test-labels", &corpus("test_labels.txt"), "--seen", &corpus("seen.txt"), "--unseen", &corpus("unseen.txt"),
            "--out-dir", "analysis",
        ],
    );
}

fn eval(dir: &Path) {
    ok(
        dir,
        &[
            "zsl-eval", "--model-file", "work/model.txt", "--prototypes", "work/protos.txt", "--unseen", &corpus("unseen.txt"),
            "--test-features", &corpus("test_features.txt"), "--test-labels", &corpus("test_labels.txt"), "--out-dir", "eval",
        ],
    );
}

#[test]
fn staged_run_writes_artifacts_and_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_stages(dir);

    let ingest = json(dir.join("work/vocab.tsv.manifest.json"));
    assert_eq!(ingest["command"], "ingest");
    assert_eq!(ingest["config"]["args"]["min_count"], 1, "config file value applies");
    assert_eq!(ingest["seeds"]["global"], 7);
    assert_eq!(ingest["config_hash"].as_str().unwrap().len(), 64);

    let voted = json(dir.join("work/pairs.txt.manifest.json"))["metrics"]["pair_count"].as_u64().unwrap();
    let raw = json(dir.join("work/raw.bin.manifest.json"))["metrics"]["pair_count"].as_u64().unwrap();
    assert!(voted < raw, "bulk users inflate raw pairs: {voted} vs {raw}");
    let lines = fs::read_to_string(dir.join("work/pairs.txt")).unwrap().lines().count() as u64;
    assert_eq!(lines, voted);
    assert_eq!(fs::metadata(dir.join("work/raw.bin")).unwrap().len(), 8 * raw);

    let cooc = json(dir.join("work/cooc.txt.manifest.json"));
    assert_eq!(cooc["metrics"]["total"].as_u64().unwrap(), voted);

    let train = json(dir.join("work/vectors.txt.manifest.json"));
    assert_eq!(train["config"]["args"]["train"]["dim"], 16);
    assert_eq!(train["metrics"]["deterministic"], true);
    let header = fs::read_to_string(dir.join("work/vectors.txt")).unwrap();
    let vocab_len = fs::read_to_string(dir.join("work/vocab.tsv")).unwrap().lines().count();
    assert_eq!(header.lines().next().unwrap(), format!("{vocab_len} 16"));

    let metrics = json(dir.join("eval/metrics.json"));
    let top1 = metrics["per_sample"]["top1"].as_f64().unwrap();
    let top3 = metrics["per_sample"]["top3"].as_f64().unwrap();
    assert!(top1 > 1.0 / 6.0 && top3 >= top1, "{metrics}");
    assert_eq!(metrics["samples"], 60);

    let analysis = json(dir.join("analysis/manifest.json"));
    let hist = analysis["metrics"]["distance_histogram"].as_object().unwrap();
    assert!(!hist.contains_key("1"), "test classes are leaves: {hist:?}");
    assert_eq!(hist.values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 60);
    assert!(dir.join("analysis/class_difficulty.csv").is_file());
}

#[test]
fn downstream_rerun_matches_full_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_stages(a.path());
    run_stages(b.path());
    for f in ["eval/metrics.json", "eval/predictions.txt", "work/vectors.txt", "work/model.txt", "eval/manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let before = fs::read(a.path().join("eval/metrics.json")).unwrap();
    fs::remove_dir_all(a.path().join("eval")).unwrap();
    eval(a.path());
    assert_eq!(fs::read(a.path().join("eval/metrics.json")).unwrap(), before);
}

fn run_args() -> Vec<String> {
    let mut v: Vec<String> = vec!["run".into(), "--metadata".into(), corpus("metadata.jsonl")];
    for (flag, file) in [
        ("--class-names", "class_names.tsv"),
        ("--features", "train_features.txt"),
        ("--labels", "train_labels.txt"),
        ("--test-features", "test_features.txt"),
        ("--test-labels", "test_labels.txt"),
        ("--seen", "seen.txt"),
        ("--unseen", "unseen.txt"),
    ] {
        v.push(flag.into());
        v.push(corpus(file));
    }
    v.extend(["--out-dir".into(), "out".into()]);
    v
}

#[test]
fn full_run_emits_report_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let args = run_args();
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let t = std::time::Instant::now();
    ok(tmp.path(), &args);
    assert!(t.elapsed().as_secs() < 60);
    let report = json(tmp.path().join("out/report.json"));
    assert!(report["per_sample"]["top1"].as_f64().unwrap() > 0.3, "{report}");
    assert_eq!(report["unresolved_classes"].as_array().unwrap().len(), 0);
}

#[test]
fn flag_beats_env_beats_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let meta = corpus("metadata.jsonl");
    ok(dir, &["ingest", "--metadata", &meta, "--out", "vocab.tsv"]);
    ok(dir, &["pairs", "--metadata", &meta, "--vocab", "vocab.tsv", "--out", "pairs.txt"]);
    let base = ["train-embed", "--pairs", "pairs.txt", "--vocab", "vocab.tsv", "--epochs", "1"];
    let dim_of = |out: &str| json(dir.join(format!("{out}.manifest.json")))["config"]["args"]["train"]["dim"].clone();

    ok(dir, &[&base[..], &["--out", "a.txt"]].concat());
    assert_eq!(dim_of("a.txt"), 16);

    let out = Command::new(BIN)
        .current_dir(dir)
        .env("WEBZSL_DIM", "8")
        .arg("--config")
        .arg(fixture("run.ini"))
        .args(base)
        .args(["--out", "b.txt"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(dim_of("b.txt"), 8);

    let out = Command::new(BIN)
        .current_dir(dir)
        .env("WEBZSL_DIM", "8")
        .arg("--config")
        .arg(fixture("run.ini"))
        .args(base)
        .args(["--dim", "4", "--out", "c.txt"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(dim_of("c.txt"), 4);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let code = |args: &[&str]| webzsl(dir, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["ingest", "--bogus"]), 2);
    assert_eq!(code(&["ingest", "--metadata", "missing.jsonl", "--out", "v.tsv"]), 2);
    assert_eq!(code(&["pairs", "--metadata", &corpus("metadata.jsonl"), "--vocab", "v.tsv", "--mode", "sideways", "--out", "p"]), 2);

    // a stage failure: training labels that are not seen classes
    let out = webzsl(
        dir,
        &[
            "zsl-fit", "--prototypes", &corpus("attributes.txt"), "--features", &corpus("test_features.txt"),
            "--labels", &corpus("test_labels.txt"), "--seen", &corpus("seen.txt"), "--unseen", &corpus("unseen.txt"),
            "--out", "m.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    assert!(!dir.join("m.txt").exists());
}

#[test]
fn attribute_ablation_command() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        tmp.path(),
        &[
            "ablate-attributes", "--attributes", &corpus("attributes.txt"), "--features", &corpus("train_features.txt"),
            "--labels", &corpus("train_labels.txt"), "--test-features", &corpus("test_features.txt"),
            "--test-labels", &corpus("test_labels.txt"), "--seen", &corpus("seen.txt"), "--unseen", &corpus("unseen.txt"),
            "--runs", "3", "--out-dir", "abl",
        ],
    );
    let csv = fs::read_to_string(tmp.path().join("abl/attribute_ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "keep,mean,std");
    assert!(lines[1].starts_with("12,") && lines[1].ends_with(",0"), "{}", lines[1]);
    assert_eq!(lines.len(), 5);
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for d in ["a", "b"] {
        ok(tmp.path(), &["synth", "--concepts", "6", "--seen-classes", "3", "--groups", "2", "--users", "20", "--out-dir", d]);
    }
    for f in ["metadata.jsonl", "train_features.txt", "test_labels.txt"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    let metrics = |d: &str| json(tmp.path().join(d).join("manifest.json"))["metrics"].clone();
    assert_eq!(metrics("a"), metrics("b"));
}
