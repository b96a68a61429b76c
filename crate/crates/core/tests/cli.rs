use std::path::Path;
use std::process::{Command, Output};

use fsncd::data::io;

fn fsncd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsncd")).args(args).output().unwrap()
}

fn synth(dir: &Path) {
    let out = fsncd(&[
        "synth",
        "--classes",
        "20",
        "--per-class",
        "25",
        "--dim",
        "16",
        "--noise",
        "0.05",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn run(dir: &Path, extra: &[&str]) -> Output {
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let mut args = vec![
        "run".to_string(),
        "--embeddings".into(),
        p("embeddings.emb"),
        "--labels".into(),
        p("labels.lbl"),
        "--split".into(),
        p("split.json"),
        "--episodes".into(),
        "10".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    fsncd(&args)
}

#[test]
fn synth_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let emb = io::load_embeddings(dir.path().join("embeddings.emb")).unwrap();
    let labels = io::load_labels(dir.path().join("labels.lbl")).unwrap();
    let split = io::load_split(dir.path().join("split.json")).unwrap();
    assert_eq!((emb.rows(), emb.dim()), (500, 16));
    assert_eq!(labels.len(), 500);
    assert_eq!(split.base, (0..10).collect());
    assert_eq!(split.novel, (10..20).collect());
}

#[test]
fn run_report_has_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for method in ["shc", "ukc", "protonet"] {
        let out = run(dir.path(), &["--method", method, "--seed", "1"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["method"], method);
        assert_eq!(v["episodes"], 10);
        for key in ["acc_all", "acc_old", "acc_new"] {
            assert!(v[key]["mean"].is_number(), "{key} in {v}");
            assert!(v[key]["std"].is_number());
        }
        assert!(v["clusters_found"]["mean"].is_number());
        assert!(v["non_converged"].is_u64());
        assert_eq!(v["config"]["way"], 5);
        assert_eq!(v["config"]["queries"], 15);
    }
}

#[test]
fn output_flag_writes_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let file = dir.path().join("r.json");
    let a = run(dir.path(), &["--method", "ukc", "--output", file.to_str().unwrap()]);
    assert!(a.status.success());
    let b = run(dir.path(), &["--method", "ukc"]);
    assert_eq!(std::fs::read(&file).unwrap(), b.stdout);
}

#[test]
fn too_few_novel_classes_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = run(dir.path(), &["--method", "shc", "--way", "8", "--new", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--method", "shc"]);
    assert!(!out.status.success());
}
