use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

mod common;
use common::*;

fn forge(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_srm-forge"));
    for a in args {
        c.arg(a);
    }
    c.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn pipeline(w: &Workspace, extra: &[&str]) -> Output {
    let mut args: Vec<&dyn AsRef<std::ffi::OsStr>> = vec![
        &"pipeline",
        &"--project",
        &w.project,
        &"--dataset",
        &w.dataset,
        &"--out",
        &w.out,
    ];
    for e in extra {
        args.push(e);
    }
    forge(&args)
}

#[test]
fn pipeline_exit_codes_follow_findings() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let plain = pipeline(&w, &[]);
    assert_eq!(plain.status.code(), Some(0), "{}", stderr(&plain));
    assert!(stdout(&plain).contains("1 finding(s)"));
    let strict = pipeline(&w, &["--fail-on-findings"]);
    assert_eq!(strict.status.code(), Some(1));

    let clean = Workspace::new("servlet/sanitized", &servlet_dataset());
    assert_eq!(pipeline(&clean, &["--fail-on-findings"]).status.code(), Some(0));
}

#[test]
fn errors_exit_with_two() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let missing = forge(&[&"pipeline", &"--project", &w.dir.path().join("absent"), &"--dataset", &w.dataset, &"--out", &w.out]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).starts_with("srm-forge: error: "), "{}", stderr(&missing));
    let bad_label = pipeline(&w, &["--cwe", "cwe1"]);
    assert_eq!(bad_label.status.code(), Some(2));
    assert!(stderr(&bad_label).contains("unknown label"));
}

#[test]
fn config_file_overrides_flags() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let cfg = w.dir.path().join("forge.json");
    std::fs::write(
        &cfg,
        json!({ "project_root": "project", "dataset_path": "srms.json", "output_dir": "from-config",
                "cwe_filter": ["cwe78"], "fail_on_findings": true })
        .to_string(),
    )
    .unwrap();
    let o = forge(&[&"--config", &cfg, &"pipeline", &"--cwe", &"cwe89", &"--out", &w.out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(w.dir.path().join("from-config/results.sarif").is_file());
    assert!(!w.out.exists());
    assert!(stdout(&o).contains("0 finding(s)"));

    std::fs::write(
        &cfg,
        json!({ "project_root": "project", "dataset_path": "srms.json", "output_dir": "from-config",
                "fail_on_findings": true })
        .to_string(),
    )
    .unwrap();
    assert_eq!(forge(&[&"--config", &cfg, &"pipeline"]).status.code(), Some(1));

    std::fs::write(&cfg, json!({ "depth": 3 }).to_string()).unwrap();
    assert_eq!(forge(&[&"--config", &cfg, &"pipeline"]).status.code(), Some(2));
}

#[test]
fn specgen_then_analyze() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let specs = w.dir.path().join("specs.json");
    let g = forge(&[&"specgen", &"--dataset", &w.dataset, &"--cwe", &"cwe89", &"--out", &specs]);
    assert_eq!(g.status.code(), Some(0), "{}", stderr(&g));
    let printed = forge(&[&"specgen", &"--dataset", &w.dataset, &"--cwe", &"cwe89"]);
    assert_eq!(stdout(&printed), std::fs::read_to_string(&specs).unwrap());
    let v: Value = serde_json::from_str(&stdout(&printed)).unwrap();
    assert_eq!(v["specs"].as_array().unwrap().len(), 1);

    let a = forge(&[&"analyze", &"--project", &w.project, &"--specs", &specs, &"--out", &w.out, &"--fail-on-findings"]);
    assert_eq!(a.status.code(), Some(1), "{}", stderr(&a));
    assert!(w.out.join("results.sarif").is_file());
    let a = forge(&[&"analyze", &"--project", &w.project, &"--specs", &specs, &"--out", &w.out, &"--depth", &"0"]);
    assert_eq!(a.status.code(), Some(0));
}

#[test]
fn dataset_commands() {
    let corpus = data("corpus/srms.json");
    let v = forge(&[&"dataset", &"validate", &"--dataset", &corpus]);
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    assert!(stdout(&v).contains("ok: 383 records"));

    let s = forge(&[&"dataset", &"stats", &"--dataset", &corpus]);
    let stats: Value = serde_json::from_str(&stdout(&s)).unwrap();
    assert_eq!(stats["records"], 383);

    let dir = tempfile::tempdir().unwrap();
    let (tr, te) = (dir.path().join("train.json"), dir.path().join("test.json"));
    let sp = forge(&[&"dataset", &"split", &"--dataset", &corpus, &"--train-out", &tr, &"--test-out", &te, &"--seed", &"3"]);
    assert_eq!(sp.status.code(), Some(0));
    assert_eq!(load_dataset(&tr).len() + load_dataset(&te).len(), 383);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"version":"1","methods":[{"signature":"x"}]}"#).unwrap();
    assert_eq!(forge(&[&"dataset", &"validate", &"--dataset", &bad]).status.code(), Some(2));
}

fn arff_attributes(p: &Path) -> usize {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| l.to_ascii_lowercase().starts_with("@attribute"))
        .count()
}

#[test]
fn features_and_training_from_arff() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let project_arff = w.dir.path().join("project.arff");
    let o = forge(&[&"features", &"extract", &"--project", &w.project, &"--out", &project_arff]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(arff_attributes(&project_arff), 129);

    let corpus_arff = w.dir.path().join("corpus.arff");
    forge(&[&"features", &"extract", &"--dataset", &data("corpus/srms.json"), &"--out", &corpus_arff]);
    assert_eq!(arff_attributes(&corpus_arff), 129);

    let model = w.dir.path().join("model.json");
    let t = forge(&[&"train", &"--arff", &corpus_arff, &"--out", &model]);
    assert_eq!(t.status.code(), Some(0), "{}", stderr(&t));
    let p = pipeline(&w, &["--model", model.to_str().unwrap(), "--fail-on-findings"]);
    assert_eq!(p.status.code(), Some(1), "{}", stderr(&p));
}

#[test]
fn eval_prints_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv.json");
    let o = forge(&[&"eval", &"--dataset", &data("corpus/srms.json"), &"--k", &"3", &"--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.is_object());
}

#[test]
fn help_lists_every_command() {
    let o = forge(&[&"--help"]);
    let text = stdout(&o);
    for c in ["detect", "train", "specgen", "analyze", "pipeline", "eval", "serve", "features", "dataset", "ml"] {
        assert!(text.contains(c), "{c}");
    }
}
