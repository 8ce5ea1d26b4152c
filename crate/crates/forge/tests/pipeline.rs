use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use proptest::prelude::*;
use srm_core::dataset::{merge_records, DataOut, Discovery, MethodRecord};
use srm_core::labels::{Label, LabelSet};
use srm_core::sarif::validate_sarif;
use srm_core::specgen::SpecFile;
use srm_forge::pipeline::*;

mod common;
use common::*;

fn lines(f: &srm_core::taint::Finding) -> Vec<u32> {
    f.path.iter().map(|s| s.line).collect()
}

#[test]
fn mutant_yields_one_sql_injection() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let out = run_pipeline(&w.config()).unwrap();
    assert_eq!(out.findings.len(), 1);
    let f = &out.findings[0];
    assert_eq!(f.cwe, Label::Cwe89);
    assert_eq!(f.source_location.uri, "Servlet.java");
    assert_eq!((f.source_location.line, f.sink_location.line), (18, 22));
    assert_eq!(lines(f), [18, 19, 22]);
    let sarif = out.sarif.as_deref().unwrap();
    assert!(validate_sarif(sarif).is_empty());
    assert_eq!(out.result_ref(), Some(w.out.join("results.sarif")));
    assert_eq!(w.read_out("results.sarif"), sarif);
}

#[test]
fn sanitized_servlet_is_clean() {
    let w = Workspace::new("servlet/sanitized", &servlet_dataset());
    let out = run_pipeline(&w.config()).unwrap();
    assert!(out.findings.is_empty());
    let v: serde_json::Value = serde_json::from_str(out.sarif.as_deref().unwrap()).unwrap();
    assert_eq!(v["runs"][0]["results"], serde_json::json!([]));
}

#[test]
fn removing_the_sanitizer_record_exposes_the_flow() {
    let d = without(&servlet_dataset(), SANITIZER);
    for fixture in ["servlet/mutant", "servlet/sanitized"] {
        let w = Workspace::new(fixture, &d);
        let out = run_pipeline(&w.config()).unwrap();
        assert_eq!(out.findings.len(), 1, "{fixture}");
        assert_eq!(out.findings[0].cwe, Label::Cwe89);
    }
}

#[test]
fn bundled_corpus_drives_the_same_result() {
    let corpus = load_dataset(&data("corpus/srms.json"));
    assert!(corpus.len() >= 300);
    for (fixture, expected) in [("servlet/mutant", 1), ("servlet/sanitized", 0)] {
        let w = Workspace::new(fixture, &corpus);
        let out = run_pipeline(&w.config()).unwrap();
        let sql: Vec<_> = out.findings.iter().filter(|f| f.cwe == Label::Cwe89).collect();
        assert_eq!(sql.len(), expected, "{fixture}: {:?}", out.findings);
    }
}

#[test]
fn every_stage_writes_its_artifacts() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let out = run_pipeline(&w.config()).unwrap();
    let mut expected: Vec<String> = artifacts::ALL.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(w.out_files(), expected);
    let stages: Vec<Stage> = out.manifest.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stages, JobKind::Pipeline.stages());
    assert!(out.manifest.stages.iter().all(|s| s.status == StageStatus::Done));
    assert_eq!(out.manifest.findings, Some(1));
    let specs = SpecFile::load(&w.read_out("specs.json")).unwrap();
    assert_eq!(specs.specs.len(), 1);
    let analysis: serde_json::Value = serde_json::from_str(&w.read_out("analysis.json")).unwrap();
    assert_eq!(analysis["analysis"]["max_call_depth"], 2);
    assert_eq!(analysis["specs"], serde_json::json!(["srm-cwe89"]));
}

#[test]
fn reruns_are_byte_identical() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    run_pipeline(&w.config()).unwrap();
    let first: Vec<String> = artifacts::ALL.iter().map(|n| w.read_out(n)).collect();
    run_pipeline(&w.config()).unwrap();
    let second: Vec<String> = artifacts::ALL.iter().map(|n| w.read_out(n)).collect();
    assert_eq!(first, second);

    let mut other = w.config();
    other.output_dir = w.dir.path().join("elsewhere");
    run_pipeline(&other).unwrap();
    let sarif = std::fs::read_to_string(other.output_dir.join("results.sarif")).unwrap();
    assert_eq!(sarif, first[artifacts::ALL.iter().position(|n| *n == "results.sarif").unwrap()]);
}

#[test]
fn project_without_methods_gives_empty_results() {
    let w = Workspace::new("", &servlet_dataset());
    std::fs::write(w.project.join("README.txt"), "no java here").unwrap();
    let out = run_pipeline(&w.config()).unwrap();
    assert!(out.findings.is_empty());
    assert!(out.predictions.is_empty());
    let train = out.manifest.stages.iter().find(|s| s.stage == Stage::Train).unwrap();
    assert_eq!(train.status, StageStatus::Skipped);
    assert!(validate_sarif(out.sarif.as_deref().unwrap()).is_empty());
    assert_eq!(out.dataset, servlet_dataset());
}

#[test]
fn failing_stage_is_named_and_partials_remain() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    std::fs::create_dir_all(&w.out).unwrap();
    std::fs::write(w.out.join("results.sarif"), "stale").unwrap();
    let bad_model = w.dir.path().join("model.json");
    std::fs::write(&bad_model, "{not a model").unwrap();
    let mut cfg = w.config();
    cfg.model_path = Some(bad_model);
    let err = run_pipeline(&cfg).unwrap_err();
    match &err {
        PipelineError::Stage { stage, cause } => {
            assert_eq!(*stage, "train");
            assert!(cause.contains("model.json"), "{cause}");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().starts_with("stage `train` failed: "));
    assert_eq!(
        w.out_files(),
        ["features.arff.partial", "index.json.partial", "manifest.json.partial"]
    );
    let manifest: Manifest = serde_json::from_str(&w.read_out("manifest.json.partial")).unwrap();
    let last = manifest.stages.last().unwrap();
    assert_eq!((last.stage, last.status), (Stage::Train, StageStatus::Failed));
}

#[test]
fn invalid_dataset_fails_the_load_stage() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    std::fs::write(&w.dataset, r#"{"version": "1", "methods": [{"signature": "bad"}]}"#).unwrap();
    let err = run_pipeline(&w.config()).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: "load", .. }), "{err}");
}

#[test]
fn missing_inputs_are_configuration_errors() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let mut cfg = w.config();
    cfg.project_root = w.dir.path().join("absent");
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(_))));
    let mut cfg = w.config();
    cfg.cwe_filter = Some(vec![Label::Sink]);
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(_))));
}

#[test]
fn cwe_filter_limits_specs() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let mut cfg = w.config();
    cfg.cwe_filter = Some(vec![Label::Cwe78]);
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.specs.is_empty());
    assert!(out.findings.is_empty());
}

struct Recorder {
    seen: Mutex<Vec<(usize, usize, Stage)>>,
    cancel_after: usize,
    calls: AtomicUsize,
}

impl Observer for Recorder {
    fn stage_started(&self, index: usize, total: usize, stage: Stage) {
        self.seen.lock().unwrap().push((index, total, stage));
    }

    fn is_cancelled(&self) -> bool {
        self.calls.fetch_add(1, Ordering::SeqCst) >= self.cancel_after
    }
}

#[test]
fn observer_sees_stages_and_can_cancel() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let all = Recorder {
        seen: Mutex::new(Vec::new()),
        cancel_after: usize::MAX,
        calls: AtomicUsize::new(0),
    };
    run(JobKind::Detect, &w.config(), &all).unwrap();
    let seen = all.seen.into_inner().unwrap();
    let stages: Vec<Stage> = seen.iter().map(|s| s.2).collect();
    assert_eq!(stages, JobKind::Detect.stages());
    assert!(seen.iter().enumerate().all(|(i, s)| s.0 == i && s.1 == 6));

    let stop = Recorder {
        seen: Mutex::new(Vec::new()),
        cancel_after: 2,
        calls: AtomicUsize::new(0),
    };
    assert!(matches!(
        run(JobKind::Pipeline, &w.config(), &stop),
        Err(PipelineError::Cancelled)
    ));
    assert_eq!(stop.seen.into_inner().unwrap().len(), 2);
    assert!(!w.out.join("results.sarif").exists());
}

#[test]
fn partial_job_kinds_write_their_own_artifacts() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let detect = run(JobKind::Detect, &w.config(), &Silent).unwrap();
    assert_eq!(detect.result_ref(), Some(w.out.join("dataset.json")));
    assert!(detect.sarif.is_none());
    assert!(!w.out.join("results.sarif").exists());

    let train = run(JobKind::Train, &w.config(), &Silent).unwrap();
    assert_eq!(train.result_ref(), Some(w.out.join("model.json")));

    let mut cfg = w.config();
    cfg.model_path = Some(w.dir.path().join("model.json"));
    std::fs::copy(w.out.join("model.json"), cfg.model_path.as_ref().unwrap()).unwrap();
    let analyze = run(JobKind::Analyze, &cfg, &Silent).unwrap();
    assert_eq!(analyze.findings.len(), 1);
    assert!(!w.out.join("predictions.json").exists());
}

#[test]
fn specs_from_file_give_the_same_findings() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let full = run_pipeline(&w.config()).unwrap();
    let specs = SpecFile::load(&w.read_out("specs.json")).unwrap();
    let out_dir = w.dir.path().join("analyze");
    let direct = run_with_specs(&w.project, specs, Default::default(), &out_dir).unwrap();
    assert_eq!(direct.findings, full.findings);
    assert_eq!(direct.sarif, full.sarif);
}

#[test]
fn detections_are_recorded_as_detected() {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let out = run_pipeline(&w.config()).unwrap();
    let p = out.predictions.iter().find(|p| p.signature == DO_POST).unwrap();
    assert_eq!(p.scores.len(), 10);
    match out.dataset.get(DO_POST) {
        Some(r) => {
            assert_eq!(r.discovery, Discovery::Detected);
            assert_eq!(r.labels, p.labels);
            assert_eq!(r.data_out, DataOut::None);
        }
        None => assert!(p.labels.is_empty()),
    }
    for sig in [SOURCE, SINK, SANITIZER] {
        assert_eq!(out.dataset.get(sig), servlet_dataset().get(sig));
    }
}

fn manual_record() -> impl Strategy<Value = MethodRecord> {
    (0u16..1024, prop_oneof![Just(DataOut::None), Just(DataOut::Parameter(0)), Just(DataOut::Parameter(1))], proptest::option::of(0usize..2))
        .prop_map(|(bits, out, input)| {
            let mut r = MethodRecord::new(DO_POST, LabelSet::from_bits(bits));
            r.data_out = out;
            r.data_in = input.into_iter().collect();
            r
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn manual_records_survive_detection(manual in manual_record()) {
        let d = merge_records(&servlet_dataset(), std::slice::from_ref(&manual)).unwrap();
        let w = Workspace::new("servlet/mutant", &d);
        let out = run_pipeline(&w.config()).unwrap();
        let mut expected = manual.clone();
        expected.discovery = Discovery::Manual;
        prop_assert_eq!(out.dataset.get(DO_POST), Some(&expected));
    }
}
