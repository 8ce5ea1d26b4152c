//! End-to-end acceptance criteria. Each criterion prints one PASS or FAIL
//! line; the test fails when any criterion does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use srm_core::features::{emit_arff, parse_arff, read_arff, FeatureExtractor};
use srm_core::labels::{Label, LabelSet};
use srm_core::ml::{evaluate_metrics, f1_score, synthetic};
use srm_core::program::{index_program, ProgramModel, SourceFile};
use srm_core::sarif::validate_sarif;
use srm_core::specgen::{MethodPattern, SpecFile, TaintSpec, TransferRule, FlowOut};
use srm_core::taint::{analyze_program, AnalysisConfig};
use srm_forge::pipeline::{artifacts, run_pipeline, StageStatus};

mod common;
use common::*;

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn servlet_sql_injection() -> Result<String, String> {
    let clean = Workspace::new("servlet/sanitized", &servlet_dataset());
    let out = run_pipeline(&clean.config()).map_err(|e| e.to_string())?;
    ensure(out.findings.is_empty(), || format!("sanitized: {:?}", out.findings))?;

    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let out = run_pipeline(&w.config()).map_err(|e| e.to_string())?;
    ensure(out.findings.len() == 1, || format!("mutant: {} findings", out.findings.len()))?;
    let f = &out.findings[0];
    let path: Vec<u32> = f.path.iter().map(|s| s.line).collect();
    ensure(f.cwe == Label::Cwe89, || format!("cwe {:?}", f.cwe))?;
    ensure(f.source_location.line == 18 && f.sink_location.line == 22, || {
        format!("source {} sink {}", f.source_location.line, f.sink_location.line)
    })?;
    ensure(path == [18, 19, 22], || format!("path {path:?}"))?;
    Ok("sanitized 0 findings; mutant 1 CWE-89 finding 18 -> 22 via [18, 19, 22]".into())
}

fn f1_of_reported_row() -> Result<String, String> {
    let direct = f1_score(0.90, 0.85);
    let c = LabelSet::EMPTY.with(Label::Cwe89);
    let mut pred = vec![c; 170];
    pred.extend(vec![LabelSet::EMPTY; 27]);
    let mut gold = vec![c; 153];
    gold.extend(vec![LabelSet::EMPTY; 17]);
    gold.extend(vec![c; 27]);
    let m = evaluate_metrics(&pred, &gold).map_err(|e| e.to_string())?;
    let l = m.label(Label::Cwe89);
    ensure(format!("{direct:.2}") == "0.87" && format!("{:.2}", l.f1) == "0.87", || {
        format!("f1 {direct} / {}", l.f1)
    })?;
    Ok(format!("P=0.90 R=0.85 gives F1={direct:.4}"))
}

fn gradient_check() -> Result<String, String> {
    let worst = oracles::max_gradient_error(7);
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e} over 100 problems"))
}

fn pruning_oracle() -> Result<String, String> {
    let n = oracles::exhaustive_prune_check()?;
    ensure(n == 3002 * 3, || format!("{n} checks"))?;
    Ok(format!("{n} multiset/threshold cases match brute force"))
}

fn ensembles_use_label_correlation() -> Result<String, String> {
    let (ce, cb) = oracles::average_scores(synthetic::correlated);
    let (ie, ib) = oracles::average_scores(synthetic::independent);
    let detail = format!(
        "correlated EPS {ce:.3} BR {cb:.3} (diff {:+.3}); independent EPS {ie:.3} BR {ib:.3} (diff {:+.3})",
        ce - cb,
        ie - ib
    );
    ensure(ce - cb >= 0.05 && (ie - ib).abs() <= 0.05, || detail.clone())?;
    Ok(detail)
}

fn deterministic_valid_sarif() -> Result<String, String> {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let first = run_pipeline(&w.config()).map_err(|e| e.to_string())?.sarif.unwrap_or_default();
    let second = run_pipeline(&w.config()).map_err(|e| e.to_string())?.sarif.unwrap_or_default();
    ensure(first.as_bytes() == second.as_bytes(), || "SARIF differs between runs".into())?;
    let problems = validate_sarif(&first);
    ensure(problems.is_empty(), || problems.join("; "))?;
    let v: serde_json::Value = serde_json::from_str(&first).map_err(|e| e.to_string())?;
    ensure(v["version"] == "2.1.0", || format!("version {}", v["version"]))?;
    Ok(format!("{} identical bytes, schema checks pass, version 2.1.0", first.len()))
}

const TAINT_FIXTURES: [&str; 10] = [
    "P01Straight.java",
    "P02Sanitized.java",
    "P03Branch.java",
    "P04Loop.java",
    "P05Constant.java",
    "P06Helpers.java",
    "P07Chain.java",
    "P08TryCatch.java",
    "P09Opaque.java",
    "P10Mixed.java",
];

fn taint_program(name: &str) -> ProgramModel {
    let text = std::fs::read_to_string(data(&format!("taint/{name}"))).unwrap();
    index_program(&[SourceFile::new(name, text)]).unwrap().0
}

/// Specs with one rule dropped, tagged with the expected direction of the
/// finding count relative to the full specs: `-1` fewer or equal, `1` more
/// or equal.
fn variants(specs: &[TaintSpec]) -> Vec<(Vec<TaintSpec>, i8)> {
    let mut out = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let mut push = |edit: &dyn Fn(&mut TaintSpec), dir: i8| {
            let mut v = specs.to_vec();
            edit(&mut v[i]);
            out.push((v, dir));
        };
        for k in 0..s.sources.len() {
            push(&|t: &mut TaintSpec| { t.sources.remove(k); }, -1);
        }
        for k in 0..s.sinks.len() {
            push(&|t: &mut TaintSpec| { t.sinks.remove(k); }, -1);
        }
        for k in 0..s.sanitizers.len() {
            push(&|t: &mut TaintSpec| { t.sanitizers.remove(k); }, 1);
        }
        push(
            &|t: &mut TaintSpec| {
                t.sanitizers.push(TransferRule {
                    pattern: MethodPattern::exact("fixtures.P06Helpers.pass(String)"),
                    inputs: vec![0],
                    out: FlowOut::Return,
                })
            },
            -1,
        );
    }
    out
}

fn taint_monotonicity() -> Result<String, String> {
    let text = std::fs::read_to_string(data("taint/specs.json")).map_err(|e| e.to_string())?;
    let specs = SpecFile::load(&text).map_err(|e| e.to_string())?.specs;
    let vs = variants(&specs);
    let mut checks = 0;
    let mut total = 0;
    for name in TAINT_FIXTURES {
        let p = taint_program(name);
        for depth in 0..3 {
            let cfg = AnalysisConfig {
                max_call_depth: depth,
                ..AnalysisConfig::default()
            };
            let base = analyze_program(&p, &specs, &cfg).len();
            total += base;
            for (v, dir) in &vs {
                let n = analyze_program(&p, v, &cfg).len();
                let ok = if *dir < 0 { n <= base } else { n >= base };
                ensure(ok, || format!("{name} depth {depth}: {base} -> {n}"))?;
                checks += 1;
            }
        }
    }
    ensure(total > 0, || "fixture specs find nothing".into())?;
    Ok(format!("{checks} spec variations over 10 programs and 3 depths"))
}

fn arff_schema() -> Result<String, String> {
    let x = FeatureExtractor::default();
    let d = load_dataset(&data("corpus/srms.json"));
    let rows = srm_forge::pipeline::training_matrix(&d, None, &x)?.rows;
    let text = emit_arff(&rows, x.schema()).map_err(|e| e.to_string())?;
    let doc = parse_arff(&text).map_err(|e| e.to_string())?;
    ensure(doc.attributes.len() == 129, || format!("{} attributes", doc.attributes.len()))?;
    let back = read_arff(&text, x.schema()).map_err(|e| e.to_string())?;
    ensure(back == rows, || "round trip changed the rows".into())?;
    Ok(format!("129 attributes, {} rows round-trip", rows.len()))
}

fn one_command_pipeline() -> Result<String, String> {
    let w = Workspace::new("servlet/mutant", &servlet_dataset());
    let o = Command::new(env!("CARGO_BIN_EXE_srm-forge"))
        .arg("pipeline")
        .arg("--project")
        .arg(&w.project)
        .arg("--dataset")
        .arg(&w.dataset)
        .arg("--out")
        .arg(&w.out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let missing: Vec<&str> = artifacts::ALL.iter().copied().filter(|n| !w.out.join(n).is_file()).collect();
    ensure(missing.is_empty(), || format!("missing {missing:?}"))?;
    let manifest: srm_forge::pipeline::Manifest =
        serde_json::from_str(&w.read_out(artifacts::MANIFEST)).map_err(|e| e.to_string())?;
    let stages: Vec<&str> = manifest.stages.iter().map(|s| s.stage.name()).collect();
    ensure(manifest.stages.iter().all(|s| s.status == StageStatus::Done), || format!("{stages:?}"))?;
    Ok(format!("stages {} wrote {} artifacts", stages.join(","), artifacts::ALL.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check); 9] = [
        ("servlet SQL injection", servlet_sql_injection),
        ("F1 of reported row", f1_of_reported_row),
        ("logistic gradient check", gradient_check),
        ("label-set pruning oracle", pruning_oracle),
        ("EPS vs BR on synthetic labels", ensembles_use_label_correlation),
        ("deterministic valid SARIF", deterministic_valid_sarif),
        ("taint monotonicity", taint_monotonicity),
        ("ARFF schema and round trip", arff_schema),
        ("single-command pipeline", one_command_pipeline),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let r = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match r {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
