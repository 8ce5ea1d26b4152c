use std::path::PathBuf;

use proptest::prelude::*;
use srm_core::dataset::*;
use srm_core::labels::{Label, LabelSet};

fn fixture(rel: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn set(labels: &[Label]) -> LabelSet {
    labels.iter().copied().collect()
}

fn record(sig: &str, labels: &[Label]) -> MethodRecord {
    MethodRecord::new(sig, set(labels))
}

fn doc(methods: &str) -> String {
    format!(r#"{{"version": "1", "methods": [{methods}]}}"#)
}

const GOOD: &str = r#"{"signature": "a.B.c(String)", "labels": ["sink", "cwe89"], "dataIn": [0], "dataOut": "none", "discovery": "training"}"#;

#[test]
fn loads_servlet_records() {
    let d = Dataset::load(&fixture("servlet/srms.json")).unwrap();
    assert_eq!(d.len(), 3);
    let r = d
        .get("org.owasp.esapi.Encoder.encodeForSQL(Codec,String)")
        .unwrap();
    assert_eq!(r.labels, set(&[Label::Sanitizer, Label::Cwe89]));
    assert_eq!(r.data_in, [1]);
    assert_eq!(r.data_out, DataOut::Return);
    assert!(d.warnings().is_empty());
}

#[test]
fn unknown_label_is_reported() {
    let text = doc(&GOOD.replace("cwe89", "cwe999"));
    let err = Dataset::load(&text).unwrap_err();
    let e = err.format_errors();
    assert_eq!(e.len(), 1);
    assert_eq!(e[0].path, "methods[0].labels[1]");
    assert!(e[0].reason.contains("cwe999"));
}

#[test]
fn duplicate_signatures_cite_both_indices() {
    let other = r#"{"signature": "x.Y.z()", "labels": [], "dataIn": [], "dataOut": "none", "discovery": "manual"}"#;
    let err = Dataset::load(&doc(&format!("{GOOD},{other},{GOOD}"))).unwrap_err();
    let e = err.format_errors();
    assert_eq!(e.len(), 1);
    assert_eq!(e[0].path, "methods[2].signature");
    assert!(e[0].reason.contains("methods[0]"));
}

#[test]
fn load_is_atomic_and_collects_every_problem() {
    let bad = r#"{"signature": "a.B.d(int)", "labels": [], "dataIn": [3], "dataOut": {"parameter": 2}, "discovery": "guessed"}"#;
    let err = Dataset::load(&doc(&format!("{GOOD},{bad}"))).unwrap_err();
    let paths: Vec<&str> = err
        .format_errors()
        .iter()
        .map(|e| e.path.as_str())
        .collect();
    assert_eq!(
        paths,
        [
            "methods[1].discovery",
            "methods[1].dataIn[0]",
            "methods[1].dataOut"
        ]
    );
    assert!(Dataset::load("{").is_err());
    assert!(Dataset::load(&doc(r#"{"signature": "a b", "labels": [], "dataIn": [], "dataOut": "none", "discovery": "manual"}"#)).is_err());
    assert!(Dataset::load(&doc(r#"{"signature": "a.B.c()", "labels": [], "dataIn": [], "dataOut": "none", "discovery": "manual", "extra": 1}"#)).is_err());
}

#[test]
fn cwe_without_role_is_only_a_warning() {
    let text = doc(
        r#"{"signature": "a.B.c()", "labels": ["cwe79"], "dataIn": [], "dataOut": "none", "discovery": "training"}"#,
    );
    let d = Dataset::load(&text).unwrap();
    assert_eq!(d.warnings().len(), 1);
    assert_eq!(dataset_stats(&d).cwe_without_role, 1.0);
}

#[test]
fn save_is_canonical() {
    let d = Dataset::load(&fixture("servlet/srms.json")).unwrap();
    let text = d.save();
    assert_eq!(Dataset::load(&text).unwrap(), d);
    assert_eq!(Dataset::load(&text).unwrap().save(), text);
    let sigs: Vec<&str> = d.records().iter().map(|r| r.signature.as_str()).collect();
    let mut sorted = sigs.clone();
    sorted.sort();
    assert_eq!(sigs, sorted);
}

#[test]
fn merge_replaces_and_marks_manual() {
    let base = Dataset::load(&fixture("servlet/srms.json")).unwrap();
    let sig = "org.owasp.esapi.Encoder.encodeForSQL(Codec,String)";
    let mut edit = base.get(sig).unwrap().clone();
    edit.labels.remove(Label::Sanitizer);
    let merged = merge_records(&base, &[edit]).unwrap();
    let r = merged.get(sig).unwrap();
    assert!(!r.labels.contains(Label::Sanitizer));
    assert_eq!(r.discovery, Discovery::Manual);
    assert_eq!(merged.len(), 3);
    assert_eq!(merge_records(&base, &[]).unwrap(), base);
}

#[test]
fn merge_last_edit_wins_and_appends() {
    let base = Dataset::new("1", vec![record("a.A.f()", &[Label::Source])]).unwrap();
    let first = record("b.B.g(int)", &[Label::Sink]);
    let second = record("b.B.g(int)", &[Label::Sanitizer]);
    let merged = merge_records(&base, &[first.clone(), second.clone()]).unwrap();
    assert_eq!(merged.len(), 2);
    assert_eq!(
        merged.get("b.B.g(int)").unwrap().labels,
        set(&[Label::Sanitizer])
    );
    let reversed = merge_records(&base, &[second, first]).unwrap();
    assert_eq!(
        reversed.get("b.B.g(int)").unwrap().labels,
        set(&[Label::Sink])
    );
    let mut bad = record("b.B.g(int)", &[]);
    bad.data_in = vec![4];
    assert!(merge_records(&base, &[bad]).is_err());
}

#[test]
fn detected_records_never_replace_manual_or_training() {
    let mut manual = record("a.A.m()", &[Label::Sink]);
    manual.discovery = Discovery::Manual;
    let mut old = record("a.A.d()", &[Label::Sink]);
    old.discovery = Discovery::Detected;
    let base = Dataset::new(
        "1",
        vec![manual.clone(), record("a.A.t()", &[Label::Source]), old],
    )
    .unwrap();
    let predictions = [
        record("a.A.m()", &[Label::Source]),
        record("a.A.t()", &[]),
        record("a.A.d()", &[Label::Sanitizer]),
        record("a.A.n()", &[Label::Sink]),
    ];
    let merged = merge_detected(&base, &predictions).unwrap();
    assert_eq!(merged.get("a.A.m()").unwrap(), &manual);
    assert_eq!(merged.get("a.A.t()").unwrap().labels, set(&[Label::Source]));
    assert_eq!(
        merged.get("a.A.d()").unwrap().labels,
        set(&[Label::Sanitizer])
    );
    assert_eq!(
        merged.get("a.A.n()").unwrap().discovery,
        Discovery::Detected
    );
}

fn numbered(n: usize) -> Dataset {
    Dataset::new(
        "1",
        (0..n)
            .map(|i| record(&format!("p.C.m{i}()"), &[Label::ALL[i % 10]]))
            .collect(),
    )
    .unwrap()
}

#[test]
fn split_sizes_and_determinism() {
    let d = numbered(10);
    let (train, test) = split_dataset(&d, 0.7, 42);
    assert_eq!((train.len(), test.len()), (7, 3));
    assert_eq!(split_dataset(&d, 0.7, 42), (train.clone(), test.clone()));
    let mut all: Vec<MethodRecord> = train
        .records()
        .iter()
        .chain(test.records())
        .cloned()
        .collect();
    all.sort_by(|a, b| a.signature.cmp(&b.signature));
    assert_eq!(all, d.records());
}

#[test]
fn stats_examples() {
    let empty = dataset_stats(&Dataset::default());
    assert_eq!(empty.records, 0);
    assert!(empty.per_label.iter().all(|c| c.count == 0));
    assert!(empty.label_sets.is_empty());

    let sinks = Dataset::new(
        "1",
        (0..3)
            .map(|i| record(&format!("a.B.q{i}()"), &[Label::Sink, Label::Cwe89]))
            .collect(),
    )
    .unwrap();
    let s = dataset_stats(&sinks);
    assert_eq!(s.pair(Label::Sink, Label::Cwe89), 3);
    assert_eq!(s.label_sets.len(), 1);
    assert_eq!(s.label_sets[0].count, 3);

    let servlet = dataset_stats(&Dataset::load(&fixture("servlet/srms.json")).unwrap());
    assert_eq!(servlet.count(Label::Source), 1);
    assert_eq!(servlet.count(Label::Sink), 1);
    assert_eq!(servlet.count(Label::Sanitizer), 1);
    assert_eq!(servlet.count(Label::Cwe89), 3);
}

fn record_strategy() -> impl Strategy<Value = MethodRecord> {
    (
        "[a-z]{1,3}\\.[A-Z][a-z]{0,3}\\.[a-z]{1,4}",
        0usize..4,
        0u16..1024,
        0usize..3,
        prop_oneof![
            Just(Discovery::Training),
            Just(Discovery::Detected),
            Just(Discovery::Manual)
        ],
        proptest::option::of("[ -~]{0,10}"),
    )
        .prop_map(|(name, arity, bits, out, discovery, note)| {
            let params = vec!["String"; arity].join(",");
            let data_out = match out {
                0 => DataOut::Return,
                1 if arity > 0 => DataOut::Parameter(arity - 1),
                _ => DataOut::None,
            };
            MethodRecord {
                signature: format!("{name}({params})"),
                labels: LabelSet::from_bits(bits),
                data_in: (0..arity).step_by(2).collect(),
                data_out,
                discovery,
                note,
            }
        })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    proptest::collection::vec(record_strategy(), 0..20).prop_map(|mut rs| {
        rs.sort_by(|a, b| a.signature.cmp(&b.signature));
        rs.dedup_by(|a, b| a.signature == b.signature);
        Dataset::new("1", rs).unwrap()
    })
}

proptest! {
    #[test]
    fn load_save_round_trip(d in dataset_strategy()) {
        prop_assert_eq!(Dataset::load(&d.save()).unwrap(), d);
    }

    #[test]
    fn merge_is_idempotent(d in dataset_strategy(), edits in proptest::collection::vec(record_strategy(), 0..6)) {
        let once = merge_records(&d, &edits).unwrap();
        prop_assert_eq!(merge_records(&once, &edits).unwrap(), once);
    }

    #[test]
    fn split_partitions(d in dataset_strategy(), f in 0.05f64..0.95, seed in any::<u64>()) {
        let (a, b) = split_dataset(&d, f, seed);
        prop_assert_eq!(a.len(), train_size(d.len(), f));
        prop_assert_eq!(a.len() + b.len(), d.len());
        for r in d.records() {
            prop_assert!(a.get(&r.signature).is_some() != b.get(&r.signature).is_some());
        }
        prop_assert_eq!(split_dataset(&d, f, seed), (a, b));
    }
}
