use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srm_core::features::{FeatureEntry, FeatureKind, FeatureSchema, FeatureVector};
use srm_core::labels::{Label, LabelSet};
use srm_core::ml::synthetic;
use srm_core::ml::*;

mod oracles;
use oracles::*;

fn set(labels: &[Label]) -> LabelSet {
    labels.iter().copied().collect()
}

const A: Label = Label::Source;
const B: Label = Label::Sink;
const C: Label = Label::Sanitizer;

fn toy_schema(d: usize) -> FeatureSchema {
    FeatureSchema {
        version: "toy".into(),
        entries: (0..d)
            .map(|i| FeatureEntry {
                id: format!("f{i}"),
                kind: FeatureKind::Numeric,
                categories: None,
                extension: false,
            })
            .collect(),
    }
}

fn toy(rows: &[(&[f64], LabelSet)]) -> TrainingMatrix {
    let schema = toy_schema(rows[0].0.len());
    TrainingMatrix::new(
        schema.clone(),
        rows.iter()
            .map(|(x, l)| {
                (
                    FeatureVector {
                        schema_version: schema.version.clone(),
                        values: x.to_vec(),
                    },
                    *l,
                )
            })
            .collect(),
    )
    .unwrap()
}

fn logistic() -> BaseLearner {
    BaseLearner::LogisticRegression(LogisticParams::default())
}

// Metrics

#[test]
fn f1_reproduces_reported_row() {
    // 153/(153+17) = 0.90, 153/(153+27) = 0.85
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for _ in 0..153 {
        pred.push(set(&[C]));
        gold.push(set(&[C]));
    }
    for _ in 0..17 {
        pred.push(set(&[C]));
        gold.push(LabelSet::EMPTY);
    }
    for _ in 0..27 {
        pred.push(LabelSet::EMPTY);
        gold.push(set(&[C]));
    }
    let m = evaluate_metrics(&pred, &gold).unwrap();
    let s = m.label(C);
    assert!((s.precision - 0.90).abs() < 1e-12);
    assert!((s.recall - 0.85).abs() < 1e-12);
    assert_eq!(format!("{:.2}", s.f1), "0.87");
    assert_eq!(format!("{:.2}", f1_score(0.90, 0.85)), "0.87");
}

#[test]
fn hand_counted_confusion() {
    // TP=3, FP=1, FN=2 for sink over six rows.
    let s = set(&[B]);
    let e = LabelSet::EMPTY;
    let pred = [s, s, s, s, e, e];
    let gold = [s, s, s, e, s, s];
    let m = evaluate_metrics(&pred, &gold).unwrap();
    let l = m.label(B);
    assert!((l.precision - 0.75).abs() < 1e-12);
    assert!((l.recall - 0.6).abs() < 1e-12);
    assert!((l.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
    assert!((m.hamming_loss - 3.0 / 60.0).abs() < 1e-12);
    assert!((m.subset_accuracy - 0.5).abs() < 1e-12);
    assert_eq!(m.macro_f1, l.f1);
}

#[test]
fn perfect_prediction_and_errors() {
    let gold = [set(&[A, B]), set(&[C]), LabelSet::EMPTY];
    let m = evaluate_metrics(&gold, &gold).unwrap();
    assert_eq!((m.macro_f1, m.micro_f1, m.subset_accuracy, m.hamming_loss), (1.0, 1.0, 1.0, 0.0));
    assert!(matches!(
        evaluate_metrics(&gold[..1], &gold),
        Err(MlError::LengthMismatch { pred: 1, gold: 3 })
    ));
    assert!(matches!(evaluate_metrics(&[], &[]), Err(MlError::NoInstances)));
}

fn labelset() -> impl Strategy<Value = LabelSet> {
    (0u16..1024).prop_map(LabelSet::from_bits)
}

proptest! {
    #[test]
    fn metric_laws(pairs in proptest::collection::vec((labelset(), labelset()), 1..20)) {
        let (pred, gold): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let m = evaluate_metrics(&pred, &gold).unwrap();
        for v in m.to_vec() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let r = evaluate_metrics(&gold, &pred).unwrap();
        prop_assert_eq!(m.hamming_loss, r.hamming_loss);
        let both_one = m.micro_f1 == 1.0 && m.macro_f1 == 1.0;
        prop_assert_eq!(both_one, pred == gold);
        for l in &m.per_label {
            if l.precision + l.recall == 0.0 {
                prop_assert_eq!(l.f1, 0.0);
            }
        }
    }
}

// Logistic regression

#[test]
fn gradient_matches_finite_differences() {
    let worst = max_gradient_error(7);
    assert!(worst <= 1e-4, "max relative error {worst}");
}

#[test]
fn separable_data_is_fitted_exactly() {
    let x: Vec<Vec<f64>> = (0..20)
        .map(|i| vec![i as f64 / 10.0 - 1.0, ((i * 7) % 5) as f64 / 5.0])
        .collect();
    let y: Vec<f64> = x.iter().map(|r| f64::from(r[0] + 0.5 * r[1] > 0.1)).collect();
    let p = LogisticParams {
        learning_rate: 1.0,
        l2: 0.0,
        epochs: 2000,
    };
    let fit = train_logistic(&x, &y, &p).unwrap();
    let model = BinaryModel::Logistic {
        weights: fit.weights.clone(),
        bias: fit.bias,
    };
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(r, t)| f64::from(model.predict(r) >= 0.5) == **t)
        .count();
    assert_eq!(correct, x.len());
    assert!(fit.losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn degenerate_targets_give_constant_models() {
    let x = vec![vec![0.0], vec![1.0], vec![2.0]];
    let m = logistic().train(&x, &[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(m, BinaryModel::Constant { p: 1.0 });
    assert!(logistic().train(&[], &[]).is_err());
    assert!(matches!(
        train_logistic(&x, &[1.0], &LogisticParams::default()),
        Err(MlError::TargetMismatch(3, 1))
    ));
}

proptest! {
    #[test]
    fn training_loss_never_increases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, x, y, l2) = random_problem(&mut rng);
        let p = LogisticParams { learning_rate: 0.5, l2, epochs: 100 };
        let fit = train_logistic(&x, &y, &p).unwrap();
        prop_assert!(fit.losses.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn tree_fits_axis_aligned_split() {
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, 0.0]).collect();
    let y: Vec<f64> = (0..12).map(|i| f64::from(i >= 6)).collect();
    let root = train_tree(&x, &y, &TreeParams::default()).unwrap();
    for (r, t) in x.iter().zip(&y) {
        assert_eq!(root.predict(r), *t);
    }
}

// Pruning

#[test]
fn pruning_matches_brute_force_on_all_small_multisets() {
    // multisets of size 1..=6 over 8 sets: C(14,6)-1 = 3002, times three p values
    assert_eq!(exhaustive_prune_check(), Ok(3002 * 3));
}

#[test]
fn pruning_examples() {
    let ab = set(&[A, B]);
    let a = set(&[A]);
    let c = set(&[C]);
    let rows = [ab, ab, ab, a, a, c];
    let r = prune_label_sets(&rows, 1);
    let mut f = r.frequent.clone();
    f.sort();
    let mut want = vec![ab, a];
    want.sort();
    assert_eq!(f, want);
    assert_eq!(r.reassignment[&c], Vec::<LabelSet>::new());

    let none = prune_label_sets(&rows, 0);
    assert_eq!(none.frequent.len(), 3);
    assert!(none.reassignment.is_empty());

    let abc = set(&[A, B, C]);
    let ac = set(&[A, C]);
    let r = prune_label_sets(&[abc, abc, ab, ab, ac], 1);
    assert_eq!(r.reassignment[&ac], Vec::<LabelSet>::new());
}

// Pruned Sets and ensembles

fn six_row_fixture() -> TrainingMatrix {
    let ab = set(&[A, B]);
    let a = set(&[A]);
    toy(&[
        (&[0.0, 0.1], ab),
        (&[0.1, 0.0], ab),
        (&[0.2, 0.2], ab),
        (&[2.0, 2.1], a),
        (&[2.1, 2.0], a),
        (&[5.0, 5.0], set(&[C])),
    ])
}

#[test]
fn pruned_sets_closed_world() {
    let t = six_row_fixture();
    let m = train_pruned_sets(&t, &logistic(), 1).unwrap();
    let ModelBody::PrunedSets { model } = &m.body else {
        panic!("pruned sets body")
    };
    assert_eq!(model.classes.len(), 2);
    for (x, _) in &t.rows {
        let p = predict_labels(&m, x).unwrap();
        assert!(model.classes.contains(&p.labels));
    }
    assert!(matches!(
        train_pruned_sets(&t, &logistic(), 5),
        Err(MlError::EmptyAfterPruning { p: 5 })
    ));
}

#[test]
fn single_class_pruned_sets() {
    let s = set(&[B, Label::Cwe89]);
    let t = toy(&[(&[0.0], s), (&[1.0], s), (&[2.0], s)]);
    let m = train_pruned_sets(&t, &logistic(), 0).unwrap();
    for (x, _) in &t.rows {
        assert_eq!(predict_labels(&m, x).unwrap().labels, s);
    }
}

#[test]
fn binary_relevance_matches_separate_runs() {
    let t = synthetic::independent(60, 3);
    let base = logistic();
    let m = train_binary_relevance(&t, &base).unwrap();
    let ModelBody::BinaryRelevance { components } = &m.body else {
        panic!("br body")
    };
    assert_eq!(components.len(), 10);
    let transform = Transform::fit(&t.schema, t.rows.iter().map(|(v, _)| v));
    let x: Vec<Vec<f64>> = t.rows.iter().map(|(v, _)| transform.apply(v)).collect();
    let singles: Vec<BinaryModel> = Label::ALL
        .iter()
        .map(|l| {
            let y: Vec<f64> = t.rows.iter().map(|(_, s)| f64::from(s.contains(*l))).collect();
            base.train(&x, &y).unwrap()
        })
        .collect();
    for (row, (v, _)) in x.iter().zip(&t.rows) {
        let expected: LabelSet = Label::ALL
            .into_iter()
            .filter(|l| singles[l.index()].predict(row) >= 0.5)
            .collect();
        assert_eq!(predict_labels(&m, v).unwrap().labels, expected);
    }
    // labels never present are constant zero
    assert!(components[Label::Cwe863.index()].is_constant());
    let train: Vec<LabelSet> = t
        .rows
        .iter()
        .map(|(v, _)| predict_labels(&m, v).unwrap().labels)
        .collect();
    let metrics = evaluate_metrics(&train, &t.labels()).unwrap();
    for l in synthetic::INDEPENDENT_LABELS {
        assert_eq!(metrics.label(l).f1, 1.0, "{l}");
    }
}

#[test]
fn ensemble_of_one_equals_its_member() {
    let t = synthetic::correlated(80, 5);
    let params = EnsembleParams {
        prune: 1,
        members: 1,
        sample_fraction: 1.0,
        threshold: 0.5,
        seed: 9,
    };
    let eps = train_ensemble_pruned_sets(&t, &logistic(), &params).unwrap();
    let ps = train_pruned_sets(&t, &logistic(), 1).unwrap();
    for (x, _) in &t.rows {
        assert_eq!(
            predict_labels(&eps, x).unwrap().labels,
            predict_labels(&ps, x).unwrap().labels
        );
    }
}

fn member_predictions(m: &MultiLabelModel, x: &FeatureVector) -> Vec<LabelSet> {
    let ModelBody::EnsemblePrunedSets { members, .. } = &m.body else {
        panic!("eps body")
    };
    let enc = m.transform.apply(x);
    members.iter().map(|p| p.predict(&enc)).collect()
}

fn with_threshold(m: &MultiLabelModel, t: f64) -> MultiLabelModel {
    let mut m = m.clone();
    if let ModelBody::EnsemblePrunedSets { threshold, .. } = &mut m.body {
        *threshold = t;
    }
    m
}

#[test]
fn vote_threshold_extremes_and_determinism() {
    let t = synthetic::correlated(90, 11);
    let params = EnsembleParams {
        prune: 0,
        members: 5,
        sample_fraction: 0.5,
        threshold: 0.5,
        seed: 4,
    };
    let m = train_ensemble_pruned_sets(&t, &logistic(), &params).unwrap();
    let again = train_ensemble_pruned_sets(&t, &logistic(), &params).unwrap();
    assert_eq!(m, again);
    let union = with_threshold(&m, 0.0);
    let inter = with_threshold(&m, 1.0);
    for (x, _) in &t.rows {
        let members = member_predictions(&m, x);
        let u = members.iter().fold(LabelSet::EMPTY, |a, b| a.union(*b));
        let i = members.iter().fold(LabelSet::from_bits(0x3ff), |a, b| a.intersection(*b));
        assert_eq!(predict_labels(&union, x).unwrap().labels, u);
        assert_eq!(predict_labels(&inter, x).unwrap().labels, i);
    }
}

#[test]
fn unanimous_ensemble_scores_one() {
    let s = set(&[B, Label::Cwe89]);
    let t = toy(&[(&[0.0], s), (&[1.0], s), (&[2.0], s), (&[3.0], s)]);
    let params = EnsembleParams {
        prune: 0,
        members: 3,
        sample_fraction: 0.75,
        threshold: 0.5,
        seed: 1,
    };
    let m = train_ensemble_pruned_sets(&t, &logistic(), &params).unwrap();
    let p = predict_labels(&m, &t.rows[0].0).unwrap();
    assert_eq!(p.labels, s);
    assert_eq!(p.scores[B.index()], 1.0);
    assert_eq!(p.scores[Label::Cwe89.index()], 1.0);
    assert_eq!(p.scores[A.index()], 0.0);
}

#[test]
fn prediction_rejects_other_schemas() {
    let t = six_row_fixture();
    let m = train_binary_relevance(&t, &logistic()).unwrap();
    let mut x = t.rows[0].0.clone();
    x.schema_version = "other".into();
    assert!(matches!(predict_labels(&m, &x), Err(MlError::SchemaMismatch(_))));
    let empty = TrainingMatrix::new(toy_schema(1), vec![]).unwrap();
    assert!(matches!(
        train_binary_relevance(&empty, &logistic()),
        Err(MlError::EmptyTraining)
    ));
}

#[test]
fn model_json_round_trip() {
    let t = six_row_fixture();
    for config in [
        ModelConfig { kind: ModelKind::BinaryRelevance, ..ModelConfig::default() },
        ModelConfig {
            kind: ModelKind::EnsemblePrunedSets,
            base: BaseLearner::DecisionTree(TreeParams::default()),
            prune: 0,
            members: 3,
            ..ModelConfig::default()
        },
    ] {
        let m = train(&config, &t).unwrap();
        let back = MultiLabelModel::from_json(&m.to_json()).unwrap();
        for (x, _) in &t.rows {
            assert_eq!(predict_labels(&back, x).unwrap(), predict_labels(&m, x).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn raising_threshold_never_adds_labels(seed in 0u64..1000, lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let t = synthetic::correlated(40, seed);
        let params = EnsembleParams { prune: 0, members: 4, sample_fraction: 0.6, threshold: 0.5, seed };
        let m = train_ensemble_pruned_sets(&t, &logistic(), &params).unwrap();
        let (a, b) = (with_threshold(&m, lo), with_threshold(&m, hi));
        for (x, _) in &t.rows {
            let high = predict_labels(&b, x).unwrap().labels;
            let low = predict_labels(&a, x).unwrap().labels;
            prop_assert!(high.is_subset(low));
        }
    }
}

// Cross-validation and search

struct ConstantLearner(LabelSet);

impl Learner for ConstantLearner {
    type Model = ConstantLearner;
    fn fit(&self, _: &TrainingMatrix) -> Result<ConstantLearner, MlError> {
        Ok(ConstantLearner(self.0))
    }
}

impl Predictor for ConstantLearner {
    fn predict_set(&self, _: &FeatureVector) -> Result<LabelSet, MlError> {
        Ok(self.0)
    }
}

#[test]
fn kfold_tests_every_row_once() {
    let t = toy(&[
        (&[0.0], set(&[A])),
        (&[1.0], set(&[A])),
        (&[2.0], LabelSet::EMPTY),
        (&[3.0], LabelSet::EMPTY),
    ]);
    let r = cross_validate(&t, &ConstantLearner(set(&[A])), 2, Protocol::Kfold, 3).unwrap();
    assert_eq!(r.fold_sizes, [(2, 2), (2, 2)]);
    assert!(matches!(
        cross_validate(&t, &ConstantLearner(LabelSet::EMPTY), 5, Protocol::Kfold, 3),
        Err(MlError::TooFewRows { rows: 4, k: 5 })
    ));
}

#[test]
fn constant_predictor_on_balanced_label() {
    // 8 rows, half labelled source; always predicting source.
    let rows: Vec<(Vec<f64>, LabelSet)> = (0..8)
        .map(|i| (vec![i as f64], if i % 2 == 0 { set(&[A]) } else { LabelSet::EMPTY }))
        .collect();
    let refs: Vec<(&[f64], LabelSet)> = rows.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
    let t = toy(&refs);
    let learner = ConstantLearner(set(&[A]));
    let a = cross_validate(&t, &learner, 2, Protocol::Kfold, 17).unwrap();
    let b = cross_validate(&t, &learner, 2, Protocol::Kfold, 17).unwrap();
    assert_eq!(a, b);
    // Over all rows: precision 4/8, recall 1, accuracy on the bit 0.5.
    let pooled_tp: f64 = a.folds.iter().map(|m| m.label(A).precision * 4.0).sum();
    assert_eq!(pooled_tp, 4.0);
    let hamming: f64 = a.folds.iter().map(|m| m.hamming_loss).sum::<f64>() / 2.0;
    assert!((hamming - 0.05).abs() < 1e-12, "one wrong bit in ten per wrong row");
    assert_eq!(a.mean.label(A).recall, 1.0);
}

#[test]
fn holdout_protocol_mirrors_ten_by_seventy_thirty() {
    let t = synthetic::independent(50, 2);
    let r = cross_validate(
        &t,
        &ConstantLearner(LabelSet::EMPTY),
        10,
        Protocol::Holdout { train_fraction: 0.7 },
        1,
    )
    .unwrap();
    assert_eq!(r.folds.len(), 10);
    assert!(r.fold_sizes.iter().all(|s| *s == (35, 15)));
    assert_eq!(r.protocol.name(), "holdout");
}

#[test]
fn search_grid_has_all_configurations() {
    let grid = search_grid(0);
    assert_eq!(grid.len(), 44);
    let mut ids: Vec<String> = grid.iter().map(ModelConfig::id).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 44);
    assert!(ids.contains(&"eps-tree-p2-m5-t0.6".to_string()));
}

#[test]
fn search_budget_and_determinism() {
    let t = synthetic::correlated(60, 8);
    let one = model_search(&t, 1, 5).unwrap();
    assert_eq!(one.leaderboard.len(), 1);
    assert_eq!(one.best, one.leaderboard[0].config);
    let a = model_search(&t, 6, 5).unwrap();
    let b = model_search(&t, 6, 5).unwrap();
    assert_eq!(a, b);
    assert!(a
        .leaderboard
        .windows(2)
        .all(|w| w[0].macro_f1 > w[1].macro_f1
            || (w[0].macro_f1 == w[1].macro_f1 && w[0].config_id < w[1].config_id)));
}

#[test]
fn search_prefers_set_based_learners_on_correlated_labels() {
    let t = synthetic::correlated(240, 21);
    let r = model_search(&t, 44, 21).unwrap();
    assert_ne!(r.best.kind, ModelKind::BinaryRelevance, "{:?}", &r.leaderboard[..3]);
}

#[test]
fn eps_exploits_label_correlation() {
    let (eps, br) = average_scores(synthetic::correlated);
    println!("correlated: eps {eps:.4} br {br:.4}");
    assert!(eps - br >= 0.05, "eps {eps:.3} br {br:.3}");
}

#[test]
fn eps_matches_br_on_independent_labels() {
    let (eps, br) = average_scores(synthetic::independent);
    println!("independent: eps {eps:.4} br {br:.4}");
    assert!((eps - br).abs() <= 0.05, "eps {eps:.3} br {br:.3}");
}

#[test]
fn correlated_generator_couples_source_and_sink() {
    let t = synthetic::correlated(300, 0);
    assert!(t.rows.iter().all(|(_, l)| l.contains(A) == l.contains(B)));
    let classes: std::collections::BTreeSet<LabelSet> = t.labels().into_iter().collect();
    assert_eq!(classes.len(), 6);
}
