//! Reference computations shared by the ML tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srm_core::labels::LabelSet;
use srm_core::ml::*;

pub fn holdout_macro_f1(config: &ModelConfig, t: &TrainingMatrix, seed: u64) -> f64 {
    cross_validate(t, config, 1, Protocol::Holdout { train_fraction: 0.7 }, seed)
        .unwrap()
        .mean
        .macro_f1
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, f64) {
    let n = rng.gen_range(2..12);
    let d = rng.gen_range(1..6);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.5))).collect();
    let params: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.5..1.5)).collect();
    (params, x, y, rng.gen_range(0.0..0.5))
}

/// Largest relative error between the analytic gradient and central
/// differences over 100 random problems.
pub fn max_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (params, x, y, l2) = random_problem(&mut rng);
        let (_, grad) = logistic_loss_and_gradient(&params, &x, &y, l2);
        for j in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (logistic_loss_and_gradient(&up, &x, &y, l2).0
                - logistic_loss_and_gradient(&down, &x, &y, l2).0)
                / (2.0 * h);
            let err = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    worst
}

fn brute_force_prune(rows: &[LabelSet], p: usize) -> (Vec<LabelSet>, BTreeMap<LabelSet, Vec<LabelSet>>) {
    let mut frequent = Vec::new();
    let mut infrequent = Vec::new();
    for bits in 0u16..1024 {
        let s = LabelSet::from_bits(bits);
        let count = rows.iter().filter(|r| **r == s).count();
        if count > p {
            frequent.push(s);
        } else if count > 0 {
            infrequent.push(s);
        }
    }
    let mut map = BTreeMap::new();
    for s in infrequent {
        // every subset of s, by enumerating sub-masks
        let mut subs = Vec::new();
        let mut m = s.bits();
        loop {
            m = m.wrapping_sub(1) & s.bits();
            let sub = LabelSet::from_bits(m);
            if frequent.contains(&sub) {
                subs.push(sub);
            }
            if m == 0 {
                break;
            }
        }
        let mut maximal: Vec<LabelSet> = subs
            .iter()
            .copied()
            .filter(|a| !subs.iter().any(|b| a != b && a.bits() & !b.bits() == 0))
            .collect();
        maximal.sort_by_key(|x| class_id(*x));
        map.insert(s, maximal);
    }
    frequent.sort_by_key(|x| class_id(*x));
    (frequent, map)
}

/// Every multiset of at most six label sets over three labels, under p = 0..=2.
pub fn exhaustive_prune_check() -> Result<usize, String> {
    let universe: Vec<LabelSet> = (0u16..8).map(LabelSet::from_bits).collect();
    let mut checked = 0;
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(ms) = stack.pop() {
        if !ms.is_empty() {
            let rows: Vec<LabelSet> = ms.iter().map(|i| universe[*i]).collect();
            for p in 0..=2 {
                let got = prune_label_sets(&rows, p);
                let (f, m) = brute_force_prune(&rows, p);
                if got.frequent != f || got.reassignment != m {
                    return Err(format!("rows {rows:?} p {p}: got {got:?}"));
                }
                checked += 1;
            }
        }
        if ms.len() < 6 {
            let from = ms.last().copied().unwrap_or(0);
            for i in from..universe.len() {
                let mut next = ms.clone();
                next.push(i);
                stack.push(next);
            }
        }
    }
    Ok(checked)
}

/// Mean EPS and BR macro-F1 over ten seeds of 300 instances.
pub fn average_scores(generator: fn(usize, u64) -> TrainingMatrix) -> (f64, f64) {
    let eps = ModelConfig::default();
    let br = ModelConfig {
        kind: ModelKind::BinaryRelevance,
        ..ModelConfig::default()
    };
    let (mut e, mut b) = (0.0, 0.0);
    for seed in 0..10 {
        let t = generator(300, seed);
        e += holdout_macro_f1(&ModelConfig { seed, ..eps }, &t, seed);
        b += holdout_macro_f1(&br, &t, seed);
    }
    (e / 10.0, b / 10.0)
}
