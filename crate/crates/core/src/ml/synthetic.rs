//! Synthetic multi-label data for comparing learners.
//!
//! [`correlated`] places six clusters on a circle, each carrying a distinct
//! label set in which `sink` is present exactly when `source` is. Every
//! single label covers non-adjacent clusters, so no single linear boundary
//! separates it, while every label set is one cluster. [`independent`] draws
//! three labels independently, each decided by the sign of its own feature.
//! Both append standard-normal noise features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::TrainingMatrix;
use crate::features::{FeatureEntry, FeatureKind, FeatureSchema, FeatureVector};
use crate::labels::{Label, LabelSet};

pub const NOISE_FEATURES: usize = 8;
/// Numeric cells must be non-negative, so every synthetic value is shifted.
const OFFSET: f64 = 10.0;

pub fn schema(informative: usize) -> FeatureSchema {
    FeatureSchema {
        version: format!("synthetic-{informative}+{NOISE_FEATURES}"),
        entries: (0..informative + NOISE_FEATURES)
            .map(|i| FeatureEntry {
                id: format!("x{i}"),
                kind: FeatureKind::Numeric,
                categories: None,
                extension: false,
            })
            .collect(),
    }
}

fn vector(schema: &FeatureSchema, mut values: Vec<f64>, rng: &mut ChaCha8Rng) -> FeatureVector {
    for _ in 0..NOISE_FEATURES {
        let z: f64 = StandardNormal.sample(rng);
        values.push(z);
    }
    FeatureVector {
        schema_version: schema.version.clone(),
        values: values.into_iter().map(|v| (v + OFFSET).max(0.0)).collect(),
    }
}

/// The label set of each cluster, in angular order.
pub fn cluster_label_sets() -> [LabelSet; 6] {
    use Label::*;
    let s = |ls: &[Label]| ls.iter().copied().collect::<LabelSet>();
    [
        s(&[Source, Sink, Sanitizer]),
        s(&[Cwe89]),
        s(&[Source, Sink]),
        s(&[Sanitizer, Cwe89]),
        s(&[Source, Sink, Cwe89]),
        s(&[]),
    ]
}

pub fn correlated(n: usize, seed: u64) -> TrainingMatrix {
    let schema = schema(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, 0.4).expect("valid normal");
    let sets = cluster_label_sets();
    let rows = (0..n)
        .map(|_| {
            let k = rng.gen_range(0..sets.len());
            let angle = std::f64::consts::TAU * k as f64 / sets.len() as f64;
            let x = 4.0 * angle.cos() + spread.sample(&mut rng);
            let y = 4.0 * angle.sin() + spread.sample(&mut rng);
            (vector(&schema, vec![x, y], &mut rng), sets[k])
        })
        .collect();
    TrainingMatrix { schema, rows }
}

pub const INDEPENDENT_LABELS: [Label; 3] = [Label::Source, Label::Sink, Label::Sanitizer];

pub fn independent(n: usize, seed: u64) -> TrainingMatrix {
    let schema = schema(INDEPENDENT_LABELS.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut labels = LabelSet::EMPTY;
            let mut values = Vec::new();
            for l in INDEPENDENT_LABELS {
                let on = rng.gen_bool(0.5);
                let z: f64 = StandardNormal.sample(&mut rng);
                let magnitude = 1.0 + z.abs();
                values.push(if on { magnitude } else { -magnitude });
                if on {
                    labels.insert(l);
                }
            }
            (vector(&schema, values, &mut rng), labels)
        })
        .collect();
    TrainingMatrix { schema, rows }
}
