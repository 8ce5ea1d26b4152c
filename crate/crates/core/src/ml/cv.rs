//! Cross-validation under k-fold or repeated-holdout protocols.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_metrics, Metrics};
use super::multilabel::{predict_labels, train, ModelConfig, MultiLabelModel};
use super::{MlError, TrainingMatrix};
use crate::features::FeatureVector;
use crate::labels::LabelSet;

/// Something that can be fitted to a training matrix.
pub trait Learner: Sync {
    type Model: Predictor + Send;
    fn fit(&self, t: &TrainingMatrix) -> Result<Self::Model, MlError>;
}

pub trait Predictor {
    fn predict_set(&self, x: &FeatureVector) -> Result<LabelSet, MlError>;
}

impl Learner for ModelConfig {
    type Model = MultiLabelModel;

    fn fit(&self, t: &TrainingMatrix) -> Result<MultiLabelModel, MlError> {
        train(self, t)
    }
}

impl Predictor for MultiLabelModel {
    fn predict_set(&self, x: &FeatureVector) -> Result<LabelSet, MlError> {
        Ok(predict_labels(self, x)?.labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    /// Every row is tested exactly once across k folds.
    Kfold,
    /// k independent seeded splits with the given training share.
    Holdout { train_fraction: f64 },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Kfold => "kfold",
            Protocol::Holdout { .. } => "holdout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub protocol: Protocol,
    pub k: usize,
    pub seed: u64,
    /// (training rows, test rows) per fold.
    pub fold_sizes: Vec<(usize, usize)>,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
    /// Population standard deviation across folds.
    pub stdev: Metrics,
}

/// (train indices, test indices) per fold.
fn splits(n: usize, k: usize, protocol: Protocol, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match protocol {
        Protocol::Kfold => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut out = Vec::with_capacity(k);
            let mut start = 0;
            for f in 0..k {
                let size = n / k + usize::from(f < n % k);
                let test: Vec<usize> = order[start..start + size].to_vec();
                let train: Vec<usize> = order[..start]
                    .iter()
                    .chain(&order[start + size..])
                    .copied()
                    .collect();
                out.push((train, test));
                start += size;
            }
            out
        }
        Protocol::Holdout { train_fraction } => (0..k)
            .map(|_| {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let cut = crate::dataset::train_size(n, train_fraction);
                (order[..cut].to_vec(), order[cut..].to_vec())
            })
            .collect(),
    }
}

pub fn cross_validate<L: Learner>(
    t: &TrainingMatrix,
    learner: &L,
    k: usize,
    protocol: Protocol,
    seed: u64,
) -> Result<CvReport, MlError> {
    if k < 2 && protocol == Protocol::Kfold {
        return Err(MlError::InvalidConfig("k-fold needs k >= 2".into()));
    }
    if k == 0 {
        return Err(MlError::InvalidConfig("k must be >= 1".into()));
    }
    if t.len() < k.max(2) {
        return Err(MlError::TooFewRows { rows: t.len(), k });
    }
    let folds = splits(t.len(), k, protocol, seed);
    if folds.iter().any(|(tr, te)| tr.is_empty() || te.is_empty()) {
        return Err(MlError::TooFewRows { rows: t.len(), k });
    }
    let folds_metrics = folds
        .par_iter()
        .map(|(tr, te)| {
            let model = learner.fit(&t.subset(tr))?;
            let mut pred = Vec::with_capacity(te.len());
            let mut gold = Vec::with_capacity(te.len());
            for i in te {
                let (x, y) = &t.rows[*i];
                pred.push(model.predict_set(x)?);
                gold.push(*y);
            }
            evaluate_metrics(&pred, &gold)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let vecs: Vec<Vec<f64>> = folds_metrics.iter().map(Metrics::to_vec).collect();
    let n = vecs.len() as f64;
    let width = vecs[0].len();
    let mean: Vec<f64> = (0..width)
        .map(|j| vecs.iter().map(|v| v[j]).sum::<f64>() / n)
        .collect();
    let stdev: Vec<f64> = (0..width)
        .map(|j| {
            let var = vecs.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / n;
            var.sqrt()
        })
        .collect();
    Ok(CvReport {
        protocol,
        k,
        seed,
        fold_sizes: folds.iter().map(|(a, b)| (a.len(), b.len())).collect(),
        folds: folds_metrics,
        mean: Metrics::from_vec(&mean),
        stdev: Metrics::from_vec(&stdev),
    })
}
