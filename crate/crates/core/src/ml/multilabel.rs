//! Binary Relevance, Pruned Sets and Ensembles of Pruned Sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::base::{BaseLearner, BinaryModel};
use super::prune::prune_label_sets;
use super::transform::Transform;
use super::{MlError, TrainingMatrix};
use crate::features::FeatureVector;
use crate::labels::{Label, LabelSet, LABEL_COUNT};

pub const MODEL_FORMAT_VERSION: &str = "ml-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BinaryRelevance,
    PrunedSets,
    EnsemblePrunedSets,
}

impl ModelKind {
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::BinaryRelevance => "br",
            ModelKind::PrunedSets => "ps",
            ModelKind::EnsemblePrunedSets => "eps",
        }
    }
}

/// Everything needed to train one multi-label model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub base: BaseLearner,
    /// Pruning threshold p: label sets must occur more than p times.
    pub prune: usize,
    /// Ensemble size m.
    pub members: usize,
    pub sample_fraction: f64,
    /// Vote threshold t.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::EnsemblePrunedSets,
            base: BaseLearner::default(),
            prune: 1,
            members: 10,
            sample_fraction: 0.63,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Stable id such as `eps-logistic-p1-m10-t0.5`; only the fields the kind
    /// uses appear.
    pub fn id(&self) -> String {
        let head = format!("{}-{}", self.kind.short_name(), self.base.short_name());
        match self.kind {
            ModelKind::BinaryRelevance => head,
            ModelKind::PrunedSets => format!("{head}-p{}", self.prune),
            ModelKind::EnsemblePrunedSets => format!(
                "{head}-p{}-m{}-t{}",
                self.prune, self.members, self.threshold
            ),
        }
    }

    pub fn ensemble(&self) -> EnsembleParams {
        EnsembleParams {
            prune: self.prune,
            members: self.members,
            sample_fraction: self.sample_fraction,
            threshold: self.threshold,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), MlError> {
        self.base.validate()?;
        if self.kind == ModelKind::EnsemblePrunedSets {
            self.ensemble().validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub prune: usize,
    pub members: usize,
    pub sample_fraction: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<(), MlError> {
        if self.members == 0 {
            return Err(MlError::InvalidConfig("ensemble needs m >= 1".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(MlError::InvalidConfig(
                "sample_fraction must be in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(MlError::InvalidConfig("threshold must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One Pruned Sets classifier: a one-vs-rest scorer per frequent label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedSetsModel {
    /// Ordered by class id.
    pub classes: Vec<LabelSet>,
    pub scorers: Vec<BinaryModel>,
}

impl PrunedSetsModel {
    /// The highest-scoring class; ties go to the smallest class id.
    pub fn predict(&self, x: &[f64]) -> LabelSet {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, s) in self.scorers.iter().enumerate() {
            let score = s.predict(x);
            if score > best_score {
                best = k;
                best_score = score;
            }
        }
        self.classes[best]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    BinaryRelevance { components: Vec<BinaryModel> },
    PrunedSets { model: PrunedSetsModel },
    EnsemblePrunedSets {
        members: Vec<PrunedSetsModel>,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelModel {
    pub format_version: String,
    pub config: ModelConfig,
    pub schema_version: String,
    pub transform: Transform,
    pub body: ModelBody,
    /// Notes from training, such as skipped ensemble members.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl MultiLabelModel {
    pub fn kind(&self) -> ModelKind {
        match self.body {
            ModelBody::BinaryRelevance { .. } => ModelKind::BinaryRelevance,
            ModelBody::PrunedSets { .. } => ModelKind::PrunedSets,
            ModelBody::EnsemblePrunedSets { .. } => ModelKind::EnsemblePrunedSets,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<MultiLabelModel, String> {
        let m: MultiLabelModel = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(format!(
                "model format `{}` is not `{MODEL_FORMAT_VERSION}`",
                m.format_version
            ));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub labels: LabelSet,
    /// Per-label score in taxonomy order.
    pub scores: [f64; LABEL_COUNT],
}

fn encode(t: &TrainingMatrix) -> (Transform, Vec<Vec<f64>>) {
    let transform = Transform::fit(&t.schema, t.rows.iter().map(|(v, _)| v));
    let x = t.rows.iter().map(|(v, _)| transform.apply(v)).collect();
    (transform, x)
}

fn model(config: ModelConfig, t: &TrainingMatrix, transform: Transform, body: ModelBody) -> MultiLabelModel {
    MultiLabelModel {
        format_version: MODEL_FORMAT_VERSION.into(),
        config,
        schema_version: t.schema.version.clone(),
        transform,
        body,
        diagnostics: Vec::new(),
    }
}

pub fn train_binary_relevance(
    t: &TrainingMatrix,
    base: &BaseLearner,
) -> Result<MultiLabelModel, MlError> {
    base.validate()?;
    if t.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    let (transform, x) = encode(t);
    let components = Label::ALL
        .par_iter()
        .map(|l| {
            let y: Vec<f64> = t
                .rows
                .iter()
                .map(|(_, s)| if s.contains(*l) { 1.0 } else { 0.0 })
                .collect();
            base.train(&x, &y)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let config = ModelConfig {
        kind: ModelKind::BinaryRelevance,
        base: *base,
        ..ModelConfig::default()
    };
    Ok(model(
        config,
        t,
        transform,
        ModelBody::BinaryRelevance { components },
    ))
}

/// Trains one PS classifier on already-encoded rows.
fn fit_pruned_sets(
    x: &[Vec<f64>],
    labels: &[LabelSet],
    base: &BaseLearner,
    p: usize,
) -> Result<PrunedSetsModel, MlError> {
    let pruned = prune_label_sets(labels, p);
    if pruned.frequent.is_empty() {
        return Err(MlError::EmptyAfterPruning { p });
    }
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut class_of: Vec<usize> = Vec::new();
    for (xi, s) in x.iter().zip(labels) {
        for c in pruned.classes_for(*s) {
            let k = pruned
                .frequent
                .iter()
                .position(|f| f == c)
                .expect("reassigned classes are frequent");
            rows.push(xi);
            class_of.push(k);
        }
    }
    let owned: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let scorers = (0..pruned.frequent.len())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = class_of
                .iter()
                .map(|c| if *c == k { 1.0 } else { 0.0 })
                .collect();
            base.train(&owned, &y)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PrunedSetsModel {
        classes: pruned.frequent,
        scorers,
    })
}

pub fn train_pruned_sets(
    t: &TrainingMatrix,
    base: &BaseLearner,
    p: usize,
) -> Result<MultiLabelModel, MlError> {
    base.validate()?;
    if t.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    let (transform, x) = encode(t);
    let ps = fit_pruned_sets(&x, &t.labels(), base, p)?;
    let config = ModelConfig {
        kind: ModelKind::PrunedSets,
        base: *base,
        prune: p,
        ..ModelConfig::default()
    };
    Ok(model(config, t, transform, ModelBody::PrunedSets { model: ps }))
}

/// Each member sees ⌈n·sample_fraction⌉ rows drawn without replacement from a
/// stream seeded by `params.seed`. Members that fail are skipped and noted in
/// the model diagnostics.
pub fn train_ensemble_pruned_sets(
    t: &TrainingMatrix,
    base: &BaseLearner,
    params: &EnsembleParams,
) -> Result<MultiLabelModel, MlError> {
    base.validate()?;
    params.validate()?;
    if t.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    let (transform, x) = encode(t);
    let labels = t.labels();
    let n = t.len();
    let k = crate::dataset::train_size(n, params.sample_fraction).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let member_seeds: Vec<u64> = (0..params.members).map(|_| rng.gen()).collect();
    let results: Vec<Result<PrunedSetsModel, MlError>> = member_seeds
        .par_iter()
        .map(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(*s);
            let mut idx = rand::seq::index::sample(&mut r, n, k).into_vec();
            idx.sort_unstable();
            let xs: Vec<Vec<f64>> = idx.iter().map(|i| x[*i].clone()).collect();
            let ls: Vec<LabelSet> = idx.iter().map(|i| labels[*i]).collect();
            fit_pruned_sets(&xs, &ls, base, params.prune)
        })
        .collect();
    let mut members = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => members.push(m),
            Err(e) => diagnostics.push(format!("ensemble member {i} skipped: {e}")),
        }
    }
    if members.is_empty() {
        return Err(MlError::NoMembers(diagnostics.join("; ")));
    }
    let config = ModelConfig {
        kind: ModelKind::EnsemblePrunedSets,
        base: *base,
        prune: params.prune,
        members: params.members,
        sample_fraction: params.sample_fraction,
        threshold: params.threshold,
        seed: params.seed,
    };
    let mut m = model(
        config,
        t,
        transform,
        ModelBody::EnsemblePrunedSets {
            members,
            threshold: params.threshold,
        },
    );
    m.diagnostics = diagnostics;
    Ok(m)
}

/// Trains the model a configuration describes.
pub fn train(config: &ModelConfig, t: &TrainingMatrix) -> Result<MultiLabelModel, MlError> {
    config.validate()?;
    let mut m = match config.kind {
        ModelKind::BinaryRelevance => train_binary_relevance(t, &config.base)?,
        ModelKind::PrunedSets => train_pruned_sets(t, &config.base, config.prune)?,
        ModelKind::EnsemblePrunedSets => {
            train_ensemble_pruned_sets(t, &config.base, &config.ensemble())?
        }
    };
    m.config = *config;
    Ok(m)
}

/// BR: label on iff its probability is at least 0.5. PS: the predicted set,
/// scored 1/0. EPS: per-label vote fraction; on iff the fraction is at least
/// the threshold and at least one member voted for it.
pub fn predict_labels(m: &MultiLabelModel, x: &FeatureVector) -> Result<Prediction, MlError> {
    if x.schema_version != m.schema_version {
        return Err(MlError::SchemaMismatch(format!(
            "vector schema `{}`, model schema `{}`",
            x.schema_version, m.schema_version
        )));
    }
    if x.values.len() != m.transform.kinds.len() {
        return Err(MlError::SchemaMismatch(format!(
            "{} cells, model expects {}",
            x.values.len(),
            m.transform.kinds.len()
        )));
    }
    let enc = m.transform.apply(x);
    let mut scores = [0.0; LABEL_COUNT];
    let labels = match &m.body {
        ModelBody::BinaryRelevance { components } => {
            for (s, c) in scores.iter_mut().zip(components) {
                *s = c.predict(&enc);
            }
            Label::ALL
                .into_iter()
                .filter(|l| scores[l.index()] >= 0.5)
                .collect()
        }
        ModelBody::PrunedSets { model } => {
            let set = model.predict(&enc);
            for l in set.iter() {
                scores[l.index()] = 1.0;
            }
            set
        }
        ModelBody::EnsemblePrunedSets { members, threshold } => {
            for member in members {
                for l in member.predict(&enc).iter() {
                    scores[l.index()] += 1.0;
                }
            }
            for s in &mut scores {
                *s /= members.len() as f64;
            }
            Label::ALL
                .into_iter()
                .filter(|l| {
                    let f = scores[l.index()];
                    f > 0.0 && f >= *threshold
                })
                .collect()
        }
    };
    Ok(Prediction { labels, scores })
}
