//! Multi-label learning over feature vectors: Binary Relevance, Pruned Sets
//! and Ensembles of Pruned Sets on logistic-regression or decision-tree base
//! learners, with metrics, cross-validation and a bounded model search.

mod base;
mod cv;
mod logistic;
mod metrics;
mod multilabel;
mod prune;
mod search;
pub mod synthetic;
mod transform;
mod tree;

use thiserror::Error;

use crate::features::{FeatureSchema, FeatureVector};
use crate::labels::LabelSet;

pub use base::{BaseLearner, BinaryModel};
pub use cv::{cross_validate, CvReport, Learner, Predictor, Protocol};
pub use logistic::{logistic_loss_and_gradient, train_logistic, LogisticFit, LogisticParams};
pub use metrics::{evaluate_metrics, f1_score, LabelMetrics, Metrics};
pub use multilabel::{
    predict_labels, train, train_binary_relevance, train_ensemble_pruned_sets,
    train_pruned_sets, EnsembleParams, ModelBody, ModelConfig, ModelKind, MultiLabelModel,
    Prediction, PrunedSetsModel, MODEL_FORMAT_VERSION,
};
pub use prune::{class_id, prune_label_sets, PruneResult};
pub use search::{model_search, search_grid, LeaderboardEntry, SearchResult};
pub use transform::Transform;
pub use tree::{train_tree, TreeNode, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("training data is empty")]
    EmptyTraining,
    #[error("{0} rows and {1} targets")]
    TargetMismatch(usize, usize),
    #[error("no label set occurs more than {p} time(s); lower the pruning threshold")]
    EmptyAfterPruning { p: usize },
    #[error("every ensemble member failed: {0}")]
    NoMembers(String),
    #[error("feature vector does not match the model: {0}")]
    SchemaMismatch(String),
    #[error("{pred} predictions for {gold} gold label sets")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("metrics need at least one instance")]
    NoInstances,
    #[error("{rows} rows are too few for {k} folds")]
    TooFewRows { rows: usize, k: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Labelled feature vectors sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    pub schema: FeatureSchema,
    pub rows: Vec<(FeatureVector, LabelSet)>,
}

impl TrainingMatrix {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<(FeatureVector, LabelSet)>,
    ) -> Result<TrainingMatrix, MlError> {
        for (i, (v, _)) in rows.iter().enumerate() {
            schema
                .check(v)
                .map_err(|e| MlError::SchemaMismatch(format!("row {i}: {e}")))?;
        }
        Ok(TrainingMatrix { schema, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<LabelSet> {
        self.rows.iter().map(|(_, l)| *l).collect()
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> TrainingMatrix {
        TrainingMatrix {
            schema: self.schema.clone(),
            rows: indices.iter().map(|i| self.rows[*i].clone()).collect(),
        }
    }
}
