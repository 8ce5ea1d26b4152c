//! Pluggable binary base learners.

use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, train_logistic, LogisticParams};
use super::tree::{train_tree, TreeNode, TreeParams};
use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseLearner {
    LogisticRegression(LogisticParams),
    DecisionTree(TreeParams),
}

impl Default for BaseLearner {
    fn default() -> Self {
        BaseLearner::LogisticRegression(LogisticParams::default())
    }
}

impl BaseLearner {
    /// Short name used in configuration ids.
    pub fn short_name(&self) -> &'static str {
        match self {
            BaseLearner::LogisticRegression(_) => "logistic",
            BaseLearner::DecisionTree(_) => "tree",
        }
    }

    pub fn validate(&self) -> Result<(), MlError> {
        match self {
            BaseLearner::LogisticRegression(p) => p.validate(),
            BaseLearner::DecisionTree(p) => p.validate(),
        }
    }

    /// Trains on 0/1 targets. A target with a single observed class gives a
    /// constant model at the observed positive rate.
    pub fn train(&self, x: &[Vec<f64>], y: &[f64]) -> Result<BinaryModel, MlError> {
        if x.is_empty() {
            return Err(MlError::EmptyTraining);
        }
        if x.len() != y.len() {
            return Err(MlError::TargetMismatch(x.len(), y.len()));
        }
        let pos = y.iter().filter(|v| **v > 0.5).count();
        if pos == 0 || pos == y.len() {
            return Ok(BinaryModel::Constant {
                p: pos as f64 / y.len() as f64,
            });
        }
        Ok(match self {
            BaseLearner::LogisticRegression(p) => {
                let fit = train_logistic(x, y, p)?;
                BinaryModel::Logistic {
                    weights: fit.weights,
                    bias: fit.bias,
                }
            }
            BaseLearner::DecisionTree(p) => BinaryModel::Tree {
                root: train_tree(x, y, p)?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryModel {
    Constant { p: f64 },
    Logistic { weights: Vec<f64>, bias: f64 },
    Tree { root: TreeNode },
}

impl BinaryModel {
    /// Probability of the positive class.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            BinaryModel::Constant { p } => *p,
            BinaryModel::Logistic { weights, bias } => {
                sigmoid(bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            }
            BinaryModel::Tree { root } => root.predict(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, BinaryModel::Constant { .. })
    }
}
