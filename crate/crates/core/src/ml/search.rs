//! Bounded deterministic search over model configurations.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::base::BaseLearner;
use super::cv::{Learner, Predictor};
use super::logistic::LogisticParams;
use super::metrics::evaluate_metrics;
use super::multilabel::{ModelConfig, ModelKind};
use super::tree::TreeParams;
use super::{MlError, TrainingMatrix};

pub const SEARCH_TRAIN_FRACTION: f64 = 0.7;

/// BR, PS and EPS over both base learners with p ∈ {0,1,2}, m ∈ {5,10} and
/// t ∈ {0.4,0.5,0.6}: 44 configurations in a fixed order.
pub fn search_grid(seed: u64) -> Vec<ModelConfig> {
    let bases = [
        BaseLearner::LogisticRegression(LogisticParams::default()),
        BaseLearner::DecisionTree(TreeParams::default()),
    ];
    let mut out = Vec::new();
    for base in bases {
        let c = ModelConfig {
            base,
            seed,
            ..ModelConfig::default()
        };
        out.push(ModelConfig {
            kind: ModelKind::BinaryRelevance,
            ..c
        });
        for prune in [0, 1, 2] {
            out.push(ModelConfig {
                kind: ModelKind::PrunedSets,
                prune,
                ..c
            });
            for members in [5, 10] {
                for threshold in [0.4, 0.5, 0.6] {
                    out.push(ModelConfig {
                        kind: ModelKind::EnsemblePrunedSets,
                        prune,
                        members,
                        threshold,
                        ..c
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub config_id: String,
    pub config: ModelConfig,
    /// Macro-F1 on the held-out split; 0 when training failed.
    pub macro_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ModelConfig,
    /// Best score first; ties by configuration id.
    pub leaderboard: Vec<LeaderboardEntry>,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Scores up to `budget` grid configurations by macro-F1 on one seeded 70:30
/// split. With a budget below the grid size, a seeded sample of the grid is
/// evaluated.
pub fn model_search(t: &TrainingMatrix, budget: usize, seed: u64) -> Result<SearchResult, MlError> {
    if budget == 0 {
        return Err(MlError::InvalidConfig("search budget must be >= 1".into()));
    }
    if t.len() < 2 {
        return Err(MlError::TooFewRows { rows: t.len(), k: 2 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.shuffle(&mut rng);
    let cut = crate::dataset::train_size(t.len(), SEARCH_TRAIN_FRACTION).min(t.len() - 1);
    let train = t.subset(&order[..cut]);
    let test = t.subset(&order[cut..]);

    let mut grid = search_grid(seed);
    if budget < grid.len() {
        grid.shuffle(&mut rng);
        grid.truncate(budget);
    }
    let mut leaderboard: Vec<LeaderboardEntry> = grid
        .par_iter()
        .map(|config| {
            let scored = config.fit(&train).and_then(|m| {
                let pred = test
                    .rows
                    .iter()
                    .map(|(x, _)| m.predict_set(x))
                    .collect::<Result<Vec<_>, _>>()?;
                evaluate_metrics(&pred, &test.labels())
            });
            let (macro_f1, error) = match scored {
                Ok(metrics) => (metrics.macro_f1, None),
                Err(e) => (0.0, Some(e.to_string())),
            };
            LeaderboardEntry {
                config_id: config.id(),
                config: *config,
                macro_f1,
                error,
            }
        })
        .collect();
    leaderboard.sort_by(|a, b| {
        b.macro_f1
            .total_cmp(&a.macro_f1)
            .then_with(|| a.config_id.cmp(&b.config_id))
    });
    Ok(SearchResult {
        best: leaderboard[0].config,
        leaderboard,
        train_rows: train.len(),
        test_rows: test.len(),
    })
}
