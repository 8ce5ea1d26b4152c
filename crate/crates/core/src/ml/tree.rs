//! CART-style binary decision tree with Gini splits.

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_leaf: 3,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), MlError> {
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(MlError::InvalidConfig(
                "max_depth and min_leaf must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        p: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Taken when the feature value is `<= threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { p } => *p,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

pub fn train_tree(x: &[Vec<f64>], y: &[f64], p: &TreeParams) -> Result<TreeNode, MlError> {
    p.validate()?;
    if x.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    if x.len() != y.len() {
        return Err(MlError::TargetMismatch(x.len(), y.len()));
    }
    let idx: Vec<usize> = (0..x.len()).collect();
    Ok(grow(x, y, &idx, p, 0))
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let q = pos / n;
    2.0 * q * (1.0 - q)
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: &[usize], p: &TreeParams, depth: usize) -> TreeNode {
    let n = idx.len() as f64;
    let pos: f64 = idx.iter().map(|i| y[*i]).sum();
    let leaf = TreeNode::Leaf { p: pos / n };
    if depth >= p.max_depth || pos == 0.0 || pos == n || idx.len() < 2 * p.min_leaf {
        return leaf;
    }
    let parent = gini(pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let d = x[idx[0]].len();
    let mut order = idx.to_vec();
    #[allow(clippy::needless_range_loop)]
    for f in 0..d {
        order.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]).then(a.cmp(b)));
        let mut left_pos = 0.0;
        for k in 0..order.len() - 1 {
            left_pos += y[order[k]];
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            let left_n = k + 1;
            if lo == hi || left_n < p.min_leaf || order.len() - left_n < p.min_leaf {
                continue;
            }
            let ln = left_n as f64;
            let rn = n - ln;
            let impurity = (ln * gini(left_pos, ln) + rn * gini(pos - left_pos, rn)) / n;
            let gain = parent - impurity;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, (lo + hi) / 2.0));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| x[**i][feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(x, y, &l, p, depth + 1)),
        right: Box::new(grow(x, y, &r, p, depth + 1)),
    }
}
