//! L2-regularised logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.5,
            l2: 1e-3,
            epochs: 300,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<(), MlError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MlError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(MlError::InvalidConfig("l2 must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(MlError::InvalidConfig("epochs must be > 0".into()));
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `l2/2 · |w|²` and its gradient. `params` holds the
/// weights followed by the bias; the bias is not regularised.
pub fn logistic_loss_and_gradient(
    params: &[f64],
    x: &[Vec<f64>],
    y: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    let n = x.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (row, target) in x.iter().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
        loss += softplus(z) - target * z;
        let r = sigmoid(z) - target;
        for (g, a) in grad[..d].iter_mut().zip(row) {
            *g += r * a;
        }
        grad[d] += r;
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in grad[..d].iter_mut().zip(w) {
        *g += l2 * v;
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Training loss before the first step and after every accepted step.
    pub losses: Vec<f64>,
}

/// Gradient descent from zero weights. A step that would raise the loss is
/// retried with half the step size, so the recorded losses never increase.
/// Stops early once the loss improves by less than 1e-9 relatively.
pub fn train_logistic(
    x: &[Vec<f64>],
    y: &[f64],
    p: &LogisticParams,
) -> Result<LogisticFit, MlError> {
    p.validate()?;
    if x.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    if x.len() != y.len() {
        return Err(MlError::TargetMismatch(x.len(), y.len()));
    }
    let d = x[0].len();
    let mut params = vec![0.0; d + 1];
    let (mut loss, mut grad) = logistic_loss_and_gradient(&params, x, y, p.l2);
    let mut losses = vec![loss];
    let mut lr = p.learning_rate;
    for _ in 0..p.epochs {
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
            let (l, g) = logistic_loss_and_gradient(&trial, x, y, p.l2);
            if l <= loss {
                let improvement = (loss - l) / loss.abs().max(1e-12);
                params = trial;
                loss = l;
                grad = g;
                losses.push(loss);
                accepted = improvement >= 1e-9;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let bias = params.pop().unwrap_or(0.0);
    Ok(LogisticFit {
        weights: params,
        bias,
        losses,
    })
}
