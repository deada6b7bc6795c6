use crate::error::{Error, Result};

use super::{returns, StepRecord};

/// Linear state-value estimate `W_v·b` over the features.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineMap {
    pub weights: Vec<f64>,
}

impl BaselineMap {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn predict(&self, basis: &[f64]) -> f64 {
        self.weights.iter().zip(basis).map(|(w, b)| w * b).sum()
    }
}

/// Mean squared error between returns and predictions over all steps of `episodes`.
pub fn baseline_loss(episodes: &[&[StepRecord]], baseline: &BaselineMap) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for steps in episodes {
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        for (r, s) in returns(&rewards).iter().zip(steps.iter()) {
            sum += (r - baseline.predict(&s.basis)).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Analytic gradient of [`baseline_loss`] with respect to the weights.
pub fn baseline_loss_gradient(episodes: &[&[StepRecord]], baseline: &BaselineMap) -> Vec<f64> {
    let mut grad = vec![0.0; baseline.weights.len()];
    let mut n = 0usize;
    for steps in episodes {
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        for (r, s) in returns(&rewards).iter().zip(steps.iter()) {
            let residual = r - baseline.predict(&s.basis);
            for (g, b) in grad.iter_mut().zip(&s.basis) {
                *g -= 2.0 * residual * b;
            }
            n += 1;
        }
    }
    if n > 0 {
        grad.iter_mut().for_each(|g| *g /= n as f64);
    }
    grad
}

/// One gradient-descent step on [`baseline_loss`].
pub fn baseline_update(
    episodes: &[&[StepRecord]],
    baseline: &BaselineMap,
    lr: f64,
) -> Result<BaselineMap> {
    if !(lr > 0.0) {
        return Err(Error::Config(format!(
            "baseline learning rate must be > 0, got {lr}"
        )));
    }
    let grad = baseline_loss_gradient(episodes, baseline);
    Ok(BaselineMap::new(
        baseline
            .weights
            .iter()
            .zip(&grad)
            .map(|(w, g)| w - lr * g)
            .collect(),
    ))
}
