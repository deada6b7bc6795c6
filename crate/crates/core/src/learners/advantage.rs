use crate::error::{Error, Result};

use super::{BaselineMap, EpisodeBatch, StepRecord, ADVANTAGE_EPS};

/// Reward-to-go: `R_t = sum of rewards from t to the end of the episode`.
pub fn returns(rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc += r;
        out[t] = acc;
    }
    out
}

/// Returns standardized across episodes at each fixed timestep (population std).
pub fn advantage_sim(batch: &EpisodeBatch) -> Result<Vec<Vec<f64>>> {
    if batch.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "cross-episode standardization needs at least 2 episodes, got {}",
            batch.len()
        )));
    }
    let all: Vec<Vec<f64>> = batch.episodes().map(|e| returns(&e.rewards())).collect();
    let horizon = all.iter().map(Vec::len).max().unwrap_or(0);
    let mut out: Vec<Vec<f64>> = all.iter().map(|r| vec![0.0; r.len()]).collect();
    for t in 0..horizon {
        let column: Vec<f64> = all.iter().filter_map(|r| r.get(t).copied()).collect();
        let n = column.len() as f64;
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let denom = var.sqrt() + ADVANTAGE_EPS;
        for (ep, r) in all.iter().enumerate() {
            if let Some(&value) = r.get(t) {
                out[ep][t] = (value - mean) / denom;
            }
        }
    }
    Ok(out)
}

/// Unnormalized single-episode advantage used before a window holds two
/// episodes: `R_t` minus the mean of the episode's returns.
pub fn advantage_single(steps: &[StepRecord]) -> Vec<f64> {
    let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
    let r = returns(&rewards);
    if r.is_empty() {
        return r;
    }
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.into_iter().map(|x| x - mean).collect()
}

/// `(R_t - W_v·b_t) / (RMS of those residuals over the episode + eps)`.
pub fn advantage_real(steps: &[StepRecord], baseline: &BaselineMap) -> Vec<f64> {
    let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
    let residuals: Vec<f64> = returns(&rewards)
        .iter()
        .zip(steps)
        .map(|(r, s)| r - baseline.predict(&s.basis))
        .collect();
    if residuals.is_empty() {
        return residuals;
    }
    let rms = (residuals.iter().map(|x| x * x).sum::<f64>() / residuals.len() as f64).sqrt();
    residuals
        .iter()
        .map(|x| x / (rms + ADVANTAGE_EPS))
        .collect()
}
