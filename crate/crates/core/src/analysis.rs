//! Post-hoc analyses over recorded traces and runs.

use rayon::prelude::*;

use crate::controller::{ControllerKind, Rhythm};
use crate::env::{EnvConfig, JOINTS_PER_LEG};
use crate::error::{Error, Result};
use crate::experiment::{batch_advantages, evaluate_policy, Schedule};
use crate::learners::{agol_update, pgpe_update, BaselineMap, Episode, EpisodeBatch};
use crate::matrix::Matrix;
use crate::sme::{argmax, cycle_starts};

/// Co-activation share reported for a fully connected network baseline;
/// quoted, not recomputed.
pub const FCNN_REFERENCE_INTERFERENCE: f64 = 0.17;

/// Fraction of each feature's per-cycle maximum that counts as active.
pub const ACTIVE_FRACTION: f64 = 0.01;

/// `map[i][j]` is true when features `i` and `j` are adjacent on a ring.
pub fn ring_neighbors(n: usize) -> Vec<Vec<bool>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| i == j || (i + 1) % n == j || (j + 1) % n == i)
                .collect()
        })
        .collect()
}

/// Per-step non-neighbor co-activation flags over the whole cycles of
/// `trace`: a step is flagged when some non-neighbor pair of features both
/// exceed [`ACTIVE_FRACTION`] of their own maximum within the cycle.
///
/// Cycles are delimited by the argmax entering feature 0. The trace is cut
/// to whole cycles; a trace whose argmax never changes is stationary and
/// is evaluated as a single window. Returns the first step covered and the
/// flags from there on.
pub fn non_neighbor_overlap(trace: &[Vec<f64>], neighbors: &[Vec<bool>]) -> Result<(usize, Vec<bool>)> {
    let n = neighbors.len();
    if let Some(bad) = trace.iter().find(|row| row.len() != n) {
        return Err(Error::Dimension {
            context: "interference trace row",
            expected: n,
            got: bad.len(),
        });
    }
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    let winners: Vec<usize> = trace.iter().map(|b| argmax(b)).collect();
    let windows: Vec<(usize, usize)> = if winners.iter().all(|&w| w == winners[0]) {
        vec![(0, trace.len())]
    } else {
        let starts = cycle_starts(winners.iter().copied());
        if starts.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "trace of {} steps covers less than one full cycle",
                trace.len()
            )));
        }
        starts.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let mut flags = Vec::new();
    for &(a, b) in &windows {
        let cycle = &trace[a..b];
        let max: Vec<f64> = (0..n)
            .map(|k| cycle.iter().map(|row| row[k]).fold(0.0, f64::max))
            .collect();
        for row in cycle {
            let active: Vec<bool> = (0..n)
                .map(|k| max[k] > 0.0 && row[k] > ACTIVE_FRACTION * max[k])
                .collect();
            flags.push((0..n).any(|i| (i + 1..n).any(|j| !neighbors[i][j] && active[i] && active[j])));
        }
    }
    Ok((windows[0].0, flags))
}

/// Share of flagged steps from [`non_neighbor_overlap`].
pub fn interference_fraction(trace: &[Vec<f64>], neighbors: &[Vec<bool>]) -> Result<f64> {
    let (_, flags) = non_neighbor_overlap(trace, neighbors)?;
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

/// Feature trace of a default controller after `warmup` steps.
pub fn controller_trace(kind: ControllerKind, warmup: usize, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut rhythm = Rhythm::new(kind)?;
    for _ in 0..warmup {
        rhythm.advance();
    }
    Ok(rhythm.feature_trace(steps))
}

/// `direction / ‖direction‖∞`, or zeros for a zero direction.
pub fn normalize_direction(direction: &Matrix) -> Matrix {
    let norm = direction.max_abs();
    if norm > 0.0 {
        direction.map(|d| d / norm)
    } else {
        direction.clone()
    }
}

/// Noise-free episodic reward at `theta + s · direction/‖direction‖∞` for
/// every `s` in `scales`.
pub fn reward_landscape(
    theta: &Matrix,
    direction: &Matrix,
    controller: ControllerKind,
    env: &EnvConfig,
    scales: &[f64],
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    theta.check_same_shape(direction)?;
    let unit = normalize_direction(direction);
    scales
        .par_iter()
        .map(|&s| {
            let w = theta.zip_map(&unit, |t, d| t + s * d)?;
            Ok((s, evaluate_policy(controller, env, &w, steps)?))
        })
        .collect()
}

/// Scale with the highest reward; the first one on ties.
pub fn argmax_scale(landscape: &[(f64, f64)]) -> Option<f64> {
    landscape
        .iter()
        .fold(None, |best: Option<(f64, f64)>, &(s, r)| match best {
            Some((_, br)) if br >= r => best,
            _ => Some((s, r)),
        })
        .map(|(s, _)| s)
}

/// `lo:hi:step` inclusive grid, e.g. `-1:1:0.05` has 41 points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid '{spec}' is not lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// Update directions the gradient-weighted and plain rules take on one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDirections {
    pub theta: Matrix,
    pub agol: Matrix,
    pub pgpe: Matrix,
}

/// Unit-rate AGOL and PGPE steps on `batch`, taken at the parameters the
/// newest episode explored around.
pub fn update_directions(batch: &EpisodeBatch, schedule: Schedule, baseline: &BaselineMap) -> Result<UpdateDirections> {
    let last = batch
        .last()
        .ok_or_else(|| Error::InsufficientData("empty batch".into()))?;
    let theta = last.theta.clone();
    let adv = batch_advantages(schedule, batch, baseline)?;
    let step = |updated: Matrix| updated.zip_map(&theta, |a, b| a - b);
    Ok(UpdateDirections {
        agol: step(agol_update(batch, &theta, &adv, 1.0)?)?,
        pgpe: step(pgpe_update(batch, &theta, &adv, 1.0)?)?,
        theta,
    })
}

/// Trailing moving average over at most `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// One row of the exploration trace: episode and moving averages of the mean
/// exploration std over swing and lift joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationRow {
    pub episode: usize,
    pub swing: f64,
    pub lift: f64,
}

fn group_mean(sigma: &Matrix, joint: usize) -> f64 {
    let rows: Vec<usize> = (0..sigma.rows()).filter(|r| r % JOINTS_PER_LEG == joint).collect();
    let sum: f64 = rows.iter().flat_map(|&r| sigma.row(r).iter()).sum();
    sum / (rows.len() * sigma.cols()) as f64
}

pub fn exploration_trace(sigma_history: &[Matrix], window: usize) -> Result<Vec<ExplorationRow>> {
    if sigma_history.is_empty() {
        return Err(Error::InsufficientData("no exploration snapshots recorded".into()));
    }
    let swing: Vec<f64> = sigma_history.iter().map(|s| group_mean(s, 0)).collect();
    let lift: Vec<f64> = sigma_history.iter().map(|s| group_mean(s, 1)).collect();
    let (swing, lift) = (moving_average(&swing, window), moving_average(&lift, window));
    Ok((0..sigma_history.len())
        .map(|e| ExplorationRow {
            episode: e,
            swing: swing[e],
            lift: lift[e],
        })
        .collect())
}

/// Executed command of one joint at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub episode: usize,
    pub t: usize,
    pub joint: usize,
    pub value: f64,
}

pub fn explored_joint_trajectories(episodes: &[Episode]) -> Vec<TrajectoryPoint> {
    let mut out = Vec::new();
    for (e, ep) in episodes.iter().enumerate() {
        for (t, step) in ep.steps.iter().enumerate() {
            for (joint, &a) in step.action.iter().enumerate() {
                out.push(TrajectoryPoint {
                    episode: e,
                    t,
                    joint,
                    value: a.clamp(-ep.alpha_max, ep.alpha_max),
                });
            }
        }
    }
    out
}

/// RMS of step-to-step command changes over all joints and episodes.
pub fn trajectory_jitter(episodes: &[Episode]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for ep in episodes {
        for pair in ep.steps.windows(2) {
            for (a, b) in pair[0].action.iter().zip(&pair[1].action) {
                let (a, b) = (a.clamp(-ep.alpha_max, ep.alpha_max), b.clamp(-ep.alpha_max, ep.alpha_max));
                sum += (b - a) * (b - a);
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
