//! Policy-search learners over the output map `W` (rows: joints, columns:
//! features): action-space PG/PPO and parameter-space PIBB/PGPE/AGL/AGOL.

mod advantage;
mod baseline;
mod checkpoint;
mod updates;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use advantage::{advantage_real, advantage_sim, advantage_single, returns};
pub use baseline::{baseline_loss, baseline_loss_gradient, baseline_update, BaselineMap};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use updates::{
    action_gradient_weight, agol_sigma_update, agol_update, gaussian_log_density,
    gradient_weighted_sigma_update, gradient_weighted_update, pg_gradient, pg_update,
    pgpe_sigma_update, pgpe_update, pibb_update, ppo_gradient, ppo_surrogate, ppo_update,
};

pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 1.0;
/// Episodes kept in the training window.
pub const BATCH_WINDOW: usize = 8;
/// Guard added to advantage denominators.
pub const ADVANTAGE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Pg,
    Ppo,
    Pibb,
    Pgpe,
    /// Gradient-weighted update on the batch schedule.
    Agl,
    /// Gradient-weighted update on the online schedule.
    Agol,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Pg,
        LearnerKind::Ppo,
        LearnerKind::Pibb,
        LearnerKind::Pgpe,
        LearnerKind::Agl,
        LearnerKind::Agol,
    ];

    pub fn exploration(&self) -> ExplorationMode {
        match self {
            LearnerKind::Pg | LearnerKind::Ppo => ExplorationMode::Action,
            _ => ExplorationMode::Parameter,
        }
    }

    /// AGL and AGOL share an update rule and differ only in schedule.
    pub fn is_gradient_weighted(&self) -> bool {
        matches!(self, LearnerKind::Agl | LearnerKind::Agol)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Pg => "pg",
            LearnerKind::Ppo => "ppo",
            LearnerKind::Pibb => "pibb",
            LearnerKind::Pgpe => "pgpe",
            LearnerKind::Agl => "agl",
            LearnerKind::Agol => "agol",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pg" => Ok(Self::Pg),
            "ppo" => Ok(Self::Ppo),
            "pibb" => Ok(Self::Pibb),
            "pgpe" => Ok(Self::Pgpe),
            "agl" => Ok(Self::Agl),
            "agol" => Ok(Self::Agol),
            other => Err(Error::Config(format!("unknown learner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplorationMode {
    /// One Gaussian perturbation of the weights per episode.
    Parameter,
    /// Independent Gaussian noise on every action.
    Action,
}

impl ExplorationMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExplorationMode::Parameter => "parameter",
            ExplorationMode::Action => "action",
        }
    }
}

/// Per-weight exploration standard deviations and the current perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState {
    pub sigma: Matrix,
    pub perturbation: Matrix,
}

impl ExplorationState {
    pub fn new(rows: usize, cols: usize, sigma0: f64) -> Self {
        Self {
            sigma: Matrix::filled(rows, cols, sigma0.clamp(SIGMA_MIN, SIGMA_MAX)),
            perturbation: Matrix::zeros(rows, cols),
        }
    }
}

/// Clamp every entry of `sigma` to `[SIGMA_MIN, SIGMA_MAX]`.
pub fn clamp_sigma(sigma: &Matrix) -> Matrix {
    sigma.map(|s| {
        if s.is_nan() {
            SIGMA_MIN
        } else {
            s.clamp(SIGMA_MIN, SIGMA_MAX)
        }
    })
}

/// `theta + sigma ⊙ z` with `z` standard normal, drawn row-major.
pub fn explore_parameters<R: Rng + ?Sized>(
    theta: &Matrix,
    sigma: &Matrix,
    rng: &mut R,
) -> Result<Matrix> {
    theta.zip_map(sigma, |t, s| {
        let z: f64 = rng.sample(StandardNormal);
        t + s * z
    })
}

/// One control step as seen by the learners.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Features that produced the action.
    pub basis: Vec<f64>,
    /// Executed (explored) action before any final joint-limit clamp.
    pub action: Vec<f64>,
    /// Noise-free action `clip(W·basis)` under the collection-time weights.
    /// Equal to `action` under parameter exploration.
    pub mean_action: Vec<f64>,
    /// Whether each output saturated in the clipped linear map.
    pub clipped_mask: Vec<bool>,
    pub reward: f64,
}

/// A finished episode together with the exploration it was collected under.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
    pub mode: ExplorationMode,
    /// Weights in effect when the episode started.
    pub theta: Matrix,
    /// `explored - theta`; zero under action exploration.
    pub perturbation: Matrix,
    /// Parameter exploration std at collection time.
    pub sigma: Matrix,
    /// Action noise std (0 under parameter exploration).
    pub sigma_action: f64,
    /// Joint limit of the clipped linear map.
    pub alpha_max: f64,
}

impl Episode {
    pub fn explored(&self) -> Matrix {
        self.theta
            .zip_map(&self.perturbation, |t, p| t + p)
            .expect("episode matrices share a shape")
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// FIFO window of the most recent episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBatch {
    episodes: VecDeque<Episode>,
    capacity: usize,
}

impl EpisodeBatch {
    pub fn new(capacity: usize) -> Self {
        Self {
            episodes: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn from_episodes(episodes: Vec<Episode>) -> Self {
        let capacity = episodes.len().max(1);
        Self {
            episodes: episodes.into(),
            capacity,
        }
    }

    /// Appends `episode`, evicting the oldest one when full.
    pub fn push(&mut self, episode: Episode) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn clear(&mut self) {
        self.episodes.clear();
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn step_count(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn episodes(&self) -> impl ExactSizeIterator<Item = &Episode> + DoubleEndedIterator {
        self.episodes.iter()
    }

    pub fn last(&self) -> Option<&Episode> {
        self.episodes.back()
    }

    pub fn require_mode(&self, expected: ExplorationMode) -> Result<()> {
        match self.episodes.iter().find(|e| e.mode != expected) {
            Some(e) => Err(Error::ExplorationMode {
                expected: expected.name(),
                got: e.mode.name(),
            }),
            None => Ok(()),
        }
    }
}
