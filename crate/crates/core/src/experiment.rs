//! Learning protocols: batch, online (sliding window) and continual (no
//! resets, learned baseline), plus the controller × learner comparison grid.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controller::{ControllerKind, Rhythm, N_OUTPUTS};
use crate::env::{env_step, initial_world, reset, EnvConfig, ResetMode, RewardMode, WorldState};
use crate::error::{Error, Result};
use crate::learners::{
    advantage_real, advantage_sim, advantage_single, agol_sigma_update, agol_update,
    baseline_update, explore_parameters, pg_update, pgpe_sigma_update, pgpe_update, pibb_update,
    ppo_update, BaselineMap, Checkpoint, Episode, EpisodeBatch, ExplorationMode, LearnerKind,
    StepRecord, BATCH_WINDOW,
};
use crate::matrix::Matrix;
use crate::sme::DEFAULT_ALPHA_MAX;

pub const STEPS_PER_EPISODE: usize = 70;
/// Episodes averaged for a run's final reward.
pub const FINAL_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Schedule {
    Batch,
    Online,
    Continual,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Batch => "batch",
            Schedule::Online => "online",
            Schedule::Continual => "continual",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(Self::Batch),
            "online" => Ok(Self::Online),
            "continual" => Ok(Self::Continual),
            other => Err(Error::Config(format!("unknown schedule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    pub lr_theta: f64,
    /// 0 disables exploration adaptation.
    pub lr_sigma: f64,
    /// Initial per-parameter exploration std.
    pub sigma0: f64,
    /// Action noise std for action-space learners.
    pub sigma_action: f64,
    pub pibb_h: f64,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
    pub baseline_lr: f64,
}

impl LearnerParams {
    /// Defaults tuned on the surrogate (SME controller, seed 1000, 10
    /// repetitions); the acceptance runs use other seeds. Rates are for the
    /// summed update forms, so they are small next to the usual mean-form
    /// values.
    pub fn defaults(learner: LearnerKind, schedule: Schedule) -> Self {
        let base = Self {
            lr_theta: 0.0,
            lr_sigma: 0.0,
            sigma0: 0.1,
            sigma_action: 0.05,
            pibb_h: 10.0,
            ppo_clip: 0.2,
            ppo_epochs: 4,
            baseline_lr: 0.05,
        };
        let (lr_theta, lr_sigma, sigma0) = match (learner, schedule) {
            (_, Schedule::Continual) => (1e-4, 1e-6, 0.2),
            (LearnerKind::Agl | LearnerKind::Agol, Schedule::Batch) => (3e-3, 0.0, 0.2),
            (LearnerKind::Agl | LearnerKind::Agol, _) => (6e-4, 0.0, 0.2),
            (LearnerKind::Pgpe, Schedule::Batch) => (2e-4, 0.0, 0.14),
            (LearnerKind::Pgpe, _) => (3e-5, 0.0, 0.14),
            (LearnerKind::Pibb, _) => (0.0, 0.0, 0.14),
            (LearnerKind::Pg, Schedule::Batch) => (1e-3, 0.0, 0.1),
            (LearnerKind::Pg, _) => (1e-2, 0.0, 0.1),
            (LearnerKind::Ppo, Schedule::Batch) => (1.0, 0.0, 0.1),
            (LearnerKind::Ppo, _) => (3.0, 0.0, 0.1),
        };
        Self {
            lr_theta,
            lr_sigma,
            sigma0,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub controller: ControllerKind,
    pub learner: LearnerKind,
    pub schedule: Schedule,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_window: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub reward_mode: RewardMode,
    pub reset: ResetMode,
    /// Optional explicit exploration flag; must agree with the learner.
    pub exploration: Option<ExplorationMode>,
    pub params: LearnerParams,
    /// Leading episodes kept in full for trajectory export.
    pub record_episodes: usize,
}

impl ExperimentConfig {
    pub fn new(controller: ControllerKind, learner: LearnerKind, schedule: Schedule) -> Self {
        let continual = schedule == Schedule::Continual;
        Self {
            controller,
            learner,
            schedule,
            episodes: if continual { 200 } else { 100 },
            steps_per_episode: STEPS_PER_EPISODE,
            batch_window: BATCH_WINDOW,
            repetitions: 10,
            seed: 0,
            reward_mode: if continual {
                RewardMode::Heading
            } else {
                RewardMode::Sim
            },
            reset: if continual {
                ResetMode::None
            } else {
                ResetMode::Full
            },
            exploration: None,
            params: LearnerParams::defaults(learner, schedule),
            record_episodes: BATCH_WINDOW,
        }
    }

    /// Short cell label such as `sme-agol-online`.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.controller, self.learner, self.schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(mode) = self.exploration {
            if mode != self.learner.exploration() {
                return Err(Error::Config(format!(
                    "learner {} uses {} exploration, config requests {}",
                    self.learner,
                    self.learner.exploration().name(),
                    mode.name()
                )));
            }
        }
        match (self.learner, self.schedule) {
            (LearnerKind::Agl, Schedule::Batch) => {}
            (LearnerKind::Agl, s) => {
                return Err(Error::Config(format!(
                    "agl is the batch schedule of agol, got {s}"
                )))
            }
            (LearnerKind::Agol, Schedule::Batch) => {
                return Err(Error::Config("agol with the batch schedule is agl".into()))
            }
            (l, Schedule::Continual) if l != LearnerKind::Agol => {
                return Err(Error::Config(format!(
                    "continual schedule requires agol, got {l}"
                )))
            }
            _ => {}
        }
        if self.schedule == Schedule::Continual && self.reward_mode != RewardMode::Heading {
            return Err(Error::Config(
                "continual schedule requires reward_mode = heading".into(),
            ));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::Config("steps_per_episode must be ≥ 1".into()));
        }
        if self.batch_window == 0 {
            return Err(Error::Config("batch_window must be ≥ 1".into()));
        }
        let p = &self.params;
        let checks = [
            (p.lr_theta >= 0.0, "lr_theta must be ≥ 0"),
            (p.lr_sigma >= 0.0, "lr_sigma must be ≥ 0"),
            (p.sigma0 > 0.0, "sigma0 must be > 0"),
            (p.sigma_action >= 0.0, "sigma_action must be ≥ 0"),
            (p.pibb_h > 0.0, "pibb_h must be > 0"),
            (p.ppo_clip > 0.0, "ppo_clip must be > 0"),
            (p.baseline_lr > 0.0, "baseline_lr must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        if self.learner.exploration() == ExplorationMode::Action && !(p.sigma_action > 0.0) {
            return Err(Error::Config(
                "action-space learners need sigma_action > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Episodic rewards indexed `[repetition][episode]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub rewards: Vec<Vec<f64>>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl LearningCurve {
    pub fn repetitions(&self) -> usize {
        self.rewards.len()
    }

    pub fn episodes(&self) -> usize {
        self.rewards.first().map_or(0, Vec::len)
    }

    fn column(&self, episode: usize) -> Vec<f64> {
        self.rewards.iter().map(|r| r[episode]).collect()
    }

    fn per_episode(&self, f: impl Fn(Vec<f64>) -> f64) -> Vec<f64> {
        (0..self.episodes()).map(|e| f(self.column(e))).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.per_episode(|c| c.iter().sum::<f64>() / c.len() as f64)
    }

    pub fn min(&self) -> Vec<f64> {
        self.per_episode(|c| c.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn max(&self) -> Vec<f64> {
        self.per_episode(|c| c.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn median(&self) -> Vec<f64> {
        self.per_episode(|mut c| median(&mut c))
    }

    /// Median over repetitions of the mean of the last [`FINAL_WINDOW`] episodes.
    pub fn final_reward(&self) -> f64 {
        let mut finals: Vec<f64> = self
            .rewards
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| {
                let tail = &r[r.len().saturating_sub(FINAL_WINDOW)..];
                tail.iter().sum::<f64>() / tail.len() as f64
            })
            .collect();
        median(&mut finals)
    }

    /// Median over repetitions of the first episode reaching `threshold`;
    /// `None` when the median repetition never reaches it.
    pub fn episodes_to_threshold(&self, threshold: f64) -> Option<f64> {
        if self.rewards.is_empty() {
            return None;
        }
        let mut firsts: Vec<f64> = self
            .rewards
            .iter()
            .map(|r| {
                r.iter()
                    .position(|&x| x >= threshold)
                    .map_or(f64::INFINITY, |e| e as f64)
            })
            .collect();
        let m = median(&mut firsts);
        m.is_finite().then_some(m)
    }
}

/// Everything one repetition produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rewards: Vec<f64>,
    pub updates: usize,
    pub final_state: Checkpoint,
    /// Exploration std in effect during each episode.
    pub sigma_history: Vec<Matrix>,
    pub recorded: Vec<Episode>,
    /// Training window after the last episode.
    pub final_batch: EpisodeBatch,
}

/// Controller, world and policy parameters that persist across episodes.
#[derive(Debug, Clone)]
struct Learner {
    theta: Matrix,
    sigma: Matrix,
    baseline: BaselineMap,
}

/// Noise source for one rollout.
pub enum Exploration<'a, R: Rng + ?Sized> {
    None,
    Action { sigma: f64, rng: &'a mut R },
}

/// Runs `steps` control steps with output weights `weights`, recording
/// features, actions and rewards. `observe` sees each new world state.
#[allow(clippy::too_many_arguments)]
pub fn rollout<R: Rng + ?Sized>(
    rhythm: &mut Rhythm,
    world: &mut WorldState,
    env: &EnvConfig,
    weights: &Matrix,
    alpha_max: f64,
    mut noise: Exploration<'_, R>,
    steps: usize,
    mut observe: impl FnMut(&WorldState, f64),
) -> Result<Vec<StepRecord>> {
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let basis = rhythm.features().to_vec();
        let raw = weights.mul_vec(&basis)?;
        let clipped_mask: Vec<bool> = raw.iter().map(|x| x.abs() > alpha_max).collect();
        let mean: Vec<f64> = raw.iter().map(|x| x.clamp(-alpha_max, alpha_max)).collect();
        let action: Vec<f64> = match &mut noise {
            Exploration::None => mean.clone(),
            Exploration::Action { sigma, rng } => mean
                .iter()
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + *sigma * z
                })
                .collect(),
        };
        let command: Vec<f64> = action
            .iter()
            .map(|a| a.clamp(-alpha_max, alpha_max))
            .collect();
        let (next, reward) = env_step(world, &command, env)?;
        *world = next;
        observe(world, reward);
        rhythm.advance();
        records.push(StepRecord {
            basis,
            action,
            mean_action: mean,
            clipped_mask,
            reward,
        });
    }
    Ok(records)
}

/// Noise-free episodic reward of `weights` from a full reset.
pub fn evaluate_policy(
    controller: ControllerKind,
    env: &EnvConfig,
    weights: &Matrix,
    steps: usize,
) -> Result<f64> {
    let mut rhythm = Rhythm::new(controller)?;
    let mut world = initial_world(env);
    let records = rollout::<ChaCha8Rng>(
        &mut rhythm,
        &mut world,
        env,
        weights,
        DEFAULT_ALPHA_MAX,
        Exploration::None,
        steps,
        |_, _| {},
    )?;
    Ok(records.iter().map(|s| s.reward).sum())
}

/// `episodes` parameter-exploration rollouts around `theta` with spread
/// `sigma`, each from a full reset. Used to rebuild an update direction from
/// a checkpoint.
pub fn sample_batch<R: Rng + ?Sized>(
    controller: ControllerKind,
    env: &EnvConfig,
    theta: &Matrix,
    sigma: &Matrix,
    episodes: usize,
    steps: usize,
    rng: &mut R,
) -> Result<EpisodeBatch> {
    let mut batch = EpisodeBatch::new(episodes.max(1));
    for _ in 0..episodes {
        let mut rhythm = Rhythm::new(controller)?;
        let mut world = initial_world(env);
        let explored = explore_parameters(theta, sigma, rng)?;
        let perturbation = explored.zip_map(theta, |a, b| a - b)?;
        let records = rollout::<ChaCha8Rng>(
            &mut rhythm,
            &mut world,
            env,
            &explored,
            DEFAULT_ALPHA_MAX,
            Exploration::None,
            steps,
            |_, _| {},
        )?;
        batch.push(Episode {
            steps: records,
            mode: ExplorationMode::Parameter,
            theta: theta.clone(),
            perturbation,
            sigma: sigma.clone(),
            sigma_action: 0.0,
            alpha_max: DEFAULT_ALPHA_MAX,
        });
    }
    Ok(batch)
}

/// Per-repetition generator: the config seed selects the key, the
/// repetition index the stream.
pub fn repetition_rng(seed: u64, repetition: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repetition as u64);
    rng
}

/// Surrogate settings the experiment runs against.
pub fn env_config(cfg: &ExperimentConfig) -> EnvConfig {
    EnvConfig {
        reward_mode: cfg.reward_mode,
        ..EnvConfig::default()
    }
}

/// Advantages for every episode of `batch` under the schedule's rule.
pub fn batch_advantages(
    schedule: Schedule,
    batch: &EpisodeBatch,
    baseline: &BaselineMap,
) -> Result<Vec<Vec<f64>>> {
    if schedule == Schedule::Continual {
        return Ok(batch
            .episodes()
            .map(|ep| advantage_real(&ep.steps, baseline))
            .collect());
    }
    if batch.len() >= 2 {
        advantage_sim(batch)
    } else {
        Ok(batch
            .episodes()
            .map(|ep| advantage_single(&ep.steps))
            .collect())
    }
}

fn apply_update(
    cfg: &ExperimentConfig,
    learner: &mut Learner,
    batch: &EpisodeBatch,
) -> Result<bool> {
    let p = &cfg.params;
    if cfg.learner == LearnerKind::Pibb {
        // Ranking needs at least two episodes.
        if batch.len() < 2 {
            return Ok(false);
        }
        let returns: Vec<f64> = batch.episodes().map(Episode::total_reward).collect();
        learner.theta = pibb_update(batch, &returns, p.pibb_h)?;
        return Ok(true);
    }
    let adv = batch_advantages(cfg.schedule, batch, &learner.baseline)?;
    match cfg.learner {
        LearnerKind::Agl | LearnerKind::Agol => {
            let theta = agol_update(batch, &learner.theta, &adv, p.lr_theta)?;
            if p.lr_sigma > 0.0 {
                learner.sigma = agol_sigma_update(batch, &learner.sigma, &adv, p.lr_sigma)?;
            }
            learner.theta = theta;
        }
        LearnerKind::Pgpe => {
            let theta = pgpe_update(batch, &learner.theta, &adv, p.lr_theta)?;
            if p.lr_sigma > 0.0 {
                learner.sigma = pgpe_sigma_update(batch, &learner.sigma, &adv, p.lr_sigma)?;
            }
            learner.theta = theta;
        }
        LearnerKind::Pg => learner.theta = pg_update(batch, &learner.theta, &adv, p.lr_theta)?,
        LearnerKind::Ppo => {
            learner.theta = ppo_update(
                batch,
                &learner.theta,
                &adv,
                p.lr_theta,
                p.ppo_clip,
                p.ppo_epochs,
            )?
        }
        LearnerKind::Pibb => unreachable!(),
    }
    if cfg.schedule == Schedule::Continual {
        let steps: Vec<&[StepRecord]> = batch.episodes().map(|e| e.steps.as_slice()).collect();
        learner.baseline = baseline_update(&steps, &learner.baseline, p.baseline_lr)?;
    }
    Ok(true)
}

/// One repetition of `cfg` under its schedule.
pub fn run_repetition(cfg: &ExperimentConfig, repetition: usize) -> Result<RunResult> {
    cfg.validate()?;
    let env = env_config(cfg);
    let mut rng = repetition_rng(cfg.seed, repetition);
    let mut rhythm = Rhythm::new(cfg.controller)?;
    let n_features = rhythm.n_features();
    let mut world = initial_world(&env);
    let mut learner = Learner {
        theta: Matrix::zeros(N_OUTPUTS, n_features),
        sigma: Matrix::filled(N_OUTPUTS, n_features, cfg.params.sigma0),
        baseline: BaselineMap::zeros(n_features),
    };
    let mode = cfg.learner.exploration();
    let mut batch = EpisodeBatch::new(cfg.batch_window);
    let mut result = RunResult {
        rewards: Vec::with_capacity(cfg.episodes),
        updates: 0,
        final_state: Checkpoint {
            theta: learner.theta.clone(),
            sigma: learner.sigma.clone(),
            baseline: learner.baseline.clone(),
            episode: 0,
        },
        sigma_history: Vec::with_capacity(cfg.episodes),
        recorded: Vec::new(),
        final_batch: EpisodeBatch::new(cfg.batch_window),
    };
    for episode in 0..cfg.episodes {
        world = reset(&world, &env, cfg.reset);
        if cfg.reset != ResetMode::None {
            rhythm.reset();
        }
        let (weights, perturbation) = match mode {
            ExplorationMode::Parameter => {
                let explored = explore_parameters(&learner.theta, &learner.sigma, &mut rng)?;
                let delta = explored.zip_map(&learner.theta, |a, b| a - b)?;
                (explored, delta)
            }
            ExplorationMode::Action => {
                (learner.theta.clone(), Matrix::zeros(N_OUTPUTS, n_features))
            }
        };
        let noise = match mode {
            ExplorationMode::Parameter => Exploration::None,
            ExplorationMode::Action => Exploration::Action {
                sigma: cfg.params.sigma_action,
                rng: &mut rng,
            },
        };
        let steps = rollout(
            &mut rhythm,
            &mut world,
            &env,
            &weights,
            DEFAULT_ALPHA_MAX,
            noise,
            cfg.steps_per_episode,
            |_, _| {},
        )?;
        let ep = Episode {
            steps,
            mode,
            theta: learner.theta.clone(),
            perturbation,
            sigma: learner.sigma.clone(),
            sigma_action: if mode == ExplorationMode::Action {
                cfg.params.sigma_action
            } else {
                0.0
            },
            alpha_max: DEFAULT_ALPHA_MAX,
        };
        result.rewards.push(ep.total_reward());
        result.sigma_history.push(learner.sigma.clone());
        if result.recorded.len() < cfg.record_episodes {
            result.recorded.push(ep.clone());
        }
        batch.push(ep);
        let due = match cfg.schedule {
            Schedule::Batch => batch.len() == cfg.batch_window,
            Schedule::Online | Schedule::Continual => true,
        };
        if due {
            if apply_update(cfg, &mut learner, &batch)? {
                result.updates += 1;
            }
            if cfg.schedule == Schedule::Batch {
                result.final_batch = batch.clone();
                batch.clear();
            }
        }
        if !learner.theta.is_finite() {
            return Err(Error::Degenerate(format!(
                "{} diverged at episode {episode}",
                cfg.label()
            )));
        }
    }
    if cfg.schedule != Schedule::Batch || !batch.is_empty() {
        result.final_batch = batch;
    }
    result.final_state = Checkpoint {
        theta: learner.theta,
        sigma: learner.sigma,
        baseline: learner.baseline,
        episode: cfg.episodes as u64,
    };
    Ok(result)
}

/// All repetitions of `cfg`, at most `jobs` at a time. Results are ordered
/// by repetition regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let run = || {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(cfg, rep))
            .collect::<Result<Vec<_>>>()
    };
    if jobs <= 1 {
        (0..cfg.repetitions)
            .map(|rep| run_repetition(cfg, rep))
            .collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)
    }
}

pub fn curve_of(results: &[RunResult]) -> LearningCurve {
    LearningCurve {
        rewards: results.iter().map(|r| r.rewards.clone()).collect(),
    }
}

fn run_schedule(cfg: &ExperimentConfig, schedule: Schedule) -> Result<LearningCurve> {
    if cfg.schedule != schedule {
        return Err(Error::Config(format!(
            "expected schedule {schedule}, got {}",
            cfg.schedule
        )));
    }
    Ok(curve_of(&run_experiment(cfg, 1)?))
}

pub fn run_batch(cfg: &ExperimentConfig) -> Result<LearningCurve> {
    run_schedule(cfg, Schedule::Batch)
}

pub fn run_online(cfg: &ExperimentConfig) -> Result<LearningCurve> {
    run_schedule(cfg, Schedule::Online)
}

pub fn run_continual(cfg: &ExperimentConfig) -> Result<LearningCurve> {
    run_schedule(cfg, Schedule::Continual)
}

/// Swing and lift amplitudes of [`tripod_preset`] (rad).
pub const TRIPOD_SWING: f64 = 0.25;
pub const TRIPOD_LIFT: f64 = 0.2;

/// Hand-written tripod gait over four key poses. Tripod A = {RF, LM, RH},
/// tripod B = {LF, RM, LH} uses A's columns rotated by two.
pub fn tripod_preset(n_legs: usize, n_states: usize) -> Result<Matrix> {
    if n_states != 4 {
        return Err(Error::Config(format!(
            "tripod preset needs 4 states, got {n_states}"
        )));
    }
    if n_legs != 6 {
        return Err(Error::Config(format!(
            "tripod preset needs 6 legs, got {n_legs}"
        )));
    }
    // Stance sweeps swing backward over columns 0..2, column 3 lifts.
    let swing = [TRIPOD_SWING, 0.0, -TRIPOD_SWING, 0.0];
    let lift = [0.0, 0.0, 0.0, TRIPOD_LIFT];
    let tripod_a = [0usize, 2, 4];
    let mut w = Matrix::zeros(n_legs * 3, n_states);
    for leg in 0..n_legs {
        let shift = if tripod_a.contains(&leg) { 0 } else { 2 };
        for k in 0..n_states {
            w[(leg * 3, k)] = swing[(k + shift) % n_states];
            w[(leg * 3 + 1, k)] = lift[(k + shift) % n_states];
        }
    }
    Ok(w)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub controller: ControllerKind,
    pub learner: LearnerKind,
    pub schedule: Schedule,
    pub final_reward_median: f64,
    pub episodes_to_threshold_median: Option<f64>,
    pub curve: LearningCurve,
}

/// Surrogate threshold for episodes-to-threshold: 40% of the tripod reward.
pub fn default_threshold(controller: ControllerKind) -> Result<f64> {
    let w = tripod_preset(6, 4)?;
    Ok(0.4 * evaluate_policy(controller, &EnvConfig::default(), &w, STEPS_PER_EPISODE)?)
}

/// Runs every cell (duplicates removed, first occurrence kept) and
/// summarizes it. Cells run in parallel when `jobs > 1`.
pub fn comparison_matrix(
    cells: &[ExperimentConfig],
    threshold: f64,
    jobs: usize,
) -> Result<Vec<ComparisonRow>> {
    let mut unique: Vec<&ExperimentConfig> = Vec::new();
    for c in cells {
        if unique.iter().any(|u| *u == c) {
            log::warn!("duplicate grid cell {} ignored", c.label());
        } else {
            unique.push(c);
        }
    }
    for c in &unique {
        c.validate()?;
    }
    let jobs_list: Vec<(usize, usize)> = unique
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.repetitions).map(move |r| (i, r)))
        .collect();
    let work = || {
        jobs_list
            .par_iter()
            .map(|&(i, r)| run_repetition(unique[i], r))
            .collect::<Result<Vec<_>>>()
    };
    let results = if jobs <= 1 {
        jobs_list
            .iter()
            .map(|&(i, r)| run_repetition(unique[i], r))
            .collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?
    };
    let mut rows = Vec::with_capacity(unique.len());
    let mut it = results.into_iter();
    for c in unique {
        let runs: Vec<RunResult> = it.by_ref().take(c.repetitions).collect();
        let curve = curve_of(&runs);
        rows.push(ComparisonRow {
            controller: c.controller,
            learner: c.learner,
            schedule: c.schedule,
            final_reward_median: curve.final_reward(),
            episodes_to_threshold_median: curve.episodes_to_threshold(threshold),
            curve,
        });
    }
    Ok(rows)
}

/// The 20-condition comparison: both controllers with PG, PPO, PIBB and PGPE
/// under both schedules, AGL (batch) and AGOL (online).
pub fn full_grid(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut cells = Vec::new();
    for controller in [ControllerKind::Sme, ControllerKind::CpgRbf] {
        for learner in [
            LearnerKind::Pg,
            LearnerKind::Ppo,
            LearnerKind::Pibb,
            LearnerKind::Pgpe,
        ] {
            for schedule in [Schedule::Batch, Schedule::Online] {
                cells.push(cell(base, controller, learner, schedule));
            }
        }
        cells.push(cell(base, controller, LearnerKind::Agl, Schedule::Batch));
        cells.push(cell(base, controller, LearnerKind::Agol, Schedule::Online));
    }
    cells
}

fn cell(
    base: &ExperimentConfig,
    controller: ControllerKind,
    learner: LearnerKind,
    schedule: Schedule,
) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(controller, learner, schedule);
    c.episodes = base.episodes;
    c.repetitions = base.repetitions;
    c.seed = base.seed;
    c.steps_per_episode = base.steps_per_episode;
    c
}
