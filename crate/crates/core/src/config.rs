//! Flat `key = value` run configuration, presets and manifests.
//!
//! Layering, lowest first: preset, config file, `SME_*` environment
//! variables, explicit overrides (CLI flags). A manifest lists every key with
//! its resolved value and parses back to the same configuration.

use std::collections::BTreeMap;

use crate::controller::ControllerKind;
use crate::error::{Error, Result};
use crate::experiment::{full_grid, ExperimentConfig, Schedule};
use crate::learners::{ExplorationMode, LearnerKind};

/// Environment variables with this prefix override keys, e.g. `SME_SEED=7`.
pub const ENV_PREFIX: &str = "SME_";

/// Ordered key-value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "controller",
    "learner",
    "schedule",
    "episodes",
    "steps_per_episode",
    "batch_window",
    "repetitions",
    "seed",
    "reward_mode",
    "reset",
    "exploration",
    "lr_theta",
    "lr_sigma",
    "sigma0",
    "sigma_action",
    "pibb_h",
    "ppo_clip",
    "ppo_epochs",
    "baseline_lr",
    "record_episodes",
];

const GRID_KEYS: &[&str] = &["grid", "cells", "threshold"];

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_ascii_lowercase();
            if !is_known(&key) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unknown key `{key}`"),
                });
            }
            kv.entries.insert(key, v.trim().to_string());
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        if !is_known(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Values of `other` replace ours.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Keys taken from `SME_<KEY>` variables in `vars`.
    pub fn from_env(vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut kv = Self::new();
        for (name, value) in vars {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                if is_known(&key) {
                    kv.entries.insert(key, value);
                }
            }
        }
        Ok(kv)
    }

    pub fn is_grid(&self) -> bool {
        self.get("grid").is_some() || self.get("cells").is_some()
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn is_known(key: &str) -> bool {
    EXPERIMENT_KEYS.contains(&key) || GRID_KEYS.contains(&key)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn require<'a>(kv: &'a KeyValues, key: &str) -> Result<&'a str> {
    kv.get(key)
        .ok_or_else(|| Error::Config(format!("missing required field `{key}`")))
}

fn apply_overrides(cfg: &mut ExperimentConfig, kv: &KeyValues) -> Result<()> {
    for (key, value) in &kv.entries {
        let v = value.as_str();
        match key.as_str() {
            "controller" | "learner" | "schedule" | "grid" | "cells" | "threshold" => {}
            "episodes" => cfg.episodes = parse(key, v)?,
            "steps_per_episode" => cfg.steps_per_episode = parse(key, v)?,
            "batch_window" => cfg.batch_window = parse(key, v)?,
            "repetitions" => cfg.repetitions = parse(key, v)?,
            "seed" => cfg.seed = parse(key, v)?,
            "reward_mode" => cfg.reward_mode = v.parse()?,
            "reset" => cfg.reset = v.parse()?,
            "exploration" => {
                cfg.exploration = match v {
                    "auto" => None,
                    "parameter" => Some(ExplorationMode::Parameter),
                    "action" => Some(ExplorationMode::Action),
                    _ => return Err(Error::Config(format!("invalid value `{v}` for `exploration`"))),
                }
            }
            "lr_theta" => cfg.params.lr_theta = parse(key, v)?,
            "lr_sigma" => cfg.params.lr_sigma = parse(key, v)?,
            "sigma0" => cfg.params.sigma0 = parse(key, v)?,
            "sigma_action" => cfg.params.sigma_action = parse(key, v)?,
            "pibb_h" => cfg.params.pibb_h = parse(key, v)?,
            "ppo_clip" => cfg.params.ppo_clip = parse(key, v)?,
            "ppo_epochs" => cfg.params.ppo_epochs = parse(key, v)?,
            "baseline_lr" => cfg.params.baseline_lr = parse(key, v)?,
            "record_episodes" => cfg.record_episodes = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
    }
    Ok(())
}

/// Resolves one experiment; `controller`, `learner` and `schedule` are required.
pub fn experiment_from(kv: &KeyValues) -> Result<ExperimentConfig> {
    let controller: ControllerKind = require(kv, "controller")?.parse()?;
    let learner: LearnerKind = require(kv, "learner")?.parse()?;
    let schedule: Schedule = require(kv, "schedule")?.parse()?;
    let mut cfg = ExperimentConfig::new(controller, learner, schedule);
    apply_overrides(&mut cfg, kv)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Every key of `cfg` with its value; parses back to `cfg`.
pub fn manifest(cfg: &ExperimentConfig) -> KeyValues {
    let p = &cfg.params;
    let pairs: Vec<(&str, String)> = vec![
        ("controller", cfg.controller.to_string()),
        ("learner", cfg.learner.to_string()),
        ("schedule", cfg.schedule.to_string()),
        ("episodes", cfg.episodes.to_string()),
        ("steps_per_episode", cfg.steps_per_episode.to_string()),
        ("batch_window", cfg.batch_window.to_string()),
        ("repetitions", cfg.repetitions.to_string()),
        ("seed", cfg.seed.to_string()),
        ("reward_mode", cfg.reward_mode.to_string()),
        ("reset", cfg.reset.to_string()),
        (
            "exploration",
            cfg.exploration.map_or("auto".to_string(), |m| m.name().to_string()),
        ),
        ("lr_theta", format!("{:e}", p.lr_theta)),
        ("lr_sigma", format!("{:e}", p.lr_sigma)),
        ("sigma0", format!("{:e}", p.sigma0)),
        ("sigma_action", format!("{:e}", p.sigma_action)),
        ("pibb_h", format!("{:e}", p.pibb_h)),
        ("ppo_clip", format!("{:e}", p.ppo_clip)),
        ("ppo_epochs", p.ppo_epochs.to_string()),
        ("baseline_lr", format!("{:e}", p.baseline_lr)),
        ("record_episodes", cfg.record_episodes.to_string()),
    ];
    let mut kv = KeyValues::new();
    for (k, v) in pairs {
        kv.entries.insert(k.to_string(), v);
    }
    kv
}

/// A set of cells plus the episodes-to-threshold level (None = default).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cells: Vec<ExperimentConfig>,
    pub threshold: Option<f64>,
}

/// `grid = full` or `cells = sme/agol/online, cpgrbf/pibb/batch`; other
/// keys apply to every cell.
pub fn grid_from(kv: &KeyValues) -> Result<GridSpec> {
    let mut shared = kv.clone();
    for k in ["controller", "learner", "schedule"] {
        shared.entries.remove(k);
    }
    let mut cells = Vec::new();
    if let Some(g) = kv.get("grid") {
        if g != "full" {
            return Err(Error::Config(format!("unknown grid `{g}`")));
        }
        let template = ExperimentConfig::new(ControllerKind::Sme, LearnerKind::Agol, Schedule::Online);
        for c in full_grid(&template) {
            let mut cell = KeyValues::new();
            cell.merge(&manifest_triple(&c));
            cell.merge(&shared);
            cells.push(experiment_from(&cell)?);
        }
    }
    if let Some(list) = kv.get("cells") {
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = item.split('/').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "cell `{item}` is not controller/learner/schedule"
                )));
            }
            let mut cell = KeyValues::new();
            cell.entries.insert("controller".into(), parts[0].into());
            cell.entries.insert("learner".into(), parts[1].into());
            cell.entries.insert("schedule".into(), parts[2].into());
            cell.merge(&shared);
            cells.push(experiment_from(&cell)?);
        }
    }
    if cells.is_empty() {
        return Err(Error::Config("missing required field `cells` (or `grid`)".into()));
    }
    let threshold = kv.get("threshold").map(|t| parse("threshold", t)).transpose()?;
    Ok(GridSpec { cells, threshold })
}

fn manifest_triple(cfg: &ExperimentConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.entries.insert("controller".into(), cfg.controller.to_string());
    kv.entries.insert("learner".into(), cfg.learner.to_string());
    kv.entries.insert("schedule".into(), cfg.schedule.to_string());
    kv
}

/// Grid manifest: the shared keys as given plus the explicit cell list.
pub fn grid_manifest(kv: &KeyValues, spec: &GridSpec) -> KeyValues {
    let mut out = kv.clone();
    out.entries.remove("grid");
    let cells: Vec<String> = spec
        .cells
        .iter()
        .map(|c| format!("{}/{}/{}", c.controller, c.learner, c.schedule))
        .collect();
    out.entries.insert("cells".into(), cells.join(", "));
    if let Some(t) = spec.threshold {
        out.entries.insert("threshold".into(), format!("{t:e}"));
    }
    out
}

pub const PRESETS: &[&str] = &["sme-agol-online", "cpgrbf-pibb-batch", "physical-protocol", "full-grid"];

pub fn preset(name: &str) -> Result<KeyValues> {
    let text = match name {
        "sme-agol-online" => "controller = sme\nlearner = agol\nschedule = online\n",
        "cpgrbf-pibb-batch" => "controller = cpgrbf\nlearner = pibb\nschedule = batch\n",
        "physical-protocol" => "controller = sme\nlearner = agol\nschedule = continual\n",
        "full-grid" => "grid = full\n",
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    KeyValues::parse(text)
}
