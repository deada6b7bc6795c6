//! Baseline controller: a two-neuron SO(2) oscillator feeding radial basis
//! kernels placed on its limit cycle, read out by a clipped linear map.

use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;
use crate::sme::clipped_linear;

/// Steps discarded before measuring or sampling the limit cycle.
pub const WARMUP_STEPS: usize = 2000;
/// Step count of one SME gait cycle at 0.3 Hz and 20 Hz control.
pub const TARGET_PERIOD: f64 = 20.0 / 0.3;

/// `W = [[w_self·cos φ, w_cross·sin φ], [-w_cross·sin φ, w_self·cos φ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So2Config {
    pub w_self: f64,
    pub w_cross: f64,
    pub phi: f64,
}

impl So2Config {
    /// `phi` found by [`calibrate_phi`] for [`TARGET_PERIOD`] with unit-gain 1.01 weights.
    pub const DEFAULT_PHI: f64 = 0.094_311_238_505_742_74;

    pub fn with_phi(phi: f64) -> Self {
        Self {
            phi,
            ..Self::default()
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.phi.sin_cos();
        [
            [self.w_self * c, self.w_cross * s],
            [-self.w_cross * s, self.w_self * c],
        ]
    }
}

impl Default for So2Config {
    fn default() -> Self {
        Self {
            w_self: 1.01,
            w_cross: 1.01,
            phi: Self::DEFAULT_PHI,
        }
    }
}

pub fn so2_step(state: [f64; 2], cfg: &So2Config) -> [f64; 2] {
    let w = cfg.matrix();
    [
        (w[0][0] * state[0] + w[0][1] * state[1]).tanh(),
        (w[1][0] * state[0] + w[1][1] * state[1]).tanh(),
    ]
}

/// Advances `state` by `steps` oscillator updates.
pub fn so2_run(mut state: [f64; 2], cfg: &So2Config, steps: usize) -> [f64; 2] {
    for _ in 0..steps {
        state = so2_step(state, cfg);
    }
    state
}

/// Step indices of upward zero crossings of the first neuron.
fn upward_crossings(mut state: [f64; 2], cfg: &So2Config, steps: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for t in 0..steps {
        let next = so2_step(state, cfg);
        if state[0] < 0.0 && next[0] >= 0.0 {
            out.push(t + 1);
        }
        state = next;
    }
    out
}

/// Integer step counts between successive upward crossings after warmup.
pub fn cycle_lengths(cfg: &So2Config, cycles: usize) -> Vec<usize> {
    let start = so2_run([0.2, 0.0], cfg, WARMUP_STEPS);
    let horizon =
        (cycles + 2) * ((2.0 * std::f64::consts::PI / cfg.phi.abs().max(1e-3)) as usize + 50);
    let crossings = upward_crossings(start, cfg, horizon);
    crossings
        .windows(2)
        .take(cycles)
        .map(|w| w[1] - w[0])
        .collect()
}

/// Mean oscillation period in steps, from upward zero crossings after warmup.
pub fn measure_period(cfg: &So2Config) -> Option<f64> {
    let lengths = cycle_lengths(cfg, 30);
    if lengths.len() < 2 {
        return None;
    }
    Some(lengths.iter().sum::<usize>() as f64 / lengths.len() as f64)
}

/// Bisection on `phi` until the measured period matches `target` steps.
pub fn calibrate_phi(base: &So2Config, target: f64) -> Result<f64> {
    let period = |phi: f64| measure_period(&So2Config { phi, ..*base });
    let (mut lo, mut hi) = (0.02, 0.6);
    match (period(lo), period(hi)) {
        (Some(a), Some(b)) if a >= target && b <= target => {}
        _ => {
            return Err(Error::Config(format!(
                "target period {target} outside the calibration bracket"
            )))
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match period(mid) {
            Some(p) if p > target => lo = mid,
            Some(_) => hi = mid,
            None => lo = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Radial basis kernels over oscillator states plus their output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfMap {
    pub centers: Vec<[f64; 2]>,
    pub width: f64,
    pub weights: Matrix,
}

impl RbfMap {
    /// Centers at `n_kernels` equally spaced phase points of one measured
    /// cycle, starting at an upward zero crossing. The width makes every
    /// on-cycle state activate its nearest kernel to at least 0.5. Returns the map and the start state.
    pub fn on_limit_cycle(
        cfg: &So2Config,
        n_kernels: usize,
        n_outputs: usize,
    ) -> Result<(Self, [f64; 2])> {
        if n_kernels < 2 {
            return Err(Error::Config("rbf map needs at least two kernels".into()));
        }
        let cycle = sample_cycle(cfg)?;
        let period = cycle.len();
        let centers: Vec<[f64; 2]> = (0..n_kernels)
            .map(|k| cycle[(k * period + n_kernels / 2) / n_kernels % period])
            .collect();
        // Farthest on-cycle distance from the nearest center.
        let gap = cycle
            .iter()
            .map(|&s| {
                centers
                    .iter()
                    .map(|&c| dist(s, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let width = gap / (2.0 * std::f64::consts::LN_2).sqrt();
        Ok((
            Self {
                centers,
                width,
                weights: Matrix::zeros(n_outputs, n_kernels),
            },
            cycle[0],
        ))
    }

    pub fn n_kernels(&self) -> usize {
        self.centers.len()
    }
}

/// One period of on-cycle states beginning at an upward zero crossing.
pub fn sample_cycle(cfg: &So2Config) -> Result<Vec<[f64; 2]>> {
    let mut state = so2_run([0.2, 0.0], cfg, WARMUP_STEPS);
    let limit = 100_000;
    let mut found = false;
    for _ in 0..limit {
        let next = so2_step(state, cfg);
        let crossed = state[0] < 0.0 && next[0] >= 0.0;
        state = next;
        if crossed {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::Degenerate("oscillator does not oscillate".into()));
    }
    let start = state;
    let mut cycle = vec![start];
    for _ in 0..limit {
        let next = so2_step(state, cfg);
        let crossed = state[0] < 0.0 && next[0] >= 0.0;
        if crossed {
            return Ok(cycle);
        }
        state = next;
        cycle.push(state);
    }
    Err(Error::Degenerate("oscillator cycle did not close".into()))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn rbf_activations(state: [f64; 2], map: &RbfMap) -> Result<Vec<f64>> {
    if map.centers.is_empty() || !(map.width > 0.0) {
        return Err(Error::Config("rbf centers are not initialized".into()));
    }
    let denom = 2.0 * map.width * map.width;
    Ok(map
        .centers
        .iter()
        .map(|&c| (-(dist(state, c).powi(2)) / denom).exp())
        .collect())
}

pub fn cpgrbf_output(activations: &[f64], map: &RbfMap, alpha_max: f64) -> Result<Vec<f64>> {
    check_len("cpgrbf_output kernels", map.n_kernels(), activations.len())?;
    clipped_linear(&map.weights, activations, alpha_max)
}
