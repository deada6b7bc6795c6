//! Sequential motion executor: a ring of self-propagating sigmoid CPG neurons,
//! one ReLU low-pass basis neuron per CPG state, and a clipped linear map from
//! bases to joint commands.

use crate::error::{check_len, Error, Result};
use crate::learners::BaselineMap;
use crate::matrix::{solve_linear, Matrix};

pub const DEFAULT_N_STATES: usize = 4;
pub const DEFAULT_N_OUTPUTS: usize = 18;
pub const DEFAULT_ALPHA_MAX: f64 = 0.3;
pub const DEFAULT_W_TAU: f64 = 0.05;
/// Network update rate in Hz.
pub const CONTROL_RATE_HZ: f64 = 20.0;

/// How the first boundary target `gamma` enters the boundary system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaTarget {
    /// `gamma` is an activity level; the pre-activation target is `logit(gamma)`.
    Activity,
    /// `gamma` is used directly as a pre-activation target.
    PreActivation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpgConfig {
    pub gamma: f64,
    pub omega: f64,
    pub iota: f64,
    pub epsilon: f64,
    pub n_states: usize,
    pub gamma_target: GammaTarget,
}

impl Default for CpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            omega: 8.0,
            iota: 0.95,
            epsilon: 0.01,
            n_states: DEFAULT_N_STATES,
            gamma_target: GammaTarget::Activity,
        }
    }
}

impl CpgConfig {
    /// Checks the ranges required for running a network with this config.
    ///
    /// A two-state ring is rejected: its previous and next neighbour coincide,
    /// so the propagation and next-state suppression targets cannot both hold.
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.epsilon && self.epsilon < self.iota && self.iota < 1.0) {
            return Err(Error::Config(format!(
                "cpg requires 0 < epsilon < iota < 1, got epsilon={} iota={}",
                self.epsilon, self.iota
            )));
        }
        if !(self.omega > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "cpg requires omega > 0 and finite gamma, got omega={} gamma={}",
                self.omega, self.gamma
            )));
        }
        if self.gamma_target == GammaTarget::Activity && !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "activity-level gamma must lie in (0,1), got {}",
                self.gamma
            )));
        }
        if self.n_states < 3 {
            return Err(Error::Config(format!(
                "cpg ring needs at least 3 states, got {}",
                self.n_states
            )));
        }
        Ok(())
    }

    /// Pre-activation value targeted by the first boundary condition.
    pub fn gamma_preactivation(&self) -> f64 {
        match self.gamma_target {
            GammaTarget::PreActivation => self.gamma,
            GammaTarget::Activity => (self.gamma / (1.0 - self.gamma)).ln(),
        }
    }
}

/// Ring weights shared by every CPG neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpgWeights {
    /// From the previous state neuron.
    pub w_cp: f64,
    /// Self-connection.
    pub w_ci: f64,
    /// From the next state neuron.
    pub w_cn: f64,
    /// From the previous basis neuron.
    pub w_bp: f64,
    pub bias: f64,
}

impl CpgWeights {
    /// Rounded weights as published alongside the default free parameters.
    pub const ROUNDED: CpgWeights = CpgWeights {
        w_cp: 8.0,
        w_ci: 25.0,
        w_cn: -32.0,
        w_bp: 8.0,
        bias: -15.0,
    };

    pub fn as_array(&self) -> [f64; 5] {
        [self.w_cp, self.w_ci, self.w_cn, self.w_bp, self.bias]
    }

    pub fn from_array(w: [f64; 5]) -> Self {
        Self {
            w_cp: w[0],
            w_ci: w[1],
            w_cn: w[2],
            w_bp: w[3],
            bias: w[4],
        }
    }

    /// Circulant state-to-state and basis-to-state matrices for an `n`-ring.
    pub fn matrices(&self, n: usize) -> (Matrix, Matrix) {
        let mut cc = Matrix::zeros(n, n);
        let mut cb = Matrix::zeros(n, n);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            cc[(i, prev)] += self.w_cp;
            cc[(i, i)] += self.w_ci;
            cc[(i, next)] += self.w_cn;
            cb[(i, prev)] += self.w_bp;
        }
        (cc, cb)
    }
}

/// Which set of CPG weights a network uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource {
    /// Exact solution of the boundary system.
    Solved,
    /// [`CpgWeights::ROUNDED`].
    Rounded,
}

/// Boundary matrix and right-hand side; unknowns ordered as
/// `(w_cp, w_ci, w_cn, w_bp, bias)`.
pub fn boundary_system(cfg: &CpgConfig) -> (Matrix, Vec<f64>) {
    let (i, e) = (cfg.iota, cfg.epsilon);
    #[rustfmt::skip]
    let m = Matrix::from_vec(5, 5, vec![
        i, e, e, i, 1.0, // previous state and previous basis active
        i, e, e, e, 1.0, // only previous state active
        e, e, e, i, 1.0, // only previous basis active
        e, i, e, e, 1.0, // self active
        i, i, i, i, 1.0, // next state active
    ])
    .expect("5x5");
    let w = cfg.omega;
    (m, vec![cfg.gamma_preactivation(), -w, -w, w, -w])
}

pub fn derive_cpg_weights(cfg: &CpgConfig) -> Result<CpgWeights> {
    if cfg.iota == cfg.epsilon {
        return Err(Error::Degenerate(format!(
            "boundary matrix is singular when iota == epsilon ({})",
            cfg.iota
        )));
    }
    let (m, rhs) = boundary_system(cfg);
    if !m.is_finite() || rhs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite boundary system".into()));
    }
    let x = solve_linear(&m, &rhs)
        .ok_or_else(|| Error::Degenerate("boundary matrix is singular".into()))?;
    Ok(CpgWeights::from_array([x[0], x[1], x[2], x[3], x[4]]))
}

/// Max-norm residual of `weights` in the boundary system of `cfg`.
pub fn boundary_residual(cfg: &CpgConfig, weights: &CpgWeights) -> f64 {
    let (m, rhs) = boundary_system(cfg);
    let lhs = m.mul_vec_unchecked(&weights.as_array());
    lhs.iter()
        .zip(&rhs)
        .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cpg_step(c: &[f64], b: &[f64], w: &CpgWeights) -> Result<Vec<f64>> {
    let n = c.len();
    check_len("cpg_step basis", n, b.len())?;
    let (cc, cb) = w.matrices(n);
    let drive = cc.mul_vec_unchecked(c);
    let from_basis = cb.mul_vec_unchecked(b);
    Ok(drive
        .iter()
        .zip(&from_basis)
        .map(|(x, y)| sigmoid(x + y + w.bias))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    pub w_tau: f64,
    /// Inhibition from the next CPG state.
    pub shape_next: f64,
    /// Inhibition from the second-next CPG state.
    pub shape_second: f64,
}

impl BasisConfig {
    /// Transition rate `w_tau` with shaping weights `0.5·w_tau` and `0.25·w_tau`.
    pub fn new(w_tau: f64) -> Self {
        Self {
            w_tau,
            shape_next: 0.5 * w_tau,
            shape_second: 0.25 * w_tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.w_tau && self.w_tau < 1.0) {
            return Err(Error::Config(format!(
                "w_tau must lie in (0,1), got {}",
                self.w_tau
            )));
        }
        if !self.shape_next.is_finite() || !self.shape_second.is_finite() {
            return Err(Error::Config("non-finite basis shaping weight".into()));
        }
        Ok(())
    }

    /// CPG-to-basis and basis-to-basis matrices for an `n`-ring.
    pub fn matrices(&self, n: usize) -> (Matrix, Matrix) {
        let mut bc = Matrix::zeros(n, n);
        let mut bb = Matrix::zeros(n, n);
        for i in 0..n {
            bc[(i, i)] += self.w_tau;
            bc[(i, (i + 1) % n)] -= self.shape_next;
            bc[(i, (i + 2) % n)] -= self.shape_second;
            bb[(i, i)] = 1.0 - self.w_tau;
        }
        (bc, bb)
    }
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self::new(DEFAULT_W_TAU)
    }
}

pub fn basis_step(c: &[f64], b: &[f64], cfg: &BasisConfig) -> Result<Vec<f64>> {
    let n = c.len();
    check_len("basis_step basis", n, b.len())?;
    let (bc, bb) = cfg.matrices(n);
    let from_cpg = bc.mul_vec_unchecked(c);
    let recurrent = bb.mul_vec_unchecked(b);
    Ok(from_cpg
        .iter()
        .zip(&recurrent)
        .map(|(x, y)| (x + y).max(0.0))
        .collect())
}

/// Learnable linear map from bases to joint commands, clipped to `±alpha_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    pub weights: Matrix,
    pub alpha_max: f64,
}

impl OutputMap {
    pub fn zeros(n_outputs: usize, n_states: usize) -> Self {
        Self {
            weights: Matrix::zeros(n_outputs, n_states),
            alpha_max: DEFAULT_ALPHA_MAX,
        }
    }

    pub fn new(weights: Matrix, alpha_max: f64) -> Result<Self> {
        if !weights.is_finite() {
            return Err(Error::Config("output map has non-finite entries".into()));
        }
        if !(alpha_max > 0.0) {
            return Err(Error::Config(format!(
                "alpha_max must be > 0, got {alpha_max}"
            )));
        }
        Ok(Self { weights, alpha_max })
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_states(&self) -> usize {
        self.weights.cols()
    }
}

impl Default for OutputMap {
    fn default() -> Self {
        Self::zeros(DEFAULT_N_OUTPUTS, DEFAULT_N_STATES)
    }
}

/// Clipped linear readout shared by both controllers.
pub fn clipped_linear(weights: &Matrix, features: &[f64], alpha_max: f64) -> Result<Vec<f64>> {
    Ok(weights
        .mul_vec(features)?
        .into_iter()
        .map(|x| x.clamp(-alpha_max, alpha_max))
        .collect())
}

pub fn output_step(b: &[f64], map: &OutputMap) -> Result<Vec<f64>> {
    clipped_linear(&map.weights, b, map.alpha_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub o: Vec<f64>,
}

/// Reset state: the first CPG and basis neurons start fully excited (`iota`),
/// the rest inhibited (`epsilon`), and all outputs at zero.
pub fn initial_state(cfg: &CpgConfig, n_outputs: usize) -> NetworkState {
    let n = cfg.n_states;
    let mut c = vec![cfg.epsilon; n];
    let mut b = vec![cfg.epsilon; n];
    if n > 0 {
        c[0] = cfg.iota;
        b[0] = cfg.iota;
    }
    NetworkState {
        c,
        b,
        o: vec![0.0; n_outputs],
    }
}

/// Everything needed to step an SME network.
#[derive(Debug, Clone, PartialEq)]
pub struct SmeParams {
    pub cpg: CpgWeights,
    pub basis: BasisConfig,
    pub output: OutputMap,
    pub baseline: BaselineMap,
}

impl SmeParams {
    pub fn new(cpg_cfg: &CpgConfig, source: WeightSource, basis: BasisConfig) -> Result<Self> {
        cpg_cfg.validate()?;
        basis.validate()?;
        let cpg = match source {
            WeightSource::Solved => derive_cpg_weights(cpg_cfg)?,
            WeightSource::Rounded => CpgWeights::ROUNDED,
        };
        Ok(Self {
            cpg,
            basis,
            output: OutputMap::zeros(DEFAULT_N_OUTPUTS, cpg_cfg.n_states),
            baseline: BaselineMap::zeros(cpg_cfg.n_states),
        })
    }
}

impl Default for SmeParams {
    fn default() -> Self {
        Self::new(
            &CpgConfig::default(),
            WeightSource::Solved,
            BasisConfig::default(),
        )
        .expect("default config is valid")
    }
}

/// Synchronous update: `c`, `b` and `o` at `t+1` all read time-`t` values.
pub fn network_step(state: &NetworkState, params: &SmeParams) -> Result<NetworkState> {
    check_len(
        "network_step outputs",
        params.output.n_outputs(),
        state.o.len(),
    )?;
    Ok(NetworkState {
        c: cpg_step(&state.c, &state.b, &params.cpg)?,
        b: basis_step(&state.c, &state.b, &params.basis)?,
        o: output_step(&state.b, &params.output)?,
    })
}

/// Runs `steps` updates from `start` and returns the visited states (excluding `start`).
pub fn simulate(
    start: &NetworkState,
    params: &SmeParams,
    steps: usize,
) -> Result<Vec<NetworkState>> {
    let mut trace = Vec::with_capacity(steps);
    let mut state = start.clone();
    for _ in 0..steps {
        state = network_step(&state, params)?;
        trace.push(state.clone());
    }
    Ok(trace)
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Mean number of steps between successive entries into state 0, measured
/// from the CPG argmax sequence. `None` if fewer than two entries are seen.
pub fn measure_cycle_period(trace: &[NetworkState]) -> Option<f64> {
    let entries = cycle_starts(trace.iter().map(|s| argmax(&s.c)));
    if entries.len() < 2 {
        return None;
    }
    Some((entries[entries.len() - 1] - entries[0]) as f64 / (entries.len() - 1) as f64)
}

/// Steps at which a sequence of winner indices enters 0 from another index.
pub fn cycle_starts(winners: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut prev = None;
    for (t, w) in winners.into_iter().enumerate() {
        if w == 0 && matches!(prev, Some(p) if p != 0) {
            starts.push(t);
        }
        prev = Some(w);
    }
    starts
}
