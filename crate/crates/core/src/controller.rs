//! Open-loop pattern generators that feed the learnable output map.
//!
//! Both controllers expose the same shape: a feature vector (SME bases or RBF
//! kernel activations) that evolves independently of the learned weights, and
//! a clipped linear readout `clip(W·features, ±alpha_max)`.

use std::fmt;
use std::str::FromStr;

use crate::cpgrbf::{rbf_activations, so2_step, RbfMap, So2Config};
use crate::error::{Error, Result};
use crate::sme::{
    basis_step, cpg_step, initial_state, BasisConfig, CpgConfig, CpgWeights, WeightSource,
    DEFAULT_N_OUTPUTS, DEFAULT_N_STATES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    Sme,
    CpgRbf,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Sme => "sme",
            ControllerKind::CpgRbf => "cpgrbf",
        })
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sme" => Ok(Self::Sme),
            "cpgrbf" | "cpg-rbf" => Ok(Self::CpgRbf),
            other => Err(Error::Config(format!("unknown controller '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmeRhythm {
    cpg_cfg: CpgConfig,
    weights: CpgWeights,
    basis: BasisConfig,
    c: Vec<f64>,
    b: Vec<f64>,
}

impl SmeRhythm {
    pub fn new(cpg_cfg: CpgConfig, source: WeightSource, basis: BasisConfig) -> Result<Self> {
        cpg_cfg.validate()?;
        basis.validate()?;
        let weights = match source {
            WeightSource::Solved => crate::sme::derive_cpg_weights(&cpg_cfg)?,
            WeightSource::Rounded => CpgWeights::ROUNDED,
        };
        let start = initial_state(&cpg_cfg, 0);
        Ok(Self {
            cpg_cfg,
            weights,
            basis,
            c: start.c,
            b: start.b,
        })
    }

    pub fn cpg(&self) -> &[f64] {
        &self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpgRbfRhythm {
    so2: So2Config,
    map: RbfMap,
    start: [f64; 2],
    state: [f64; 2],
    activations: Vec<f64>,
}

impl CpgRbfRhythm {
    pub fn new(so2: So2Config, n_kernels: usize) -> Result<Self> {
        let (map, start) = RbfMap::on_limit_cycle(&so2, n_kernels, 0)?;
        let activations = rbf_activations(start, &map)?;
        Ok(Self {
            so2,
            map,
            start,
            state: start,
            activations,
        })
    }

    pub fn oscillator(&self) -> [f64; 2] {
        self.state
    }

    pub fn map(&self) -> &RbfMap {
        &self.map
    }
}

/// Stateful feature generator for either controller.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhythm {
    Sme(SmeRhythm),
    CpgRbf(CpgRbfRhythm),
}

impl Rhythm {
    /// Default configuration of `kind` with four features.
    pub fn new(kind: ControllerKind) -> Result<Self> {
        match kind {
            ControllerKind::Sme => Ok(Rhythm::Sme(SmeRhythm::new(
                CpgConfig::default(),
                WeightSource::Solved,
                BasisConfig::default(),
            )?)),
            ControllerKind::CpgRbf => Ok(Rhythm::CpgRbf(CpgRbfRhythm::new(
                So2Config::default(),
                DEFAULT_N_STATES,
            )?)),
        }
    }

    pub fn kind(&self) -> ControllerKind {
        match self {
            Rhythm::Sme(_) => ControllerKind::Sme,
            Rhythm::CpgRbf(_) => ControllerKind::CpgRbf,
        }
    }

    pub fn n_features(&self) -> usize {
        self.features().len()
    }

    /// Features at the current step; the output for the next step reads these.
    pub fn features(&self) -> &[f64] {
        match self {
            Rhythm::Sme(r) => &r.b,
            Rhythm::CpgRbf(r) => &r.activations,
        }
    }

    /// Internal oscillator state (CPG neurons or the two SO(2) neurons).
    pub fn internal(&self) -> Vec<f64> {
        match self {
            Rhythm::Sme(r) => r.c.clone(),
            Rhythm::CpgRbf(r) => r.state.to_vec(),
        }
    }

    pub fn advance(&mut self) {
        match self {
            Rhythm::Sme(r) => {
                let c = cpg_step(&r.c, &r.b, &r.weights).expect("ring lengths agree");
                let b = basis_step(&r.c, &r.b, &r.basis).expect("ring lengths agree");
                r.c = c;
                r.b = b;
            }
            Rhythm::CpgRbf(r) => {
                r.state = so2_step(r.state, &r.so2);
                r.activations = rbf_activations(r.state, &r.map).expect("centers initialized");
            }
        }
    }

    pub fn reset(&mut self) {
        match self {
            Rhythm::Sme(r) => {
                let s = initial_state(&r.cpg_cfg, 0);
                r.c = s.c;
                r.b = s.b;
            }
            Rhythm::CpgRbf(r) => {
                r.state = r.start;
                r.activations = rbf_activations(r.start, &r.map).expect("centers initialized");
            }
        }
    }

    /// Feature trace of `steps` consecutive steps starting at the current state.
    pub fn feature_trace(&mut self, steps: usize) -> Vec<Vec<f64>> {
        (0..steps)
            .map(|_| {
                let f = self.features().to_vec();
                self.advance();
                f
            })
            .collect()
    }
}

/// Output count shared by both controllers in the hexapod configuration.
pub const N_OUTPUTS: usize = DEFAULT_N_OUTPUTS;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kind() {
        assert_eq!(
            "SME".parse::<ControllerKind>().unwrap(),
            ControllerKind::Sme
        );
        assert_eq!(
            "cpgrbf".parse::<ControllerKind>().unwrap(),
            ControllerKind::CpgRbf
        );
        assert!("mlp".parse::<ControllerKind>().is_err());
    }

    #[test]
    fn reset_restores_start() {
        for kind in [ControllerKind::Sme, ControllerKind::CpgRbf] {
            let mut r = Rhythm::new(kind).unwrap();
            let first = r.feature_trace(100);
            r.reset();
            assert_eq!(first, r.feature_trace(100));
            assert_eq!(r.n_features(), 4);
        }
    }
}
