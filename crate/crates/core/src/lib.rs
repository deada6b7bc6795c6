//! Sequential motion executor (SME) locomotion controller, a CPG-RBF
//! comparison controller, episodic policy-search learners and a kinematic
//! hexapod surrogate.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod controller;
pub mod cpgrbf;
pub mod env;
pub mod error;
pub mod experiment;
pub mod export;
pub mod learners;
pub mod matrix;
pub mod sme;

pub use error::{Error, Result};
pub use matrix::Matrix;
