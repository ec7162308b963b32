//! Simulation and model-selection engine for a continuously monitored
//! nanoparticle in a double-well Duffing trap.
//!
//! The crate generates measurement time traces from either a quantum
//! (stochastic master equation) or classical (stochastic differential
//! equation) dynamical model, runs the competing conditional filters against
//! any trace, and applies Bayesian / Neyman-Pearson selection to decide which
//! model produced the data. Decision quality is quantified by Monte Carlo
//! confusion matrices and ROC curves over temperature × measurement-efficiency
//! grids.

pub mod error;
pub mod linalg;
pub mod operators;
pub mod seeds;
pub mod trace;
pub mod classical;
pub mod particle;
pub mod quantum;
pub mod selector;
pub mod experiment;
pub mod config;

pub use error::{QcError, Result};
