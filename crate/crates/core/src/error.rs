use thiserror::Error;

use crate::conditions::{Hypothesis, Location};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("the two-patch family needs exactly 2 patches, got {0}")]
    TwoPatchDimension(usize),
    #[error("hypothesis {hypothesis} violated on patch {patch} at {location}: value {value}")]
    HypothesisViolated {
        hypothesis: Hypothesis,
        patch: usize,
        location: Location,
        value: f64,
    },
    #[error("invariant-zone denominator is {value} <= 0 on patch {patch} at {location}")]
    NonpositiveDenominator {
        patch: usize,
        location: Location,
        value: f64,
    },
    #[error("invariant-zone condition fails on patch {patch} (margin {margin})")]
    ZoneViolated { patch: usize, margin: f64 },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("stage solve diverged at step {step} (residual {residual:e})")]
    StageSolveDiverged { step: usize, residual: f64 },
    #[error("non-finite state at step {step}")]
    NonfiniteState { step: usize },
    #[error("time {t} outside the trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("history has {got} components, system has {expected}")]
    HistoryDimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid Lyapunov configuration: {0}")]
    InvalidConfig(String),
    #[error("Lyapunov estimate not converged: checkpoints {history:?}")]
    NotConverged { history: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AttractorError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid pullback configuration: {0}")]
    InvalidConfig(String),
    #[error("pullback iteration did not converge by T = {t_max} (last values {last:?}, previous {previous:?})")]
    NoConvergence {
        t_max: f64,
        last: Vec<f64>,
        previous: Vec<f64>,
    },
}
