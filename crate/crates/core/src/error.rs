use thiserror::Error;

use crate::torus::TorusPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid map spec: {0}")]
    InvalidSpec(String),

    #[error("singular jacobian at {point:?}: smallest singular value {sigma_min:e}")]
    SingularJacobian { point: TorusPoint, sigma_min: f64 },

    #[error("hypothesis {name} violated at {point:?}: {quantity} = {value}")]
    HypothesisViolated {
        name: &'static str,
        point: TorusPoint,
        quantity: &'static str,
        value: f64,
    },

    #[error("no feasible expansion constants: {0}")]
    ConstantsInfeasible(String),

    #[error("perturbed spec at fiber {fiber}, step {step} leaves the class: {reason}")]
    PerturbationOutOfClass {
        fiber: u64,
        step: usize,
        reason: String,
    },

    #[error("pliss hypothesis unmet: {0}")]
    HypothesisUnmet(String),

    #[error("could not place probe within eps0 = {eps0:e} at time {time}")]
    ProbeNotFound { eps0: f64, time: usize },

    #[error("degenerate cocycle at step {step}: diagonal entry {value:e}")]
    DegenerateCocycle { step: usize, value: f64 },

    #[error("candidate grid too coarse: 2^-{grid_k} >= eps/4 with eps = {eps}")]
    GridTooCoarse { grid_k: u32, eps: f64 },

    #[error("fiber {fiber} has {atoms} atoms for {words} observed words")]
    InsufficientAtoms {
        fiber: u64,
        atoms: usize,
        words: usize,
    },

    #[error("no candidate measure lies in K_alpha (alpha = {alpha})")]
    NoCandidateInClass { alpha: f64 },

    #[error("horizon {horizon} too short for request of {requested} steps")]
    HorizonExceeded { horizon: usize, requested: usize },

    #[error("config error at line {line}, key `{key}`: {msg}")]
    Config {
        line: usize,
        key: String,
        msg: String,
    },

    #[error("parse error: {0}")]
    Parse(String),
}
