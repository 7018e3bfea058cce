//! Error types shared across the library.

use thiserror::Error;

/// Errors from the per-state policy kernels.
#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("input vector is empty")]
    EmptyInput,
    #[error("input contains a non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("operation requires at least {required} actions, got {got}")]
    NotEnoughActions { required: usize, got: usize },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("regularization coefficient must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("entropy scale k must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("entropic index {0} is outside the supported range for this operation")]
    InvalidIndex(f64),
    #[error("probability vector invalid: {0}")]
    InvalidPolicy(String),
    #[error("root bracketing failed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
}

/// Errors from finite-MDP construction and generation.
#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("MDP must have at least one state and one action")]
    EmptyMdp,
    #[error("transition row (s={state}, a={action}) sums to {sum}, expected 1 within 1e-12")]
    BadTransitionRow { state: usize, action: usize, sum: f64 },
    #[error("transition entry (s={state}, a={action}) contains a negative or non-finite probability")]
    BadTransitionEntry { state: usize, action: usize },
    #[error("discount factor must lie in (0, 1), got {0}")]
    BadGamma(f64),
    #[error("reward table contains a non-finite entry at (s={state}, a={action})")]
    BadReward { state: usize, action: usize },
    #[error("table shape {got:?} does not match MDP shape {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("branching factor {branching} exceeds the number of states {n_states}")]
    BadBranching { branching: usize, n_states: usize },
    #[error("reward range ({0}, {1}) is empty or non-finite")]
    BadRewardRange(f64, f64),
    #[error("builder parameter out of range: {0}")]
    BadParameter(String),
    #[error("value table contains a non-finite entry at (s={state}, a={action})")]
    NonFiniteTableEntry { state: usize, action: usize },
}

/// Errors from scheme configuration used by the sweep operators.
#[derive(Debug, Error, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("advantage coefficient beta must lie in [0, 1], got {0}")]
    BadBeta(f64),
    #[error("KL coefficient sigma must be >= 0 and finite, got {0}")]
    BadSigma(f64),
    #[error("sigma + tau must be positive for the preference recursion, got {0}")]
    BadPreferenceTemperature(f64),
    #[error("log-policy floor must be positive and finite, got {0}")]
    BadDelta(f64),
}

/// Errors from environment stepping.
#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("episode already finished; call reset before stepping again")]
    EpisodeFinished,
    #[error("action {action} is out of range for an environment with {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("invalid environment dimensions: {0}")]
    InvalidDims(String),
}

/// Errors from the deep agent.
#[derive(Debug, Error)]
pub enum AgentError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("replay buffer holds {len} transitions, need at least {need} to sample")]
    BufferTooSmall { len: usize, need: usize },
    #[error("loss became non-finite at environment step {step}: {detail}")]
    NanLoss { step: usize, detail: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
