//! Environments behind a common stepping interface: a cart-pole balancing
//! task with a deterministic explicit-Euler integrator, and finite-MDP
//! builders (slippery chain, noisy gridworld) plus a sampler that exposes
//! any [`crate::mdp::FiniteMdp`] as an episodic environment with one-hot
//! observations.

mod cartpole;
mod finite;

pub use cartpole::{cartpole_step, CartPole, CARTPOLE_EPISODE_LIMIT};
pub use finite::{chain_mdp, gridworld, FiniteMdpEnv};

use crate::error::EnvError;

/// Result of one environment step. `terminated` marks absorbing failure or
/// goal states (no value should be bootstrapped past them); `truncated`
/// marks an episode cut off by a step limit while the state is still viable
/// (bootstrapping past it is legitimate). The two are mutually exclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Minimal episodic environment interface: deterministic given the reset
/// seed and the action sequence.
pub trait EnvInterface {
    /// Start a new episode; returns the initial observation.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    /// Advance one step. Stepping a finished episode is an error.
    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError>;
    /// Length of observation vectors.
    fn observation_dim(&self) -> usize;
    /// Number of discrete actions.
    fn n_actions(&self) -> usize;
}
