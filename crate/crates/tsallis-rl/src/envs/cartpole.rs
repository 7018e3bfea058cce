//! Cart-pole balancing with the classic explicit-Euler physics: a pole
//! hinged on a cart on a frictionless track, two actions (push left/right
//! with fixed force), reward 1 per step, episode ends when the cart leaves
//! `±2.4` or the pole tips past 12 degrees, truncation at 500 steps.

use rand::prelude::*;

use crate::error::EnvError;

use super::{EnvInterface, StepOutcome};

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const DT: f64 = 0.02;
const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const X_LIMIT: f64 = 2.4;
const INIT_BOUND: f64 = 0.05;

/// Steps before a still-alive episode is truncated.
pub const CARTPOLE_EPISODE_LIMIT: u32 = 500;

/// One explicit-Euler update of the cart-pole dynamics. State layout is
/// `[x, x_dot, theta, theta_dot]`; action 0 pushes left, 1 pushes right.
/// Positions integrate with the pre-update velocities.
pub fn cartpole_step(state: [f64; 4], action: usize) -> [f64; 4] {
    let [x, x_dot, theta, theta_dot] = state;
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    let cos_theta = theta.cos();
    let sin_theta = theta.sin();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_theta) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_theta * cos_theta / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS;
    [
        x + DT * x_dot,
        x_dot + DT * x_acc,
        theta + DT * theta_dot,
        theta_dot + DT * theta_acc,
    ]
}

fn out_of_bounds(state: &[f64; 4]) -> bool {
    state[0].abs() > X_LIMIT || state[2].abs() > THETA_LIMIT
}

/// Episodic cart-pole environment. Initial states are drawn uniformly from
/// `[-0.05, 0.05]^4` by the reset seed; dynamics are deterministic.
#[derive(Clone, Debug)]
pub struct CartPole {
    state: [f64; 4],
    steps: u32,
    done: bool,
}

impl CartPole {
    pub fn new() -> Self {
        CartPole {
            state: [0.0; 4],
            steps: 0,
            done: true,
        }
    }

    /// Start an episode from an explicit state (for fixtures and probes).
    pub fn with_state(state: [f64; 4]) -> Self {
        CartPole {
            state,
            steps: 0,
            done: out_of_bounds(&state),
        }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl EnvInterface for CartPole {
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        for slot in self.state.iter_mut() {
            *slot = rng.gen_range(-INIT_BOUND..INIT_BOUND);
        }
        self.steps = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= 2 {
            return Err(EnvError::InvalidAction {
                action,
                n_actions: 2,
            });
        }
        self.state = cartpole_step(self.state, action);
        self.steps += 1;
        let terminated = out_of_bounds(&self.state);
        let truncated = !terminated && self.steps >= CARTPOLE_EPISODE_LIMIT;
        self.done = terminated || truncated;
        Ok(StepOutcome {
            observation: self.state.to_vec(),
            reward: 1.0,
            terminated,
            truncated,
        })
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        2
    }
}
