//! Finite-MDP builders used at desk scale — a slippery chain and a noisy
//! gridworld — plus an adapter that samples any finite MDP as an episodic
//! environment with one-hot observations.

use ndarray::{Array2, Array3};
use rand::prelude::*;

use crate::error::{EnvError, MdpError};
use crate::mdp::FiniteMdp;

use super::{EnvInterface, StepOutcome};

/// Chain of `n` states with the rightmost state an absorbing goal. Action 1
/// moves right, action 0 moves left (bumping at the left end); each move
/// slips to the opposite direction with probability `slip`. The reward of a
/// state-action pair is the probability of landing on the goal, so with no
/// slip the leftmost state is worth `gamma^(n-2)`: the goal-entering move is
/// the `(n-1)`-th and earns 1.
pub fn chain_mdp(n: usize, slip: f64, gamma: f64) -> Result<FiniteMdp, MdpError> {
    if n < 2 {
        return Err(MdpError::EmptyMdp);
    }
    if !(slip.is_finite() && (0.0..=0.5).contains(&slip)) {
        return Err(MdpError::BadParameter(format!(
            "slip probability {slip} must lie in [0, 0.5]"
        )));
    }
    let goal = n - 1;
    let mut transition = Array3::<f64>::zeros((n, 2, n));
    let mut reward = Array2::<f64>::zeros((n, 2));
    for s in 0..n {
        if s == goal {
            for a in 0..2 {
                transition[[s, a, goal]] = 1.0;
            }
            continue;
        }
        let right = (s + 1).min(goal);
        let left = s.saturating_sub(1);
        for (a, (hit, miss)) in [(left, right), (right, left)].into_iter().enumerate() {
            transition[[s, a, hit]] += 1.0 - slip;
            transition[[s, a, miss]] += slip;
            reward[[s, a]] = transition[[s, a, goal]];
        }
    }
    FiniteMdp::new(transition, reward, gamma)
}

/// Gridworld of `width * height` cells plus a sink. Cell `(x, y)` has state
/// id `y * width + x`; actions are 0 north (`y-1`), 1 south (`y+1`), 2 west
/// (`x-1`), 3 east (`x+1`), bumping against walls. A move goes in the
/// intended direction with probability `1 - noise`, and to each
/// perpendicular direction with probability `noise / 2`. Acting from the
/// goal cell earns reward 1 and drops into the absorbing zero-reward sink,
/// so with no noise a cell's value is `gamma` to the power of its Manhattan
/// distance from the goal.
pub fn gridworld(
    width: usize,
    height: usize,
    goal: (usize, usize),
    noise: f64,
    gamma: f64,
) -> Result<FiniteMdp, MdpError> {
    if width == 0 || height == 0 {
        return Err(MdpError::EmptyMdp);
    }
    if goal.0 >= width || goal.1 >= height {
        return Err(MdpError::BadParameter(format!(
            "goal {goal:?} outside a {width} x {height} grid"
        )));
    }
    if !(noise.is_finite() && (0.0..=1.0).contains(&noise)) {
        return Err(MdpError::BadParameter(format!(
            "noise probability {noise} must lie in [0, 1]"
        )));
    }
    let n_cells = width * height;
    let sink = n_cells;
    let n = n_cells + 1;
    let goal_id = goal.1 * width + goal.0;
    let mut transition = Array3::<f64>::zeros((n, 4, n));
    let mut reward = Array2::<f64>::zeros((n, 4));
    let moved = |x: usize, y: usize, dir: usize| -> usize {
        let (nx, ny) = match dir {
            0 => (x, y.saturating_sub(1)),
            1 => (x, (y + 1).min(height - 1)),
            2 => (x.saturating_sub(1), y),
            _ => ((x + 1).min(width - 1), y),
        };
        ny * width + nx
    };
    for y in 0..height {
        for x in 0..width {
            let s = y * width + x;
            if s == goal_id {
                for a in 0..4 {
                    transition[[s, a, sink]] = 1.0;
                    reward[[s, a]] = 1.0;
                }
                continue;
            }
            for a in 0..4 {
                let perpendicular = if a < 2 { [2, 3] } else { [0, 1] };
                transition[[s, a, moved(x, y, a)]] += 1.0 - noise;
                for p in perpendicular {
                    transition[[s, a, moved(x, y, p)]] += noise / 2.0;
                }
            }
        }
    }
    for a in 0..4 {
        transition[[sink, a, sink]] = 1.0;
    }
    FiniteMdp::new(transition, reward, gamma)
}

/// Samples a finite MDP as an episodic environment: observations are one-hot
/// state encodings, episodes start from a fixed state, end on entering a
/// designated terminal state, and truncate at a horizon.
#[derive(Clone, Debug)]
pub struct FiniteMdpEnv {
    mdp: FiniteMdp,
    terminal: Vec<bool>,
    start_state: usize,
    horizon: u32,
    state: usize,
    steps: u32,
    done: bool,
    rng: StdRng,
}

impl FiniteMdpEnv {
    pub fn new(
        mdp: FiniteMdp,
        terminal_states: &[usize],
        start_state: usize,
        horizon: u32,
    ) -> Result<Self, EnvError> {
        if start_state >= mdp.n_states || horizon == 0 {
            return Err(EnvError::InvalidDims(format!(
                "start state {start_state} / horizon {horizon} for {} states",
                mdp.n_states
            )));
        }
        let mut terminal = vec![false; mdp.n_states];
        for &t in terminal_states {
            if t >= mdp.n_states {
                return Err(EnvError::InvalidDims(format!(
                    "terminal state {t} out of range"
                )));
            }
            terminal[t] = true;
        }
        if terminal[start_state] {
            return Err(EnvError::InvalidDims(
                "start state must not be terminal".into(),
            ));
        }
        Ok(FiniteMdpEnv {
            terminal,
            start_state,
            horizon,
            state: start_state,
            steps: 0,
            done: true,
            rng: StdRng::seed_from_u64(0),
            mdp,
        })
    }

    fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.mdp.n_states];
        v[s] = 1.0;
        v
    }

    pub fn current_state(&self) -> usize {
        self.state
    }
}

impl EnvInterface for FiniteMdpEnv {
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = StdRng::seed_from_u64(seed);
        self.state = self.start_state;
        self.steps = 0;
        self.done = false;
        self.one_hot(self.state)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= self.mdp.n_actions {
            return Err(EnvError::InvalidAction {
                action,
                n_actions: self.mdp.n_actions,
            });
        }
        let draw: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut next = self.mdp.n_states - 1;
        for sp in 0..self.mdp.n_states {
            acc += self.mdp.transition[[self.state, action, sp]];
            if draw < acc {
                next = sp;
                break;
            }
        }
        let reward = self.mdp.reward[[self.state, action]];
        self.state = next;
        self.steps += 1;
        let terminated = self.terminal[next];
        let truncated = !terminated && self.steps >= self.horizon;
        self.done = terminated || truncated;
        Ok(StepOutcome {
            observation: self.one_hot(next),
            reward,
            terminated,
            truncated,
        })
    }

    fn observation_dim(&self) -> usize {
        self.mdp.n_states
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions
    }
}
