//! Training loop: epsilon-greedy data collection into a replay ring, a
//! gradient step on a fixed cadence, periodic hard copies into the frozen
//! network, and a learning curve sampled on a fixed step grid.

use rand::prelude::*;

use crate::envs::EnvInterface;
use crate::error::AgentError;
use crate::policy::{action_gap, RegularizerConfig};

use super::loss::{act, assemble_batch, mt_loss, tal_loss};
use super::mlp::{Adam, Dtype, Mlp};
use super::replay::{ReplayBuffer, Transition};

/// Which target the gradient step regresses on.
///
/// `Tal` adds the frozen-network advantage scaled by `beta`;
/// `MunchausenTsallis` adds the scaled, floored log-policy instead; and
/// `TsallisDqn` is plain regularized value iteration (the advantage scheme
/// with an effective `beta` of zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVariant {
    Tal,
    MunchausenTsallis,
    TsallisDqn,
}

/// Hyperparameters for [`train`]. `classic_control` provides the defaults
/// used throughout the experiments; individual fields can be overridden
/// after construction.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub reg: RegularizerConfig,
    pub variant: SchemeVariant,
    /// Advantage / log-policy scale. Ignored (treated as zero) by
    /// `TsallisDqn`.
    pub beta: f64,
    /// Scale on the log-policy bonus for `MunchausenTsallis`; `None` uses
    /// the family's own coefficient.
    pub munchausen_coeff: Option<f64>,
    /// Floor applied inside `ln` for the log-policy bonus.
    pub log_floor: f64,
    pub gamma: f64,
    /// Environment steps in total.
    pub total_steps: usize,
    /// Environment steps between gradient steps.
    pub grad_period: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps between hard copies into the frozen network.
    pub target_period: usize,
    /// Environment steps before the first gradient step.
    pub learning_starts: usize,
    /// Exploration rate, constant over training.
    pub epsilon: f64,
    pub hidden: usize,
    pub lr: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Environment steps between learning-curve records.
    pub record_period: usize,
    /// Number of early observations retained as fixed probe states for the
    /// action-gap diagnostic.
    pub probe_count: usize,
}

impl AgentConfig {
    /// Defaults for the classic-control experiments: 5e5 steps, a gradient
    /// step every 4 environment steps on batches of 128 from a 5e4 ring,
    /// target copies every 1e3 steps, 1e3 warmup steps, fixed epsilon 0.01,
    /// two hidden layers of 512 units trained with Adam at 1e-3.
    pub fn classic_control(reg: RegularizerConfig, variant: SchemeVariant) -> Self {
        Self {
            reg,
            variant,
            beta: 0.99,
            munchausen_coeff: None,
            log_floor: 1e-8,
            gamma: 0.99,
            total_steps: 500_000,
            grad_period: 4,
            batch_size: 128,
            buffer_capacity: 50_000,
            target_period: 1_000,
            learning_starts: 1_000,
            epsilon: 0.01,
            hidden: 512,
            lr: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            record_period: 10_000,
            probe_count: 64,
        }
    }

    /// The advantage scale actually applied: `TsallisDqn` always runs with
    /// zero regardless of the configured `beta`.
    pub fn effective_beta(&self) -> f64 {
        match self.variant {
            SchemeVariant::TsallisDqn => 0.0,
            _ => self.beta,
        }
    }

    fn validate(&self) -> Result<(), AgentError> {
        if self.batch_size == 0
            || self.total_steps == 0
            || self.grad_period == 0
            || self.target_period == 0
            || self.record_period == 0
            || self.hidden == 0
        {
            return Err(AgentError::Policy(crate::error::PolicyError::InvalidPolicy(
                "all period, size and width fields must be positive".into(),
            )));
        }
        Ok(())
    }
}

/// Networks, optimizer state and replay storage after (or during) training.
pub struct Agent<F: Dtype> {
    pub theta: Mlp<F>,
    pub theta_bar: Mlp<F>,
    pub buffer: ReplayBuffer,
    pub adam: Adam<F>,
}

impl<F: Dtype> Agent<F> {
    pub fn new(cfg: &AgentConfig, obs_dim: usize, n_actions: usize, net_seed: u64) -> Self {
        let theta = Mlp::init(obs_dim, cfg.hidden, n_actions, net_seed);
        let theta_bar = theta.clone();
        let adam = Adam::new(cfg.lr, cfg.adam_betas, cfg.adam_eps, theta.param_count());
        Agent {
            theta,
            theta_bar,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            adam,
        }
    }
}

/// One sample of the learning curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    /// Environment step at which the sample was taken.
    pub step: usize,
    /// Mean return over the trailing twenty completed episodes (zero before
    /// the first episode completes).
    pub episode_return_mean: f64,
    /// Mean gap between the best and second-best online action values over
    /// the fixed probe states.
    pub action_gap_mean: f64,
}

/// Learning curve plus the raw per-episode returns behind it.
#[derive(Debug, Clone, Default)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    /// `(environment step at episode end, undiscounted episode return)`.
    pub episode_returns: Vec<(usize, f64)>,
}

const TRAILING_WINDOW: usize = 20;

impl LearningCurve {
    fn window_mean(returns: &[(usize, f64)]) -> f64 {
        if returns.is_empty() {
            return 0.0;
        }
        let tail = &returns[returns.len().saturating_sub(TRAILING_WINDOW)..];
        tail.iter().map(|&(_, r)| r).sum::<f64>() / tail.len() as f64
    }

    /// Mean return over the final (up to) twenty completed episodes.
    pub fn final_trailing_mean(&self) -> f64 {
        Self::window_mean(&self.episode_returns)
    }

    /// Best trailing-twenty mean attained at any point during training.
    pub fn best_trailing_mean(&self) -> f64 {
        (1..=self.episode_returns.len())
            .map(|k| Self::window_mean(&self.episode_returns[..k]))
            .fold(0.0, f64::max)
    }

    /// CSV with header `step,episode_return_mean,action_gap_mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,episode_return_mean,action_gap_mean\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.17e},{:.17e}\n",
                p.step, p.episode_return_mean, p.action_gap_mean
            ));
        }
        out
    }
}

/// Run the configured scheme on `env` for `cfg.total_steps` environment
/// steps. All randomness (network init, exploration, replay sampling,
/// episode seeds) derives from `seed`, so runs are reproducible. Returns the
/// trained agent and the learning curve; a non-finite loss aborts with
/// [`AgentError::NanLoss`].
pub fn train<F: Dtype, E: EnvInterface>(
    env: &mut E,
    cfg: &AgentConfig,
    seed: u64,
) -> Result<(Agent<F>, LearningCurve), AgentError> {
    cfg.validate()?;
    let mut master = StdRng::seed_from_u64(seed);
    let net_seed: u64 = master.gen();
    let mut explore_rng = StdRng::seed_from_u64(master.gen());
    let mut sample_rng = StdRng::seed_from_u64(master.gen());
    let mut episode_rng = StdRng::seed_from_u64(master.gen());

    let mut agent = Agent::<F>::new(cfg, env.observation_dim(), env.n_actions(), net_seed);
    let mut curve = LearningCurve::default();
    let mut probes: Vec<Vec<f64>> = Vec::with_capacity(cfg.probe_count);
    let beta = cfg.effective_beta();

    let mut obs = env.reset(episode_rng.gen());
    let mut episode_return = 0.0;

    for step in 1..=cfg.total_steps {
        if probes.len() < cfg.probe_count {
            probes.push(obs.clone());
        }
        let action = act(&obs, &agent.theta, &cfg.reg, cfg.epsilon, &mut explore_rng)?;
        let outcome = env.step(action)?;
        agent.buffer.push(Transition {
            obs: obs.clone(),
            action,
            reward: outcome.reward,
            next_obs: outcome.observation.clone(),
            terminated: outcome.terminated,
        });
        episode_return += outcome.reward;
        if outcome.terminated || outcome.truncated {
            curve.episode_returns.push((step, episode_return));
            episode_return = 0.0;
            obs = env.reset(episode_rng.gen());
        } else {
            obs = outcome.observation;
        }

        if step >= cfg.learning_starts
            && step % cfg.grad_period == 0
            && agent.buffer.len() >= cfg.batch_size
        {
            let indices = agent.buffer.sample_indices(&mut sample_rng, cfg.batch_size);
            let batch = assemble_batch::<F>(&agent.buffer, &indices)?;
            let (loss, grads) = match cfg.variant {
                SchemeVariant::Tal | SchemeVariant::TsallisDqn => {
                    tal_loss(&agent.theta, &agent.theta_bar, &batch, &cfg.reg, cfg.gamma, beta)?
                }
                SchemeVariant::MunchausenTsallis => mt_loss(
                    &agent.theta,
                    &agent.theta_bar,
                    &batch,
                    &cfg.reg,
                    cfg.gamma,
                    beta,
                    cfg.munchausen_coeff,
                    cfg.log_floor,
                )?,
            };
            if !loss.is_finite() {
                return Err(AgentError::NanLoss {
                    step,
                    detail: format!(
                        "loss {loss}; max |grad| {:.3e}",
                        grads.max_abs().to_f64().unwrap_or(f64::NAN)
                    ),
                });
            }
            agent.adam.step(&mut agent.theta, &grads);
        }

        if step % cfg.target_period == 0 {
            agent.theta_bar = agent.theta.clone();
        }

        if step % cfg.record_period == 0 {
            curve.points.push(CurvePoint {
                step,
                episode_return_mean: LearningCurve::window_mean(&curve.episode_returns),
                action_gap_mean: probe_gap_mean(&agent.theta, &probes)?,
            });
        }
    }

    Ok((agent, curve))
}

/// Mean action gap of the online network over the probe observations.
fn probe_gap_mean<F: Dtype>(net: &Mlp<F>, probes: &[Vec<f64>]) -> Result<f64, AgentError> {
    if probes.is_empty() {
        return Ok(0.0);
    }
    let dim = probes[0].len();
    let mut x = ndarray::Array2::<F>::zeros((probes.len(), dim));
    for (r, p) in probes.iter().enumerate() {
        for (c, &v) in p.iter().enumerate() {
            x[[r, c]] = F::from(v).expect("finite observation");
        }
    }
    let q = net.forward(&x);
    let mut total = 0.0;
    for r in 0..probes.len() {
        let row: Vec<f64> = q.row(r).iter().map(|v| v.to_f64().expect("finite")).collect();
        total += action_gap(&row)?;
    }
    Ok(total / probes.len() as f64)
}
