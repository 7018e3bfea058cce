//! Entropy-regularized reinforcement-learning operators built around sparse
//! Tsallis policies, together with the tabular drivers, environments, and a
//! compact DQN-style agent used to compare three learning schemes:
//! regularized value iteration, log-policy reward bootstrapping, and
//! advantage-augmented value iteration.
//!
//! The crate is organized bottom-up:
//!
//! - [`policy`]: greedy-policy kernels (Boltzmann, sparsemax, general sparse
//!   Tsallis with exact and first-order realizations), entropy bonuses, and
//!   action-gap measurement;
//! - [`mdp`]: finite MDP container and a seeded random-MDP generator;
//! - [`operators`]: one-sweep Bellman operators for each scheme;
//! - [`tabular`]: fixed-point drivers, per-sweep diagnostics including the
//!   KL-identity residual, and CSV export;
//! - [`envs`]: a cart-pole control task with exact fixtures plus chain and
//!   gridworld MDP builders behind a common stepping interface;
//! - [`agent`]: a two-hidden-layer value network, replay buffer, analytic
//!   loss gradients for the advantage and log-policy schemes, and a training
//!   loop producing learning curves.

mod blas_hint;

pub mod agent;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod operators;
pub mod policy;
pub mod tabular;

pub use agent::{
    act, assemble_batch, mt_loss, tal_loss, train, Agent, AgentConfig, Batch, CurvePoint,
    LearningCurve, Mlp, ReplayBuffer, SchemeVariant, Transition,
};
pub use error::{AgentError, EnvError, MdpError, PolicyError, SchemeError};
pub use mdp::{
    random_mdp, uniform_policy, ActionValueTable, FiniteMdp, MdpGeneratorConfig, StochasticPolicy,
};
pub use operators::{
    cvi_sweep, greedy_and_value_row, hard_bellman_sweep, mdqn_sweep, soft_bellman_sweep, tal_sweep,
    tsallis_bellman_sweep, SchemeConfig, UpdateRule,
};
pub use policy::{
    action_gap, approx_tsallis_policy, exact_tsallis_policy_oracle, softmax_policy,
    sparse_value, sparsemax_policy, tsallis_entropy, EntropicIndex, PolicyRealization,
    PsiCorrection, RegularizerConfig, SparsePolicy, DEFAULT_LOG_POLICY_FLOOR,
    DEFAULT_TSALLIS_SCALE,
};
pub use tabular::{greedy_policy, kl_identity_residual, solve, IterationTrace};
