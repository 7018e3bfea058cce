//! Synchronous regularized Bellman sweeps over finite MDPs: soft value
//! iteration, the log-policy-bootstrapping recursion, the preference-function
//! recursion, and advantage-augmented Tsallis value iteration. Each operator
//! is one exact full sweep (every state updated from the previous table).

use ndarray::{Array1, Array2};

use crate::error::{MdpError, SchemeError};
use crate::mdp::{ActionValueTable, FiniteMdp, StochasticPolicy};
use crate::policy::{
    approx_tsallis_policy, argmax, exact_tsallis_policy_oracle, softmax_policy, sparsemax_policy,
    tsallis_entropy, EntropicIndex, PolicyRealization, RegularizerConfig,
    DEFAULT_LOG_POLICY_FLOOR,
};

/// Which iteration scheme a fixed-point driver should apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateRule {
    /// Boltzmann-greedy sweep with Shannon entropy bonus.
    SoftVi,
    /// Tsallis-greedy sweep with power-entropy bonus.
    TsallisVi,
    /// Unregularized greedy sweep.
    HardVi,
    /// Log-policy-bootstrapping sweep (reward augmented by the scaled,
    /// floored log-policy).
    Mdqn,
    /// Preference-function recursion on `Psi` with derived advantage
    /// coefficient `sigma / (sigma + tau)`.
    Cvi,
    /// Tsallis sweep plus explicit advantage term `beta * (Q - V)`.
    Tal,
}

/// Full configuration of an iteration scheme: regularizer, advantage
/// coefficient `beta` in [0, 1], KL coefficient `sigma` (preference recursion
/// only), and the positive floor applied to probabilities inside logarithms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub rule: UpdateRule,
    pub reg: RegularizerConfig,
    pub beta: f64,
    pub sigma: f64,
    pub munchausen_delta: f64,
}

impl SchemeConfig {
    pub fn new(rule: UpdateRule, reg: RegularizerConfig) -> Self {
        SchemeConfig {
            rule,
            reg,
            beta: 0.0,
            sigma: 0.0,
            munchausen_delta: DEFAULT_LOG_POLICY_FLOOR,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        self.reg.validate()?;
        if !(self.beta.is_finite() && (0.0..=1.0).contains(&self.beta)) {
            return Err(SchemeError::BadBeta(self.beta));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(SchemeError::BadSigma(self.sigma));
        }
        if !(self.munchausen_delta.is_finite() && self.munchausen_delta > 0.0) {
            return Err(SchemeError::BadDelta(self.munchausen_delta));
        }
        Ok(())
    }
}

fn check_table(mdp: &FiniteMdp, table: &Array2<f64>) -> Result<(), MdpError> {
    mdp.check_table(table)
}

/// Greedy policy and the regularized state value it attains for one row of
/// action values: the Boltzmann policy with log-sum-exp value for the Shannon
/// family, the sparse greedy policy (closed form at index 2, bisection or
/// first-order normalization otherwise, per the configured realization) with
/// `⟨π, Q⟩ +` entropy-bonus value for the Tsallis family, and the one-hot
/// argmax with max value for the hard family.
pub fn greedy_and_value_row(
    q_row: &[f64],
    reg: &RegularizerConfig,
) -> Result<(Vec<f64>, f64), SchemeError> {
    match reg.index {
        EntropicIndex::Shannon => {
            let (pi, v) = softmax_policy(q_row, reg.tau)?;
            Ok((pi, v))
        }
        EntropicIndex::Tsallis(q) => {
            let pi = if q == 2.0 {
                sparsemax_policy(q_row, reg.alpha)?.probs
            } else {
                match reg.realization {
                    PolicyRealization::Exact => exact_tsallis_policy_oracle(q_row, reg)?,
                    PolicyRealization::Approximate => approx_tsallis_policy(q_row, reg)?.probs,
                }
            };
            let inner: f64 = pi.iter().zip(q_row).map(|(p, v)| p * v).sum();
            let bonus = tsallis_entropy(&pi, reg)?;
            Ok((pi, inner + bonus))
        }
        EntropicIndex::HardMax => {
            let best = argmax(q_row);
            let mut pi = vec![0.0; q_row.len()];
            pi[best] = 1.0;
            Ok((pi, q_row[best]))
        }
    }
}

fn row_slice(table: &Array2<f64>, s: usize) -> &[f64] {
    table
        .row(s)
        .to_slice()
        .expect("tables are stored row-major")
}

/// One unregularized greedy sweep: `r + gamma * P * max_a Q`.
pub fn hard_bellman_sweep(mdp: &FiniteMdp, q: &ActionValueTable) -> Result<ActionValueTable, SchemeError> {
    check_table(mdp, q)?;
    let v = Array1::from_iter((0..mdp.n_states).map(|s| {
        row_slice(q, s)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }));
    Ok(&mdp.reward + &(mdp.expected_next(&v) * mdp.gamma))
}

/// Shared core of the Shannon-family log-policy recursion. Computes the
/// Boltzmann greedy of `q` at temperature `tau`, floors log-probabilities at
/// `ln(delta)`, and returns
/// `r + beta * tau * ln π + gamma * P ⟨π, Q − tau * ln π⟩` with the policy.
/// Log-probabilities are evaluated as `(Q − V)/tau` (exact for the Boltzmann
/// greedy and free of `ln 0`).
fn shannon_log_policy_sweep(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    tau: f64,
    beta: f64,
    delta: f64,
) -> Result<(ActionValueTable, StochasticPolicy), SchemeError> {
    check_table(mdp, q)?;
    let ln_floor = delta.ln();
    let n = mdp.n_states;
    let mut pi = Array2::<f64>::zeros((n, mdp.n_actions));
    let mut ln_pi = Array2::<f64>::zeros((n, mdp.n_actions));
    let mut boot = Array1::<f64>::zeros(n);
    for s in 0..n {
        let row = row_slice(q, s);
        let (p, v) = softmax_policy(row, tau)?;
        let mut b = 0.0;
        for a in 0..mdp.n_actions {
            let lp = ((row[a] - v) / tau).max(ln_floor);
            ln_pi[[s, a]] = lp;
            pi[[s, a]] = p[a];
            b += p[a] * (row[a] - tau * lp);
        }
        boot[s] = b;
    }
    let q_next = &mdp.reward + &(ln_pi * (beta * tau)) + &(mdp.expected_next(&boot) * mdp.gamma);
    Ok((q_next, pi))
}

/// One sweep of soft value iteration: Boltzmann greedy of `Q` at temperature
/// `tau`, bootstrap `⟨π, Q − tau ln π⟩` (the log-sum-exp state value).
pub fn soft_bellman_sweep(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    tau: f64,
) -> Result<ActionValueTable, SchemeError> {
    Ok(shannon_log_policy_sweep(mdp, q, tau, 0.0, DEFAULT_LOG_POLICY_FLOOR)?.0)
}

/// Shared core of the advantage-augmented regularized sweep:
/// `r + gamma * P * V + beta * (Q − V)` where `(π, V)` come from
/// [`greedy_and_value_row`] under the configured family.
fn advantage_sweep(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    reg: &RegularizerConfig,
    beta: f64,
) -> Result<(ActionValueTable, StochasticPolicy), SchemeError> {
    check_table(mdp, q)?;
    let n = mdp.n_states;
    let mut pi = Array2::<f64>::zeros((n, mdp.n_actions));
    let mut v = Array1::<f64>::zeros(n);
    for s in 0..n {
        let (p, val) = greedy_and_value_row(row_slice(q, s), reg)?;
        for a in 0..mdp.n_actions {
            pi[[s, a]] = p[a];
        }
        v[s] = val;
    }
    let mut q_next = &mdp.reward + &(mdp.expected_next(&v) * mdp.gamma);
    if beta != 0.0 {
        for s in 0..n {
            for a in 0..mdp.n_actions {
                q_next[[s, a]] += beta * (q[[s, a]] - v[s]);
            }
        }
    }
    Ok((q_next, pi))
}

/// One sweep of Tsallis-regularized value iteration: sparse greedy of `Q`
/// (per the configured index and realization), bootstrap
/// `⟨π, Q⟩ + alpha * (k/(q−1)) * (1 − Σ π^q)`.
pub fn tsallis_bellman_sweep(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    reg: &RegularizerConfig,
) -> Result<ActionValueTable, SchemeError> {
    match reg.index {
        EntropicIndex::Tsallis(_) => {}
        EntropicIndex::Shannon => return Err(SchemeError::Policy(
            crate::error::PolicyError::InvalidIndex(1.0),
        )),
        EntropicIndex::HardMax => return Err(SchemeError::Policy(
            crate::error::PolicyError::InvalidIndex(f64::INFINITY),
        )),
    }
    if reg.alpha.is_nan() || reg.alpha <= 0.0 {
        return Err(SchemeError::Policy(crate::error::PolicyError::InvalidAlpha(
            reg.alpha,
        )));
    }
    Ok(advantage_sweep(mdp, q, reg, 0.0)?.0)
}

/// One sweep of the log-policy-bootstrapping recursion:
/// `Q' = r + beta * tau * ln π + gamma * P ⟨π, Q − tau * ln π⟩` with `π` the
/// Boltzmann greedy under the Shannon family and the sparse Tsallis greedy
/// otherwise, and `ln π` floored at `ln(delta)` so sparse policies stay
/// finite. Returns the new table and the policy.
///
/// `pi_prev` is accepted for interface compatibility with the identity
/// diagnostics that consume consecutive `(Q, π)` pairs; the update itself
/// depends only on `Q`.
pub fn mdqn_sweep(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    pi_prev: &StochasticPolicy,
    cfg: &SchemeConfig,
) -> Result<(ActionValueTable, StochasticPolicy), SchemeError> {
    let _ = pi_prev;
    cfg.validate()?;
    let tau = cfg.reg.tau;
    if tau.is_nan() || tau <= 0.0 {
        return Err(SchemeError::Policy(crate::error::PolicyError::InvalidTau(
            tau,
        )));
    }
    match cfg.reg.index {
        EntropicIndex::Shannon => {
            shannon_log_policy_sweep(mdp, q, tau, cfg.beta, cfg.munchausen_delta)
        }
        _ => {
            check_table(mdp, q)?;
            let n = mdp.n_states;
            let delta = cfg.munchausen_delta;
            let mut pi = Array2::<f64>::zeros((n, mdp.n_actions));
            let mut ln_pi = Array2::<f64>::zeros((n, mdp.n_actions));
            let mut boot = Array1::<f64>::zeros(n);
            for s in 0..n {
                let row = row_slice(q, s);
                let (p, _) = greedy_and_value_row(row, &cfg.reg)?;
                let mut b = 0.0;
                for a in 0..mdp.n_actions {
                    let lp = p[a].max(delta).ln();
                    ln_pi[[s, a]] = lp;
                    pi[[s, a]] = p[a];
                    b += p[a] * (row[a] - tau * lp);
                }
                boot[s] = b;
            }
            let q_next = &mdp.reward
                + &(ln_pi * (cfg.beta * tau))
                + &(mdp.expected_next(&boot) * mdp.gamma);
            Ok((q_next, pi))
        }
    }
}

/// One sweep of the preference-function recursion: with temperature
/// `t = sigma + tau` and derived advantage coefficient
/// `beta = sigma / (sigma + tau)`, the policy is Boltzmann in `Psi` at
/// temperature `t`, the state value is `W = ⟨π, Psi − t ln π⟩`, and
/// `Psi' = r + gamma * P * W + beta * (Psi − W)`.
pub fn cvi_sweep(
    mdp: &FiniteMdp,
    psi: &ActionValueTable,
    cfg: &SchemeConfig,
) -> Result<(ActionValueTable, StochasticPolicy), SchemeError> {
    cfg.validate()?;
    check_table(mdp, psi)?;
    let t = cfg.sigma + cfg.reg.tau;
    if t.is_nan() || t <= 0.0 {
        return Err(SchemeError::BadPreferenceTemperature(t));
    }
    let beta = cfg.sigma / t;
    let ln_floor = cfg.munchausen_delta.ln();
    let n = mdp.n_states;
    let mut pi = Array2::<f64>::zeros((n, mdp.n_actions));
    let mut w = Array1::<f64>::zeros(n);
    for s in 0..n {
        let row = row_slice(psi, s);
        let (p, v) = softmax_policy(row, t)?;
        let mut b = 0.0;
        for a in 0..mdp.n_actions {
            let lp = ((row[a] - v) / t).max(ln_floor);
            pi[[s, a]] = p[a];
            b += p[a] * (row[a] - t * lp);
        }
        w[s] = b;
    }
    let mut psi_next = &mdp.reward + &(mdp.expected_next(&w) * mdp.gamma);
    for s in 0..n {
        for a in 0..mdp.n_actions {
            psi_next[[s, a]] += beta * (psi[[s, a]] - w[s]);
        }
    }
    Ok((psi_next, pi))
}

/// One advantage-learning sweep: greedy policy and regularized value `(π, V)`
/// under the configured family, then
/// `Q' = r + gamma * P * V + beta * (Q − V)`.
///
/// With `beta = 0` this is exactly one regularized value-iteration sweep;
/// under the hard family it is classic advantage learning
/// (`r + gamma * P * max Q + beta * (Q − max Q)`).
pub fn tal_sweep(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    cfg: &SchemeConfig,
) -> Result<(ActionValueTable, StochasticPolicy), SchemeError> {
    cfg.validate()?;
    advantage_sweep(mdp, q, &cfg.reg, cfg.beta)
}
