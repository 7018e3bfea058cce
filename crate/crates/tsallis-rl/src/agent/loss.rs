//! Temporal-difference losses for the three learning schemes and the
//! behaviour policy. Targets are computed from the frozen network in `f64`;
//! gradients flow through the online network only. The loss is the batch
//! mean squared error between `Q(s, a)` and the scheme's target.

use ndarray::{concatenate, Array2, Axis};
use rand::prelude::*;

use crate::error::AgentError;
use crate::operators::greedy_and_value_row;
use crate::policy::{EntropicIndex, RegularizerConfig};

use super::mlp::{Dtype, Mlp, MlpGrads};
use super::replay::ReplayBuffer;

/// Minibatch in network element type, assembled from replay storage.
pub struct Batch<F> {
    pub obs: Array2<F>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_obs: Array2<F>,
    pub terminated: Vec<bool>,
}

impl<F> Batch<F> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Gather the transitions at `indices` into dense arrays.
pub fn assemble_batch<F: Dtype>(
    buffer: &ReplayBuffer,
    indices: &[usize],
) -> Result<Batch<F>, AgentError> {
    if indices.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let b = indices.len();
    let dim = buffer.get(indices[0]).obs.len();
    let mut obs = Array2::<F>::zeros((b, dim));
    let mut next_obs = Array2::<F>::zeros((b, dim));
    let mut actions = Vec::with_capacity(b);
    let mut rewards = Vec::with_capacity(b);
    let mut terminated = Vec::with_capacity(b);
    for (row, &idx) in indices.iter().enumerate() {
        let t = buffer.get(idx);
        for (c, &v) in t.obs.iter().enumerate() {
            obs[[row, c]] = F::from(v).expect("finite observation");
        }
        for (c, &v) in t.next_obs.iter().enumerate() {
            next_obs[[row, c]] = F::from(v).expect("finite observation");
        }
        actions.push(t.action);
        rewards.push(t.reward);
        terminated.push(t.terminated);
    }
    Ok(Batch {
        obs,
        actions,
        rewards,
        next_obs,
        terminated,
    })
}

struct FrozenRows {
    /// `Q̄` rows for the batch observations, in `f64`.
    q_s: Vec<Vec<f64>>,
    /// `Q̄` rows for the successor observations.
    q_sp: Vec<Vec<f64>>,
}

/// Evaluate the frozen network on observations and successors in a single
/// stacked forward pass.
fn frozen_rows<F: Dtype>(target_net: &Mlp<F>, batch: &Batch<F>) -> FrozenRows {
    let stacked = concatenate(Axis(0), &[batch.obs.view(), batch.next_obs.view()])
        .expect("matching widths");
    let q = target_net.forward(&stacked);
    let b = batch.len();
    let to_f64 = |r: usize| -> Vec<f64> {
        q.row(r).iter().map(|v| v.to_f64().expect("finite")).collect()
    };
    FrozenRows {
        q_s: (0..b).map(to_f64).collect(),
        q_sp: (b..2 * b).map(to_f64).collect(),
    }
}

fn inner(pi: &[f64], q: &[f64]) -> f64 {
    pi.iter().zip(q).map(|(p, v)| p * v).sum()
}

/// Shared epilogue: mean squared error between `Q(s_i, a_i)` and `y_i`, and
/// its gradient through the online network.
fn mse_and_grads<F: Dtype>(
    net: &Mlp<F>,
    batch: &Batch<F>,
    targets: &[f64],
) -> (f64, MlpGrads<F>) {
    let b = batch.len();
    let cache = net.forward_cached(batch.obs.clone());
    let mut dq = Array2::<F>::zeros(cache.q.raw_dim());
    let mut loss = 0.0;
    for i in 0..b {
        let qa = cache.q[[i, batch.actions[i]]].to_f64().unwrap_or(f64::NAN);
        let resid = qa - targets[i];
        loss += resid * resid;
        dq[[i, batch.actions[i]]] =
            F::from(2.0 * resid / b as f64).expect("residual fits element type");
    }
    loss /= b as f64;
    let grads = net.backward(&cache, &dq);
    (loss, grads)
}

/// Advantage-augmented loss: each target is
/// `r + gamma * ⟨π̄(s'), Q̄(s')⟩ * (1 − terminated) + beta * (Q̄(s, a) − ⟨π̄(s), Q̄(s)⟩)`
/// with `π̄` the greedy policy of the frozen network under `reg`. Returns the
/// scalar loss (`f64` regardless of element type) and the parameter
/// gradients of the online network. With `beta = 0` this is regularized
/// value iteration in loss form.
pub fn tal_loss<F: Dtype>(
    net: &Mlp<F>,
    target_net: &Mlp<F>,
    batch: &Batch<F>,
    reg: &RegularizerConfig,
    gamma: f64,
    beta: f64,
) -> Result<(f64, MlpGrads<F>), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let rows = frozen_rows(target_net, batch);
    let mut targets = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let (pi_s, _) = greedy_and_value_row(&rows.q_s[i], reg).map_err(scheme_to_policy)?;
        let (pi_sp, _) = greedy_and_value_row(&rows.q_sp[i], reg).map_err(scheme_to_policy)?;
        let v_s = inner(&pi_s, &rows.q_s[i]);
        let v_sp = inner(&pi_sp, &rows.q_sp[i]);
        let bootstrap = if batch.terminated[i] { 0.0 } else { gamma * v_sp };
        targets.push(
            batch.rewards[i] + bootstrap + beta * (rows.q_s[i][batch.actions[i]] - v_s),
        );
    }
    Ok(mse_and_grads(net, batch, &targets))
}

/// Log-policy-bootstrapping loss: the advantage term of [`tal_loss`] is
/// replaced by `beta * c * ln π̄(a|s)` with the log-policy floored at
/// `ln(delta)`. Under the Boltzmann family the log-policy is evaluated as
/// `(Q̄ − V̄)/τ` with `V̄` the log-sum-exp value (exact and free of `ln 0`);
/// sparse families take the literal floored logarithm. `coeff` defaults to
/// the family's own coefficient (`tau` for Boltzmann, `alpha` otherwise).
#[allow(clippy::too_many_arguments)]
pub fn mt_loss<F: Dtype>(
    net: &Mlp<F>,
    target_net: &Mlp<F>,
    batch: &Batch<F>,
    reg: &RegularizerConfig,
    gamma: f64,
    beta: f64,
    coeff: Option<f64>,
    delta: f64,
) -> Result<(f64, MlpGrads<F>), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let c = coeff.unwrap_or(match reg.index {
        EntropicIndex::Shannon => reg.tau,
        _ => reg.alpha,
    });
    let ln_floor = delta.ln();
    let rows = frozen_rows(target_net, batch);
    let mut targets = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let a = batch.actions[i];
        let (pi_s, v_reg) = greedy_and_value_row(&rows.q_s[i], reg).map_err(scheme_to_policy)?;
        let (pi_sp, _) = greedy_and_value_row(&rows.q_sp[i], reg).map_err(scheme_to_policy)?;
        let v_sp = inner(&pi_sp, &rows.q_sp[i]);
        let ln_pi_a = match reg.index {
            EntropicIndex::Shannon => ((rows.q_s[i][a] - v_reg) / reg.tau).max(ln_floor),
            _ => pi_s[a].max(delta).ln(),
        };
        let bootstrap = if batch.terminated[i] { 0.0 } else { gamma * v_sp };
        targets.push(batch.rewards[i] + bootstrap + beta * c * ln_pi_a);
    }
    Ok(mse_and_grads(net, batch, &targets))
}

fn scheme_to_policy(e: crate::error::SchemeError) -> AgentError {
    match e {
        crate::error::SchemeError::Policy(p) => AgentError::Policy(p),
        other => AgentError::Policy(crate::error::PolicyError::InvalidPolicy(other.to_string())),
    }
}

/// Behaviour policy: with probability `epsilon` a uniform action, otherwise
/// a sample from the greedy policy of the online network under `reg` (the
/// Boltzmann distribution for the Shannon family, the sparse greedy
/// distribution for Tsallis indices, the argmax for the hard family).
pub fn act<F: Dtype>(
    obs: &[f64],
    net: &Mlp<F>,
    reg: &RegularizerConfig,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize, AgentError> {
    let n_actions = net.out_dim();
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..n_actions));
    }
    let mut x = Array2::<F>::zeros((1, obs.len()));
    for (c, &v) in obs.iter().enumerate() {
        x[[0, c]] = F::from(v).expect("finite observation");
    }
    let q = net.forward(&x);
    let row: Vec<f64> = q.row(0).iter().map(|v| v.to_f64().expect("finite")).collect();
    let (pi, _) = greedy_and_value_row(&row, reg).map_err(scheme_to_policy)?;
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, &p) in pi.iter().enumerate() {
        acc += p;
        if draw < acc {
            return Ok(a);
        }
    }
    Ok(n_actions - 1)
}
