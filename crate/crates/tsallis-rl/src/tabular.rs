//! Fixed-point drivers for the sweep operators, per-sweep diagnostics
//! (residual, mean action gap, mean entropy bonus, KL-identity residual),
//! and CSV export of iteration traces.

use ndarray::{Array1, Array2};

use crate::error::SchemeError;
use crate::mdp::{ActionValueTable, FiniteMdp, StochasticPolicy};
use crate::operators::{
    cvi_sweep, greedy_and_value_row, hard_bellman_sweep, mdqn_sweep, soft_bellman_sweep, tal_sweep,
    tsallis_bellman_sweep, SchemeConfig, UpdateRule,
};
use crate::policy::{action_gap, softmax_policy, EntropicIndex, DEFAULT_LOG_POLICY_FLOOR};

/// Per-sweep history of a fixed-point run.
///
/// `residuals[k]` is the sup-norm change of the table at sweep `k`,
/// `mean_gaps[k]` the mean over states of the gap between the best and
/// second-best action values (0 for single-action MDPs), `mean_entropies[k]`
/// the mean unscaled policy entropy under the scheme's family (natural-log
/// Shannon entropy for the Boltzmann family, the power form with the
/// configured scale `k` for the sparse family, 0 for the hard family), and
/// `kl_residuals[k]` the log-policy identity residual (recorded only for the
/// log-policy-bootstrapping rule at full advantage weight, `None` otherwise).
#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    pub residuals: Vec<f64>,
    pub mean_gaps: Vec<f64>,
    pub mean_entropies: Vec<f64>,
    pub kl_residuals: Vec<Option<f64>>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn n_sweeps(&self) -> usize {
        self.residuals.len()
    }

    /// Render the trace as CSV with header
    /// `sweep,residual,mean_gap,mean_entropy,kl_residual`; the last column is
    /// empty on sweeps where the identity residual was not recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,residual,mean_gap,mean_entropy,kl_residual\n");
        for k in 0..self.n_sweeps() {
            let kl = match self.kl_residuals.get(k).copied().flatten() {
                Some(v) => format!("{v:.17e}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{}\n",
                k, self.residuals[k], self.mean_gaps[k], self.mean_entropies[k], kl
            ));
        }
        out
    }
}

fn floored_renormalized_log(pi_row: &[f64], delta: f64) -> Vec<f64> {
    let floored: Vec<f64> = pi_row.iter().map(|p| p.max(delta)).collect();
    let sum: f64 = floored.iter().sum();
    floored.iter().map(|p| (p / sum).ln()).collect()
}

/// Unscaled entropy of a policy row under an entropic family: Shannon
/// entropy in nats, the power form `k/(q−1) (1 − Σ π^q)`, or 0.
fn family_entropy(pi_row: &[f64], index: EntropicIndex, k: f64) -> f64 {
    match index {
        EntropicIndex::Shannon => pi_row
            .iter()
            .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
            .sum(),
        EntropicIndex::Tsallis(q) => {
            let s: f64 = pi_row.iter().map(|&p| p.powf(q)).sum();
            k / (q - 1.0) * (1.0 - s)
        }
        EntropicIndex::HardMax => 0.0,
    }
}

/// Sup-norm residual of the implicit-KL identity satisfied by one sweep of
/// the log-policy-bootstrapping recursion at full advantage weight.
///
/// The recursion's reward augmentation is exact KL regularization only when
/// the scaled log-policy equals the advantage `Q − V` under the Boltzmann
/// greedy at temperature `tau`. This diagnostic therefore compares
///
/// `Q_{k+1} − (Q_k − V_tau(Q_k))`
///
/// against the KL-regularized evaluation of the sweep's actual policies,
///
/// `r + gamma * P [⟨π_{k+1}, Q_k − tau ln π_k⟩ − tau * KL(π_{k+1} ‖ π_k)]`,
///
/// where the logarithms of the passed policies are floored at `delta` and
/// renormalized. Under the Boltzmann family both sides agree to rounding
/// error; sparse greedy families break the identity because their
/// log-policies diverge from `(Q − V)/tau` on and off support.
pub fn kl_identity_residual(
    q_k: &ActionValueTable,
    q_next: &ActionValueTable,
    pi_k: &StochasticPolicy,
    pi_next: &StochasticPolicy,
    mdp: &FiniteMdp,
    tau: f64,
) -> Result<f64, SchemeError> {
    mdp.check_table(q_k)?;
    mdp.check_table(q_next)?;
    mdp.check_table(pi_k)?;
    mdp.check_table(pi_next)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(SchemeError::Policy(crate::error::PolicyError::InvalidTau(
            tau,
        )));
    }
    let delta = DEFAULT_LOG_POLICY_FLOOR;
    let n = mdp.n_states;
    let m = mdp.n_actions;
    let mut boot = Array1::<f64>::zeros(n);
    let mut lhs = Array2::<f64>::zeros((n, m));
    for s in 0..n {
        let qk_row: Vec<f64> = (0..m).map(|a| q_k[[s, a]]).collect();
        let pik_row: Vec<f64> = (0..m).map(|a| pi_k[[s, a]]).collect();
        let pin_row: Vec<f64> = (0..m).map(|a| pi_next[[s, a]]).collect();
        let ln_k = floored_renormalized_log(&pik_row, delta);
        let ln_n = floored_renormalized_log(&pin_row, delta);
        let (_, v) = softmax_policy(&qk_row, tau)?;
        let mut inner = 0.0;
        let mut kl = 0.0;
        for a in 0..m {
            inner += pin_row[a] * (qk_row[a] - tau * ln_k[a]);
            kl += pin_row[a] * (ln_n[a] - ln_k[a]);
            lhs[[s, a]] = q_next[[s, a]] - (qk_row[a] - v);
        }
        boot[s] = inner - tau * kl;
    }
    let rhs = &mdp.reward + &(mdp.expected_next(&boot) * mdp.gamma);
    Ok((&lhs - &rhs).iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Greedy policy table of `q` under `reg`, one [`greedy_and_value_row`] per
/// state.
pub fn greedy_policy(
    mdp: &FiniteMdp,
    q: &ActionValueTable,
    reg: &crate::policy::RegularizerConfig,
) -> Result<StochasticPolicy, SchemeError> {
    mdp.check_table(q)?;
    let mut pi = Array2::<f64>::zeros((mdp.n_states, mdp.n_actions));
    for s in 0..mdp.n_states {
        let row: Vec<f64> = (0..mdp.n_actions).map(|a| q[[s, a]]).collect();
        let (p, _) = greedy_and_value_row(&row, reg)?;
        for a in 0..mdp.n_actions {
            pi[[s, a]] = p[a];
        }
    }
    Ok(pi)
}

/// Iterate the configured sweep from the zero table and uniform policy until
/// the sup-norm change falls to `tol` or `max_sweeps` is reached. Returns the
/// final table, the final greedy policy, and the per-sweep trace.
pub fn solve(
    mdp: &FiniteMdp,
    scheme: &SchemeConfig,
    max_sweeps: usize,
    tol: f64,
) -> Result<(ActionValueTable, StochasticPolicy, IterationTrace), SchemeError> {
    scheme.validate()?;
    let n = mdp.n_states;
    let m = mdp.n_actions;
    let mut q = Array2::<f64>::zeros((n, m));
    let mut pi = crate::mdp::uniform_policy(n, m);
    let mut trace = IterationTrace::default();
    let track_identity = scheme.rule == UpdateRule::Mdqn && scheme.beta == 1.0;
    for _ in 0..max_sweeps {
        let (q_next, pi_next) = match scheme.rule {
            UpdateRule::SoftVi => {
                let q_next = soft_bellman_sweep(mdp, &q, scheme.reg.tau)?;
                let pi_next = greedy_policy(mdp, &q_next, &scheme.reg)?;
                (q_next, pi_next)
            }
            UpdateRule::TsallisVi => {
                let q_next = tsallis_bellman_sweep(mdp, &q, &scheme.reg)?;
                let pi_next = greedy_policy(mdp, &q_next, &scheme.reg)?;
                (q_next, pi_next)
            }
            UpdateRule::HardVi => {
                let q_next = hard_bellman_sweep(mdp, &q)?;
                let pi_next = greedy_policy(mdp, &q_next, &scheme.reg)?;
                (q_next, pi_next)
            }
            UpdateRule::Mdqn => mdqn_sweep(mdp, &q, &pi, scheme)?,
            UpdateRule::Cvi => cvi_sweep(mdp, &q, scheme)?,
            UpdateRule::Tal => tal_sweep(mdp, &q, scheme)?,
        };
        let residual = (&q_next - &q).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut gap_sum = 0.0;
        let mut ent_sum = 0.0;
        for s in 0..n {
            if m >= 2 {
                let row: Vec<f64> = (0..m).map(|a| q_next[[s, a]]).collect();
                gap_sum += action_gap(&row)?;
            }
            let pi_row: Vec<f64> = (0..m).map(|a| pi_next[[s, a]]).collect();
            ent_sum += family_entropy(&pi_row, scheme.reg.index, scheme.reg.k);
        }
        let kl = if track_identity {
            Some(kl_identity_residual(
                &q, &q_next, &pi, &pi_next, mdp, scheme.reg.tau,
            )?)
        } else {
            None
        };
        trace.residuals.push(residual);
        trace.mean_gaps.push(gap_sum / n as f64);
        trace.mean_entropies.push(ent_sum / n as f64);
        trace.kl_residuals.push(kl);
        q = q_next;
        pi = pi_next;
        if residual <= tol {
            trace.converged = true;
            break;
        }
    }
    Ok((q, pi, trace))
}
