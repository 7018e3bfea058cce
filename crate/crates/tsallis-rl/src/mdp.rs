//! Finite Markov decision processes: the tabular model type and a seeded
//! random generator used by the property and equivalence tests.

use ndarray::{Array1, Array2, Array3};
use rand::prelude::*;

use crate::error::MdpError;

/// Per-state-action value table, shape `|S| x |A|`.
pub type ActionValueTable = Array2<f64>;
/// Row-stochastic policy table, shape `|S| x |A|`.
pub type StochasticPolicy = Array2<f64>;

/// A finite MDP: transition kernel `P[s][a][s']`, reward table `r[s][a]`,
/// and discount factor `gamma` in (0, 1).
#[derive(Clone, Debug)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[[s, a, s']]` = probability of moving to `s'` when taking
    /// `a` in `s`; every `[s, a, ..]` row sums to 1 within 1e-12.
    pub transition: Array3<f64>,
    /// Expected immediate reward for taking `a` in `s`.
    pub reward: Array2<f64>,
    pub gamma: f64,
}

impl FiniteMdp {
    /// Validates shapes, row-stochasticity (1e-12), reward finiteness, and
    /// the discount range.
    pub fn new(
        transition: Array3<f64>,
        reward: Array2<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        let (n_states, n_actions, n_next) = transition.dim();
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::EmptyMdp);
        }
        if n_next != n_states || reward.dim() != (n_states, n_actions) {
            return Err(MdpError::ShapeMismatch {
                expected: (n_states, n_actions),
                got: reward.dim(),
            });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(MdpError::BadGamma(gamma));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let mut sum = 0.0;
                for sp in 0..n_states {
                    let p = transition[[s, a, sp]];
                    if !p.is_finite() || p < 0.0 {
                        return Err(MdpError::BadTransitionEntry { state: s, action: a });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(MdpError::BadTransitionRow {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                if !reward[[s, a]].is_finite() {
                    return Err(MdpError::BadReward { state: s, action: a });
                }
            }
        }
        Ok(FiniteMdp {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
        })
    }

    /// Expected value of `v` at the successor state for every `(s, a)`:
    /// returns the `|S| x |A|` table of `sum_s' P[s][a][s'] * v[s']`.
    pub fn expected_next(&self, v: &Array1<f64>) -> Array2<f64> {
        let flat = self
            .transition
            .view()
            .into_shape_with_order((self.n_states * self.n_actions, self.n_states))
            .expect("transition tensor is contiguous");
        flat.dot(v)
            .into_shape_with_order((self.n_states, self.n_actions))
            .expect("shape preserved")
    }

    /// Validates that a table has this MDP's `|S| x |A|` shape and only
    /// finite entries.
    pub fn check_table(&self, table: &Array2<f64>) -> Result<(), MdpError> {
        if table.dim() != (self.n_states, self.n_actions) {
            return Err(MdpError::ShapeMismatch {
                expected: (self.n_states, self.n_actions),
                got: table.dim(),
            });
        }
        for ((s, a), v) in table.indexed_iter() {
            if !v.is_finite() {
                return Err(MdpError::NonFiniteTableEntry { state: s, action: a });
            }
        }
        Ok(())
    }
}

/// Configuration for [`random_mdp`].
#[derive(Clone, Copy, Debug)]
pub struct MdpGeneratorConfig {
    pub n_states: usize,
    pub n_actions: usize,
    /// Number of distinct successor states per `(s, a)`.
    pub branching: usize,
    /// Rewards drawn uniformly from this half-open range.
    pub reward_range: (f64, f64),
    pub gamma: f64,
    pub seed: u64,
}

impl MdpGeneratorConfig {
    /// 10-state, 4-action layout with branching 5, rewards in [0, 1), and
    /// discount 0.9 — the layout used throughout the equivalence tests.
    pub fn standard(seed: u64) -> Self {
        MdpGeneratorConfig {
            n_states: 10,
            n_actions: 4,
            branching: 5,
            reward_range: (0.0, 1.0),
            gamma: 0.9,
            seed,
        }
    }
}

/// Generates a seeded random MDP: for every `(s, a)`, `branching` distinct
/// successors are chosen uniformly and given normalized uniform weights;
/// rewards are uniform in `reward_range`. Deterministic given the seed.
pub fn random_mdp(cfg: &MdpGeneratorConfig) -> Result<FiniteMdp, MdpError> {
    if cfg.n_states == 0 || cfg.n_actions == 0 {
        return Err(MdpError::EmptyMdp);
    }
    if cfg.branching == 0 || cfg.branching > cfg.n_states {
        return Err(MdpError::BadBranching {
            branching: cfg.branching,
            n_states: cfg.n_states,
        });
    }
    let (lo, hi) = cfg.reward_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(MdpError::BadRewardRange(lo, hi));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(MdpError::BadGamma(cfg.gamma));
    }

    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut transition = Array3::<f64>::zeros((cfg.n_states, cfg.n_actions, cfg.n_states));
    let mut reward = Array2::<f64>::zeros((cfg.n_states, cfg.n_actions));
    let mut states: Vec<usize> = (0..cfg.n_states).collect();
    for s in 0..cfg.n_states {
        for a in 0..cfg.n_actions {
            // Partial Fisher-Yates: the first `branching` entries become the
            // distinct successor set.
            for i in 0..cfg.branching {
                let j = rng.gen_range(i..cfg.n_states);
                states.swap(i, j);
            }
            let mut weights: Vec<f64> = (0..cfg.branching).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            // A sum this small has probability ~0; resample degenerate draws
            // so normalization is always well-posed.
            if total < 1e-12 {
                weights = vec![1.0; cfg.branching];
            }
            let total: f64 = if total < 1e-12 {
                cfg.branching as f64
            } else {
                total
            };
            for (i, w) in weights.iter().enumerate() {
                transition[[s, a, states[i]]] = w / total;
            }
            // Exact renormalization: make the row sum to 1 to the last ulp
            // by recomputing the largest entry from the others.
            let mut sum_rest = 0.0;
            let mut max_idx = states[0];
            for &st in states.iter().take(cfg.branching) {
                if transition[[s, a, st]] > transition[[s, a, max_idx]] {
                    max_idx = st;
                }
            }
            for &st in states.iter().take(cfg.branching) {
                if st != max_idx {
                    sum_rest += transition[[s, a, st]];
                }
            }
            transition[[s, a, max_idx]] = 1.0 - sum_rest;
            reward[[s, a]] = rng.gen_range(lo..hi);
        }
    }
    FiniteMdp::new(transition, reward, cfg.gamma)
}

/// Convenience: uniform row-stochastic policy for an MDP's shape.
pub fn uniform_policy(n_states: usize, n_actions: usize) -> StochasticPolicy {
    Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn generator_is_deterministic() {
        let cfg = MdpGeneratorConfig::standard(42);
        let a = random_mdp(&cfg).unwrap();
        let b = random_mdp(&cfg).unwrap();
        assert_eq!(a.transition, b.transition);
        assert_eq!(a.reward, b.reward);
    }

    #[test]
    fn generator_rows_are_stochastic() {
        for seed in 0..200 {
            let cfg = MdpGeneratorConfig {
                n_states: 7,
                n_actions: 3,
                branching: 4,
                reward_range: (-1.0, 2.0),
                gamma: 0.95,
                seed,
            };
            let mdp = random_mdp(&cfg).unwrap();
            for s in 0..7 {
                for a in 0..3 {
                    let sum: f64 = (0..7).map(|sp| mdp.transition[[s, a, sp]]).sum();
                    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
                    let nz = (0..7)
                        .filter(|&sp| mdp.transition[[s, a, sp]] > 0.0)
                        .count();
                    assert!(nz <= 4);
                }
            }
        }
    }

    #[test]
    fn branching_one_is_deterministic_kernel() {
        let cfg = MdpGeneratorConfig {
            n_states: 5,
            n_actions: 2,
            branching: 1,
            reward_range: (0.0, 1.0),
            gamma: 0.9,
            seed: 9,
        };
        let mdp = random_mdp(&cfg).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                let ones = (0..5)
                    .filter(|&sp| (mdp.transition[[s, a, sp]] - 1.0).abs() < 1e-15)
                    .count();
                assert_eq!(ones, 1);
            }
        }
    }

    #[test]
    fn expected_next_matches_manual_sum() {
        let cfg = MdpGeneratorConfig::standard(3);
        let mdp = random_mdp(&cfg).unwrap();
        let v = Array1::from_iter((0..10).map(|i| i as f64 * 0.37 - 1.0));
        let got = mdp.expected_next(&v);
        for s in 0..10 {
            for a in 0..4 {
                let manual: f64 = (0..10).map(|sp| mdp.transition[[s, a, sp]] * v[sp]).sum();
                assert_abs_diff_eq!(got[[s, a]], manual, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        let p = Array3::from_elem((2, 1, 2), 0.5);
        let r = Array2::zeros((2, 1));
        assert!(FiniteMdp::new(p.clone(), r.clone(), 0.9).is_ok());
        assert!(FiniteMdp::new(p.clone(), r.clone(), 1.0).is_err());
        assert!(FiniteMdp::new(p.clone(), r.clone(), 0.0).is_err());
        let mut bad = p.clone();
        bad[[0, 0, 0]] = 0.7;
        assert!(matches!(
            FiniteMdp::new(bad, r.clone(), 0.9),
            Err(MdpError::BadTransitionRow { .. })
        ));
        let mut neg = p;
        neg[[0, 0, 0]] = -0.5;
        neg[[0, 0, 1]] = 1.5;
        assert!(matches!(
            FiniteMdp::new(neg, r, 0.9),
            Err(MdpError::BadTransitionEntry { .. })
        ));
    }

    #[test]
    fn generator_rejects_bad_configs() {
        let mut cfg = MdpGeneratorConfig::standard(0);
        cfg.branching = 11;
        assert!(random_mdp(&cfg).is_err());
        let mut cfg = MdpGeneratorConfig::standard(0);
        cfg.reward_range = (1.0, 1.0);
        assert!(random_mdp(&cfg).is_err());
    }
}
