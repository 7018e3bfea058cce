//! Per-state policy kernels: entropies, greedy policies, normalization terms,
//! and regularized state values over a single action-value vector.
//!
//! All functions here are pure and allocation-light; they validate their
//! inputs (finite entries, positive coefficients) and return structured
//! errors instead of panicking.

use crate::error::PolicyError;

/// Default Tsallis entropy scale `k`.
pub const DEFAULT_TSALLIS_SCALE: f64 = 0.5;

/// Default floor applied to probabilities inside logarithms so sparse
/// policies never produce `-inf` log-probabilities.
pub const DEFAULT_LOG_POLICY_FLOOR: f64 = 1e-8;

/// Selects the entropy family applied on top of expected value.
///
/// `Shannon` is the smooth family (Boltzmann greedy policies), `Tsallis(q)`
/// the power family with entropic index `q > 1` (sparse greedy policies;
/// `q = 2` has a closed form), and `HardMax` the degenerate unregularized
/// family (deterministic argmax, zero entropy bonus).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EntropicIndex {
    Shannon,
    Tsallis(f64),
    HardMax,
}

impl EntropicIndex {
    /// Maps a raw numeric index to the enum: values within `1e-9` of 1 select
    /// `Shannon`, positive infinity selects `HardMax`, finite values above 1
    /// select `Tsallis(q)`. Anything else is rejected.
    pub fn from_q(q: f64) -> Result<Self, PolicyError> {
        if (q - 1.0).abs() < 1e-9 {
            Ok(EntropicIndex::Shannon)
        } else if q.is_infinite() && q > 0.0 {
            Ok(EntropicIndex::HardMax)
        } else if q.is_finite() && q > 1.0 {
            Ok(EntropicIndex::Tsallis(q))
        } else {
            Err(PolicyError::InvalidIndex(q))
        }
    }
}

/// Chooses between the two candidate forms of the first-order normalization
/// correction used by [`approx_tsallis_policy`].
///
/// With scale `k` and index `q`, `QMinusOne` uses the correction
/// `kq − kq/(q−1)` and `QMinusTwo` uses `kq − 2kq/(q−2)`. The default
/// (`QMinusOne`) is the variant selected by the arbitration test in this
/// module, which measures the pre-renormalization simplex deficit `|Σπ − 1|`
/// and the total-variation distance to the bisection oracle on a fixed
/// seeded validation set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PsiCorrection {
    #[default]
    QMinusOne,
    QMinusTwo,
}

/// Chooses how Tsallis greedy policies are realized for indices without a
/// closed form: `Exact` solves the normalization term by bisection,
/// `Approximate` uses the first-order normalization of
/// [`approx_tsallis_policy`]. `q = 2` always uses the closed form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PolicyRealization {
    #[default]
    Exact,
    Approximate,
}

/// Regularization configuration shared by the policy kernels and the sweep
/// operators: entropy family, Tsallis scale `k`, Tsallis coefficient `alpha`,
/// and Shannon coefficient `tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizerConfig {
    pub index: EntropicIndex,
    /// Tsallis entropy scale; defaults to 1/2.
    pub k: f64,
    /// Coefficient multiplying the Tsallis entropy bonus; also the scale
    /// dividing action values inside sparse greedy policies.
    pub alpha: f64,
    /// Coefficient multiplying the Shannon entropy bonus; the Boltzmann
    /// temperature.
    pub tau: f64,
    pub psi_correction: PsiCorrection,
    pub realization: PolicyRealization,
}

impl RegularizerConfig {
    /// Shannon family with temperature `tau`.
    pub fn shannon(tau: f64) -> Self {
        RegularizerConfig {
            index: EntropicIndex::Shannon,
            k: DEFAULT_TSALLIS_SCALE,
            alpha: 0.0,
            tau,
            psi_correction: PsiCorrection::default(),
            realization: PolicyRealization::default(),
        }
    }

    /// Tsallis family with index `q` and coefficient `alpha`.
    pub fn tsallis(q: f64, alpha: f64) -> Self {
        RegularizerConfig {
            index: EntropicIndex::Tsallis(q),
            k: DEFAULT_TSALLIS_SCALE,
            alpha,
            tau: 0.0,
            psi_correction: PsiCorrection::default(),
            realization: PolicyRealization::default(),
        }
    }

    /// Unregularized hard-max family.
    pub fn hard_max() -> Self {
        RegularizerConfig {
            index: EntropicIndex::HardMax,
            k: DEFAULT_TSALLIS_SCALE,
            alpha: 0.0,
            tau: 0.0,
            psi_correction: PsiCorrection::default(),
            realization: PolicyRealization::default(),
        }
    }

    /// Checks coefficient ranges: `k > 0`, `alpha >= 0`, `tau >= 0`, all
    /// finite; a finite Tsallis index must be `> 1` (values within `1e-9`
    /// of 1 must use the `Shannon` family instead).
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(PolicyError::InvalidScale(self.k));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(PolicyError::InvalidAlpha(self.alpha));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(PolicyError::InvalidTau(self.tau));
        }
        if let EntropicIndex::Tsallis(q) = self.index {
            if !q.is_finite() || q <= 1.0 || (q - 1.0).abs() < 1e-9 {
                return Err(PolicyError::InvalidIndex(q));
            }
        }
        Ok(())
    }
}

/// A sparse greedy policy together with its support set (ascending action
/// indices with strictly positive probability) and the scalar normalization
/// term that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePolicy {
    pub probs: Vec<f64>,
    pub support: Vec<usize>,
    pub psi: f64,
}

fn validate_values(q_vals: &[f64]) -> Result<(), PolicyError> {
    if q_vals.is_empty() {
        return Err(PolicyError::EmptyInput);
    }
    for (i, v) in q_vals.iter().enumerate() {
        if !v.is_finite() {
            return Err(PolicyError::NonFinite(i));
        }
    }
    Ok(())
}

fn validate_probs(pi: &[f64]) -> Result<(), PolicyError> {
    if pi.is_empty() {
        return Err(PolicyError::EmptyInput);
    }
    let mut sum = 0.0;
    for (i, p) in pi.iter().enumerate() {
        if !p.is_finite() {
            return Err(PolicyError::NonFinite(i));
        }
        if *p < 0.0 {
            return Err(PolicyError::InvalidPolicy(format!(
                "negative probability {p} at index {i}"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(PolicyError::InvalidPolicy(format!(
            "probabilities sum to {sum}, expected 1 within 1e-9"
        )));
    }
    Ok(())
}

/// Action indices sorted by descending value; ties broken by ascending index
/// for determinism across runs and platforms.
fn sorted_desc_indices(q_vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..q_vals.len()).collect();
    idx.sort_by(|&a, &b| {
        q_vals[b]
            .partial_cmp(&q_vals[a])
            .expect("values validated finite")
            .then(a.cmp(&b))
    });
    idx
}

/// Index of the maximal entry, ties broken by the lowest index.
pub(crate) fn argmax(q_vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q_vals.iter().enumerate().skip(1) {
        if *v > q_vals[best] {
            best = i;
        }
    }
    best
}

/// Scaled entropy of a probability vector under the configured family.
///
/// Returns `alpha * H` where `H` is `k/(q−1) · (1 − Σ π^q)` for a finite
/// Tsallis index, `k · (−Σ π ln π)` for the Shannon family (the `q → 1`
/// limit of the power form), and `0` for `HardMax`. For `q > 1` the value is
/// nonnegative and maximized by the uniform vector.
pub fn tsallis_entropy(pi: &[f64], cfg: &RegularizerConfig) -> Result<f64, PolicyError> {
    cfg.validate()?;
    validate_probs(pi)?;
    let h = match cfg.index {
        EntropicIndex::Shannon => {
            let s: f64 = pi
                .iter()
                .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                .sum();
            cfg.k * s
        }
        EntropicIndex::Tsallis(q) => {
            let s: f64 = pi.iter().map(|&p| p.powf(q)).sum();
            cfg.k / (q - 1.0) * (1.0 - s)
        }
        EntropicIndex::HardMax => 0.0,
    };
    Ok(cfg.alpha * h)
}

/// Boltzmann greedy policy and its regularized state value.
///
/// Returns `(π, v)` with `π ∝ exp(Q/τ)` (computed with max-subtraction so
/// arbitrarily large values cannot overflow) and `v = τ · ln Σ exp(Q/τ)`,
/// the log-sum-exp state value. The policy equals `exp((Q − v)/τ)`
/// elementwise.
pub fn softmax_policy(q_vals: &[f64], tau: f64) -> Result<(Vec<f64>, f64), PolicyError> {
    validate_values(q_vals)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(PolicyError::InvalidTau(tau));
    }
    let m = q_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = q_vals.iter().map(|&v| ((v - m) / tau).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= z;
    }
    Ok((probs, m + tau * z.ln()))
}

/// Closed-form sparse greedy policy for the quadratic (index 2) entropy
/// family: the Euclidean-style projection of `Q/α` onto the simplex.
///
/// With `z = Q/α` sorted descending, the support is the maximal prefix of
/// length `i` satisfying `1 + i·z_(i) > Σ_{j≤i} z_(j)`; the normalization
/// term is `ψ = (Σ_{a∈S} z_a − 1)/|S|` and `π(a) = max(z_a − ψ, 0)`. A
/// single-action input returns the one-hot policy with `ψ = z − 1`. The
/// returned probabilities sum to 1 within 1e-12.
pub fn sparsemax_policy(q_vals: &[f64], alpha: f64) -> Result<SparsePolicy, PolicyError> {
    validate_values(q_vals)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PolicyError::InvalidAlpha(alpha));
    }
    let z: Vec<f64> = q_vals.iter().map(|&v| v / alpha).collect();
    let order = sorted_desc_indices(&z);
    let mut prefix = 0.0;
    let mut k_support = 0;
    let mut psi = 0.0;
    for (rank, &a) in order.iter().enumerate() {
        let i = (rank + 1) as f64;
        prefix += z[a];
        if 1.0 + i * z[a] > prefix {
            k_support = rank + 1;
            psi = (prefix - 1.0) / i;
        }
    }
    debug_assert!(k_support >= 1, "the top entry always satisfies the prefix rule");
    let probs: Vec<f64> = z.iter().map(|&v| (v - psi).max(0.0)).collect();
    let mut support: Vec<usize> = order[..k_support].to_vec();
    support.sort_unstable();
    Ok(SparsePolicy { probs, support, psi })
}

/// Regularized state value of the quadratic-family sparse greedy policy,
/// expressed in `Q/α` units: `½ Σ_{a∈S} (z_a² − ψ²) + ½` with `z = Q/α` and
/// `S, ψ` from [`sparsemax_policy`]. Equals `⟨π, z⟩ + H₂(π)` where `H₂` is
/// the quadratic entropy with scale 1/2 and unit coefficient.
pub fn sparse_value(q_vals: &[f64], alpha: f64) -> Result<f64, PolicyError> {
    let sp = sparsemax_policy(q_vals, alpha)?;
    let psi2 = sp.psi * sp.psi;
    let mut v = 0.0;
    for &a in &sp.support {
        let z = q_vals[a] / alpha;
        v += z * z - psi2;
    }
    Ok(0.5 * v + 0.5)
}

fn psi_correction_term(k: f64, q: f64, variant: PsiCorrection) -> f64 {
    let kq = k * q;
    match variant {
        PsiCorrection::QMinusOne => kq - kq / (q - 1.0),
        PsiCorrection::QMinusTwo => kq - 2.0 * kq / (q - 2.0),
    }
}

/// First-order sparse greedy policy for general finite index `q > 1`,
/// normalized by the closed-form surrogate `ψ̃` instead of root-finding.
///
/// With `z = Q/α` sorted descending and correction `c` from the configured
/// [`PsiCorrection`] variant, the support is the maximal prefix of length `i`
/// satisfying `kq + i·z_(i) > Σ_{j≤i} z_(j) + i·c`; the surrogate
/// normalization is `ψ̃ = (Σ_{a∈S} z_a − kq)/|S| + c` and the unnormalized
/// policy `[z_a − ψ̃]₊^{1/(q−1)}` is clipped at zero and renormalized to sum
/// to 1 (computed in log space so large exponents cannot overflow). If no
/// prefix satisfies the rule, the policy falls back to one-hot argmax.
/// `q = 2` is redirected to [`sparsemax_policy`], whose normalization this
/// formula reproduces exactly there.
pub fn approx_tsallis_policy(
    q_vals: &[f64],
    cfg: &RegularizerConfig,
) -> Result<SparsePolicy, PolicyError> {
    cfg.validate()?;
    validate_values(q_vals)?;
    let q = match cfg.index {
        EntropicIndex::Tsallis(q) => q,
        EntropicIndex::Shannon => return Err(PolicyError::InvalidIndex(1.0)),
        EntropicIndex::HardMax => return Err(PolicyError::InvalidIndex(f64::INFINITY)),
    };
    if cfg.alpha.is_nan() || cfg.alpha <= 0.0 {
        return Err(PolicyError::InvalidAlpha(cfg.alpha));
    }
    if q == 2.0 {
        return sparsemax_policy(q_vals, cfg.alpha);
    }

    let k = cfg.k;
    let kq = k * q;
    let corr = psi_correction_term(k, q, cfg.psi_correction);
    let z: Vec<f64> = q_vals.iter().map(|&v| v / cfg.alpha).collect();
    let order = sorted_desc_indices(&z);

    let mut prefix = 0.0;
    let mut k_support = 0;
    let mut psi_tilde = f64::NAN;
    for (rank, &a) in order.iter().enumerate() {
        let i = (rank + 1) as f64;
        prefix += z[a];
        if kq + i * z[a] > prefix + i * corr {
            k_support = rank + 1;
            psi_tilde = (prefix - kq) / i + corr;
        }
    }
    if k_support == 0 {
        // Every prefix fails the rule (possible under the QMinusTwo variant
        // for q < 2): fall back to the deterministic argmax policy.
        let best = argmax(&z);
        let mut probs = vec![0.0; z.len()];
        probs[best] = 1.0;
        return Ok(SparsePolicy {
            probs,
            support: vec![best],
            psi: z[best] - kq + corr,
        });
    }

    // Renormalize in log space: exponent 1/(q-1) can be enormous near q = 1.
    let expo = 1.0 / (q - 1.0);
    let log_raw: Vec<f64> = z
        .iter()
        .map(|&v| {
            let d = v - psi_tilde;
            if d > 0.0 {
                expo * d.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = log_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_raw.iter().map(|&l| (l - m).exp()).collect();
    let zsum: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= zsum;
    }
    let mut support: Vec<usize> = order[..k_support].to_vec();
    support.sort_unstable();
    Ok(SparsePolicy {
        probs,
        support,
        psi: psi_tilde,
    })
}

/// Raw (pre-renormalization) simplex mass `Σ_a [z_a − ψ̃]₊^{1/(q−1)}` of the
/// first-order policy, used by the variant arbitration test to measure how
/// far each correction form is from exact normalization.
pub fn approx_tsallis_raw_mass(
    q_vals: &[f64],
    cfg: &RegularizerConfig,
) -> Result<f64, PolicyError> {
    let sp = approx_tsallis_policy(q_vals, cfg)?;
    let q = match cfg.index {
        EntropicIndex::Tsallis(q) => q,
        _ => return Err(PolicyError::InvalidIndex(1.0)),
    };
    let expo = 1.0 / (q - 1.0);
    let mass: f64 = q_vals
        .iter()
        .map(|&v| {
            let d = v / cfg.alpha - sp.psi;
            if d > 0.0 {
                d.powf(expo)
            } else {
                0.0
            }
        })
        .sum();
    Ok(mass)
}

/// Numerical ground truth for the sparse greedy policy at any finite index
/// `q > 1`: solves the scalar normalization term by bisection.
///
/// Solves `ψ` in `Σ_a [(z_a − ψ)(q−1)/(kq)]₊^{1/(q−1)} = 1` (with `z = Q/α`)
/// over the bracket `[max z − kq/(q−1), max z]`, on which the left side is
/// decreasing and crosses 1. Bisection runs until the residual falls below
/// 1e-13 or the bracket is exhausted to floating-point resolution. In the
/// exhausted case (at very large `q` the root sits between two adjacent
/// floats next to the second-largest value, where the mass jumps by O(1)),
/// actions pinned inside the final bracket receive exactly the mass the
/// stable terms leave over; otherwise the clipped policy is renormalized so
/// it sums to 1.
pub fn exact_tsallis_policy_oracle(
    q_vals: &[f64],
    cfg: &RegularizerConfig,
) -> Result<Vec<f64>, PolicyError> {
    cfg.validate()?;
    validate_values(q_vals)?;
    let q = match cfg.index {
        EntropicIndex::Tsallis(q) => q,
        EntropicIndex::Shannon => return Err(PolicyError::InvalidIndex(1.0)),
        EntropicIndex::HardMax => return Err(PolicyError::InvalidIndex(f64::INFINITY)),
    };
    if cfg.alpha.is_nan() || cfg.alpha <= 0.0 {
        return Err(PolicyError::InvalidAlpha(cfg.alpha));
    }
    let k = cfg.k;
    let z: Vec<f64> = q_vals.iter().map(|&v| v / cfg.alpha).collect();
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = (q - 1.0) / (k * q);
    let expo = 1.0 / (q - 1.0);
    let mass = |psi: f64| -> f64 {
        z.iter()
            .map(|&v| {
                let d = (v - psi) * scale;
                if d > 0.0 {
                    d.powf(expo)
                } else {
                    0.0
                }
            })
            .sum()
    };

    // At psi = max z − kq/(q−1) the top action alone contributes exactly 1,
    // so the mass is >= 1 there; at psi = max z the mass is 0. The lower end
    // is widened slightly so rounding in the mass evaluation cannot dip it
    // below 1.
    let span = k * q / (q - 1.0);
    let mut lo = zmax - span * (1.0 + 1e-6) - 4.0 * f64::EPSILON * zmax.abs();
    let mut hi = zmax;
    let (f_lo, f_hi) = (mass(lo), mass(hi));
    if !(f_lo >= 1.0 && f_hi < 1.0) {
        return Err(PolicyError::BracketFailure { lo, hi, f_lo, f_hi });
    }
    let mut converged = false;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted to f64 resolution
        }
        let f = mass(mid);
        if (f - 1.0).abs() <= 1e-13 {
            lo = mid;
            converged = true;
            break;
        }
        if f >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        // The root sits between two adjacent floats. Action values pinned
        // inside the final bracket are the ones whose mass terms vary
        // violently across it (at large indices the term of a boundary
        // action swings by O(1) over one ulp); every other term is stable to
        // rounding error. Give the boundary actions exactly the mass the
        // stable terms leave over.
        let boundary: Vec<usize> = (0..z.len()).filter(|&a| z[a] > lo && z[a] <= hi).collect();
        if !boundary.is_empty() {
            let mut probs = vec![0.0; z.len()];
            let mut stable = 0.0;
            for (a, &v) in z.iter().enumerate() {
                if boundary.contains(&a) {
                    continue;
                }
                let d = (v - hi) * scale;
                if d > 0.0 {
                    probs[a] = d.powf(expo);
                    stable += probs[a];
                }
            }
            let deficit = 1.0 - stable;
            if deficit > 0.0 {
                for &a in &boundary {
                    probs[a] = deficit / boundary.len() as f64;
                }
                let total: f64 = probs.iter().sum();
                for p in probs.iter_mut() {
                    *p /= total;
                }
                return Ok(probs);
            }
        }
    }
    let psi = lo;

    // Form the policy in log space and renormalize exactly.
    let log_raw: Vec<f64> = z
        .iter()
        .map(|&v| {
            let d = (v - psi) * scale;
            if d > 0.0 {
                expo * d.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = log_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_raw.iter().map(|&l| (l - m).exp()).collect();
    let zsum: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= zsum;
    }
    Ok(probs)
}

/// Difference between the largest and second-largest action values.
/// Nonnegative; ties give a gap of 0. Requires at least two actions.
pub fn action_gap(q_vals: &[f64]) -> Result<f64, PolicyError> {
    validate_values(q_vals)?;
    if q_vals.len() < 2 {
        return Err(PolicyError::NotEnoughActions {
            required: 2,
            got: q_vals.len(),
        });
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in q_vals {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(first - second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    fn tsallis_cfg(q: f64, alpha: f64) -> RegularizerConfig {
        RegularizerConfig::tsallis(q, alpha)
    }

    #[test]
    fn entropy_uniform_two_actions_quadratic() {
        let cfg = tsallis_cfg(2.0, 1.0);
        let h = tsallis_entropy(&[0.5, 0.5], &cfg).unwrap();
        assert_abs_diff_eq!(h, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn entropy_one_hot_is_zero() {
        for q in [1.5, 2.0, 3.0, 7.0] {
            let cfg = tsallis_cfg(q, 1.0);
            let h = tsallis_entropy(&[0.0, 1.0, 0.0], &cfg).unwrap();
            assert_abs_diff_eq!(h, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn entropy_direct_evaluation_q3() {
        // 2 * (0.5/2) * (1 - 0.7^3 - 0.3^3) = 0.315
        let cfg = tsallis_cfg(3.0, 2.0);
        let h = tsallis_entropy(&[0.7, 0.3], &cfg).unwrap();
        assert_abs_diff_eq!(h, 0.315, epsilon = 1e-15);
    }

    #[test]
    fn entropy_shannon_route_and_limit() {
        let mut cfg = RegularizerConfig::shannon(1.0);
        cfg.alpha = 1.0;
        let pi = [0.7f64, 0.2, 0.1];
        let shannon: f64 = pi.iter().map(|&p| -p * p.ln()).sum();
        let h = tsallis_entropy(&pi, &cfg).unwrap();
        assert_abs_diff_eq!(h, 0.5 * shannon, epsilon = 1e-15);

        // q -> 1+ limit of the power family approaches k * Shannon.
        let near = tsallis_cfg(1.0 + 1e-6, 1.0);
        let h_near = tsallis_entropy(&pi, &near).unwrap();
        assert_abs_diff_eq!(h_near, 0.5 * shannon, epsilon = 1e-4);
    }

    #[test]
    fn entropy_rejects_near_one_index_on_power_branch() {
        let cfg = tsallis_cfg(1.0 + 1e-12, 1.0);
        assert!(matches!(
            tsallis_entropy(&[0.5, 0.5], &cfg),
            Err(PolicyError::InvalidIndex(_))
        ));
    }

    #[test]
    fn entropy_validates_probabilities() {
        let cfg = tsallis_cfg(2.0, 1.0);
        assert!(tsallis_entropy(&[0.9, 0.3], &cfg).is_err());
        assert!(tsallis_entropy(&[-0.1, 1.1], &cfg).is_err());
        assert!(tsallis_entropy(&[], &cfg).is_err());
    }

    #[test]
    fn softmax_symmetric_and_shifted() {
        let (pi, v) = softmax_policy(&[0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 2.0_f64.ln(), epsilon = 1e-15);

        let (pi, v) = softmax_policy(&[7.0, 7.0, 7.0], 2.5).unwrap();
        for p in &pi {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(v, 7.0 + 2.5 * 3.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn softmax_fixture_two_actions() {
        let (pi, v) = softmax_policy(&[1.0, 0.0], 0.5).unwrap();
        assert_abs_diff_eq!(pi[0], 0.880_797_077_977_882_3, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[1], 0.119_202_922_022_117_55, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.063_464_005_521_486_3, epsilon = 1e-15);
    }

    #[test]
    fn softmax_shift_invariance() {
        let q = [1.3, -0.2, 0.9, 4.0];
        let shifted: Vec<f64> = q.iter().map(|v| v + 123.456).collect();
        let (p1, v1) = softmax_policy(&q, 0.7).unwrap();
        let (p2, v2) = softmax_policy(&shifted, 0.7).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(v2 - v1, 123.456, epsilon = 1e-9);
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        assert!(softmax_policy(&[1.0], 0.0).is_err());
        assert!(softmax_policy(&[1.0], -1.0).is_err());
        assert!(softmax_policy(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn sparsemax_fixture_four_actions() {
        // z = Q/alpha = (1.2, 0.7, 0.2, -0.4) with alpha = 1.
        let sp = sparsemax_policy(&[1.2, 0.7, 0.2, -0.4], 1.0).unwrap();
        assert_abs_diff_eq!(sp.probs[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.probs[1], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.probs[2], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.probs[3], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.psi, 0.45, epsilon = 1e-14);
        assert_eq!(sp.support, vec![0, 1]);
    }

    #[test]
    fn sparsemax_one_hot_support() {
        let sp = sparsemax_policy(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(sp.support, vec![0]);
        assert_abs_diff_eq!(sp.probs[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sp.psi, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sparsemax_uniform_on_ties() {
        let sp = sparsemax_policy(&[3.0, 3.0, 3.0, 3.0], 2.0).unwrap();
        for p in &sp.probs {
            assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-14);
        }
        assert_eq!(sp.support, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sparsemax_single_action() {
        let sp = sparsemax_policy(&[4.2], 2.0).unwrap();
        assert_eq!(sp.probs, vec![1.0]);
        assert_abs_diff_eq!(sp.psi, 4.2 / 2.0 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sparsemax_shift_covariance() {
        let q = [0.3, -1.2, 2.2, 0.9, 0.0];
        let shifted: Vec<f64> = q.iter().map(|v| v + 55.5).collect();
        let a = sparsemax_policy(&q, 0.7).unwrap();
        let b = sparsemax_policy(&shifted, 0.7).unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        assert_eq!(a.support, b.support);
    }

    #[test]
    fn sparse_value_fixture() {
        let v = sparse_value(&[1.2, 0.7, 0.2, -0.4], 1.0).unwrap();
        assert_abs_diff_eq!(v, 1.2625, epsilon = 1e-14);
    }

    #[test]
    fn sparse_value_one_hot() {
        let v = sparse_value(&[1.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sparse_value_uniform_symmetry() {
        // Q = (c, c, c), n = 3: psi = c/alpha - 1/3,
        // V = 0.5 * 3 * ((c/a)^2 - psi^2) + 0.5.
        let (c, alpha) = (1.7, 0.9);
        let z = c / alpha;
        let psi = z - 1.0 / 3.0;
        let expected = 0.5 * 3.0 * (z * z - psi * psi) + 0.5;
        let v = sparse_value(&[c, c, c], alpha).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
    }

    #[test]
    fn sparse_value_equals_policy_value_plus_entropy() {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = tsallis_cfg(2.0, 1.0);
        for _ in 0..200 {
            let n = rng.gen_range(2..9);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let sp = sparsemax_policy(&q, 1.0).unwrap();
            let inner: f64 = sp.probs.iter().zip(&q).map(|(p, v)| p * v).sum();
            let h = tsallis_entropy(&sp.probs, &cfg).unwrap();
            let v = sparse_value(&q, 1.0).unwrap();
            assert_abs_diff_eq!(v, inner + h, epsilon = 1e-10);
        }
    }

    #[test]
    fn sparse_value_dominates_max_over_simplex_grid() {
        // V must be the maximum of <pi, z> + H2(pi) over the simplex; check
        // against a fine grid for |A| = 3.
        let q = [0.9, 0.4, -0.3];
        let cfg = tsallis_cfg(2.0, 1.0);
        let v = sparse_value(&q, 1.0).unwrap();
        let n = 200;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let p = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ];
                let inner: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
                let h = tsallis_entropy(&p, &cfg).unwrap();
                best = best.max(inner + h);
            }
        }
        assert!(v >= best - 1e-9, "grid max {best} exceeds value {v}");
        assert!(v <= best + 1e-3, "value {v} far above grid max {best}");
    }

    #[test]
    fn oracle_matches_sparsemax_at_q2() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let n = rng.gen_range(2..=8);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let cfg = tsallis_cfg(2.0, 1.0);
            let oracle = exact_tsallis_policy_oracle(&q, &cfg).unwrap();
            let sp = sparsemax_policy(&q, 1.0).unwrap();
            for (a, b) in oracle.iter().zip(&sp.probs) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-10, "worst L-inf deviation {worst}");
    }

    #[test]
    fn oracle_two_action_q3_fixture() {
        // Scalar bisection on psi for z = (1, 0.5), q = 3, k = 1/2:
        // pi = (5/6, 1/6), psi = 0.47916666...
        let cfg = tsallis_cfg(3.0, 1.0);
        let pi = exact_tsallis_policy_oracle(&[1.0, 0.5], &cfg).unwrap();
        assert_abs_diff_eq!(pi[0], 5.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pi[1], 1.0 / 6.0, epsilon = 1e-9);
    }

    #[test]
    fn oracle_large_index_approaches_argmax() {
        let cfg = tsallis_cfg(64.0, 1.0);
        let pi = exact_tsallis_policy_oracle(&[0.9, 0.1, 0.5], &cfg).unwrap();
        assert!(pi[0] > 0.99, "pi = {pi:?}");
        let sum: f64 = pi.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_argmax_preservation() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.gen_range(2..10);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for qi in [1.5, 2.0, 3.0, 6.0] {
                let cfg = tsallis_cfg(qi, 0.5);
                let pi = exact_tsallis_policy_oracle(&q, &cfg).unwrap();
                assert_eq!(argmax(&pi), argmax(&q), "q index {qi}");
            }
        }
    }

    #[test]
    fn approx_uniform_input_gives_uniform_policy() {
        for q in [1.5, 3.0, 4.0] {
            let cfg = tsallis_cfg(q, 0.5);
            let sp = approx_tsallis_policy(&[2.0, 2.0, 2.0, 2.0], &cfg).unwrap();
            for p in &sp.probs {
                assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn approx_peaked_input_gives_one_hot() {
        let cfg = tsallis_cfg(3.0, 0.01);
        let sp = approx_tsallis_policy(&[100.0, 0.0, -5.0], &cfg).unwrap();
        assert!(sp.probs[0] > 1.0 - 1e-12);
        assert_eq!(sp.support, vec![0]);
    }

    #[test]
    fn approx_q2_routes_to_closed_form() {
        let cfg = tsallis_cfg(2.0, 1.0);
        let a = approx_tsallis_policy(&[1.2, 0.7, 0.2, -0.4], &cfg).unwrap();
        let b = sparsemax_policy(&[1.2, 0.7, 0.2, -0.4], 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn approx_rejects_shannon_and_hard_max() {
        let mut cfg = RegularizerConfig::shannon(1.0);
        cfg.alpha = 1.0;
        assert!(approx_tsallis_policy(&[1.0, 0.0], &cfg).is_err());
        let mut cfg = RegularizerConfig::hard_max();
        cfg.alpha = 1.0;
        assert!(approx_tsallis_policy(&[1.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn approx_finite_distance_to_oracle_logged() {
        let mut rng = StdRng::seed_from_u64(5);
        let q_vals: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = tsallis_cfg(3.0, 0.03);
        let sp = approx_tsallis_policy(&q_vals, &cfg).unwrap();
        let oracle = exact_tsallis_policy_oracle(&q_vals, &cfg).unwrap();
        let tv: f64 = sp
            .probs
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv.is_finite());
        eprintln!("first-order vs bisection total variation at q=3, alpha=0.03: {tv:.6}");
    }

    #[test]
    fn approx_variant_fallback_when_support_empty() {
        // The QMinusTwo correction is huge for q < 2 and can reject every
        // prefix; the fallback must be the one-hot argmax.
        let mut cfg = tsallis_cfg(1.5, 1.0);
        cfg.psi_correction = PsiCorrection::QMinusTwo;
        let sp = approx_tsallis_policy(&[0.4, 0.1, -0.2], &cfg).unwrap();
        assert_eq!(sp.support, vec![0]);
        assert_abs_diff_eq!(sp.probs[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn variant_arbitration_prefers_default() {
        // On a fixed validation set, compare pre-renormalization simplex
        // deficit and total-variation distance to the bisection oracle.
        let mut rng = StdRng::seed_from_u64(424_242);
        let mut deficit = [0.0f64; 2];
        let mut tv = [0.0f64; 2];
        let mut count = 0.0;
        for _ in 0..300 {
            let n = rng.gen_range(2..10);
            let q_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for qi in [1.5, 3.0, 4.0] {
                let oracle_cfg = tsallis_cfg(qi, 0.5);
                let oracle = exact_tsallis_policy_oracle(&q_vals, &oracle_cfg).unwrap();
                for (vi, variant) in [PsiCorrection::QMinusOne, PsiCorrection::QMinusTwo]
                    .into_iter()
                    .enumerate()
                {
                    let mut cfg = tsallis_cfg(qi, 0.5);
                    cfg.psi_correction = variant;
                    let mass = approx_tsallis_raw_mass(&q_vals, &cfg).unwrap();
                    if mass.is_finite() {
                        deficit[vi] += (mass - 1.0).abs();
                    } else {
                        deficit[vi] += 1e3; // overflowed mass: maximal penalty
                    }
                    let sp = approx_tsallis_policy(&q_vals, &cfg).unwrap();
                    tv[vi] += sp
                        .probs
                        .iter()
                        .zip(&oracle)
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
                        / 2.0;
                }
                count += 1.0;
            }
        }
        eprintln!(
            "arbitration: mean |mass-1| default={:.4} alternate={:.4}; mean TV default={:.4} alternate={:.4}",
            deficit[0] / count,
            deficit[1] / count,
            tv[0] / count,
            tv[1] / count
        );
        assert!(
            deficit[0] < deficit[1],
            "default correction must have the smaller simplex deficit"
        );
        assert!(
            tv[0] < tv[1],
            "default correction must be closer to the bisection oracle"
        );
    }

    #[test]
    fn action_gap_basic() {
        assert_abs_diff_eq!(action_gap(&[3.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(action_gap(&[5.0, 5.0]).unwrap(), 0.0);
        assert!(action_gap(&[1.0]).is_err());
    }

    #[test]
    fn action_gap_matches_sort_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..12);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-9.0..9.0)).collect();
            let mut sorted = q.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_abs_diff_eq!(
                action_gap(&q).unwrap(),
                sorted[0] - sorted[1],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn rejects_non_finite_inputs() {
        assert!(softmax_policy(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(sparsemax_policy(&[f64::INFINITY, 0.0], 1.0).is_err());
        assert!(action_gap(&[0.0, f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn index_mapping_from_raw_values() {
        assert_eq!(EntropicIndex::from_q(1.0).unwrap(), EntropicIndex::Shannon);
        assert_eq!(
            EntropicIndex::from_q(1.0 + 1e-12).unwrap(),
            EntropicIndex::Shannon
        );
        assert_eq!(
            EntropicIndex::from_q(2.0).unwrap(),
            EntropicIndex::Tsallis(2.0)
        );
        assert_eq!(
            EntropicIndex::from_q(f64::INFINITY).unwrap(),
            EntropicIndex::HardMax
        );
        assert!(EntropicIndex::from_q(0.5).is_err());
        assert!(EntropicIndex::from_q(f64::NAN).is_err());
    }
}
