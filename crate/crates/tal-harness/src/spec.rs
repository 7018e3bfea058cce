//! Declarative experiment specs. A spec is a single TOML document;
//! unknown keys are rejected so typos fail loudly at validation time rather
//! than silently running a default.

use serde::Deserialize;

use tsallis_rl::{AgentConfig, PolicyRealization, RegularizerConfig, SchemeVariant};

use crate::HarnessError;

/// Top-level experiment description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Directory-safe identifier; outputs land under `<out>/<name>/`.
    pub name: String,
    pub kind: ExperimentKind,
    /// Training seeds (CartPole experiments only; one cell per scheme/seed).
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Optional overrides of the default agent hyperparameters.
    #[serde(default)]
    pub agent: AgentOverrides,
    /// Learning schemes to compare (CartPole experiments only).
    #[serde(default)]
    pub schemes: Vec<SchemeSpec>,
    /// Tabular chain protocol (chain experiments only).
    #[serde(default)]
    pub chain: Option<ChainSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Train the configured schemes on CartPole and compare learning curves.
    CartpoleTraining,
    /// Converge the advantage scheme on a slippery chain for each advantage
    /// scale and compare action gaps.
    ChainActionGap,
}

/// Per-field overrides of [`AgentConfig::classic_control`]. Absent fields
/// keep the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOverrides {
    pub total_steps: Option<usize>,
    pub grad_period: Option<usize>,
    pub batch_size: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub target_period: Option<usize>,
    pub learning_starts: Option<usize>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub record_period: Option<usize>,
    pub probe_count: Option<usize>,
}

impl AgentOverrides {
    fn apply(&self, cfg: &mut AgentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            total_steps,
            grad_period,
            batch_size,
            buffer_capacity,
            target_period,
            learning_starts,
            epsilon,
            gamma,
            hidden,
            lr,
            record_period,
            probe_count
        );
    }
}

/// One learning scheme: variant plus its policy-family parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    /// Directory-safe label for output files.
    pub label: String,
    pub variant: VariantSpec,
    /// Entropic index: `1.0` selects the Boltzmann family (with `alpha` as
    /// temperature), values above one the sparse Tsallis family.
    pub q: f64,
    /// Entropy coefficient.
    pub alpha: f64,
    /// Advantage / log-policy scale (ignored by `value-iteration`).
    #[serde(default)]
    pub beta: f64,
    /// Log-policy bonus coefficient override for `munchausen`.
    #[serde(default)]
    pub munchausen_coeff: Option<f64>,
    /// How sparse policies without a closed form are computed.
    #[serde(default)]
    pub realization: RealizationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantSpec {
    Tal,
    Munchausen,
    ValueIteration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealizationSpec {
    #[default]
    Exact,
    Approximate,
}

impl SchemeSpec {
    /// Policy-family configuration for this scheme.
    pub fn regularizer(&self) -> RegularizerConfig {
        let mut reg = if self.q == 1.0 {
            RegularizerConfig::shannon(self.alpha)
        } else {
            RegularizerConfig::tsallis(self.q, self.alpha)
        };
        if self.realization == RealizationSpec::Approximate {
            reg.realization = PolicyRealization::Approximate;
        }
        reg
    }

    pub fn variant(&self) -> SchemeVariant {
        match self.variant {
            VariantSpec::Tal => SchemeVariant::Tal,
            VariantSpec::Munchausen => SchemeVariant::MunchausenTsallis,
            VariantSpec::ValueIteration => SchemeVariant::TsallisDqn,
        }
    }

    /// Full agent configuration for this scheme under `overrides`.
    pub fn agent_config(&self, overrides: &AgentOverrides) -> AgentConfig {
        let mut cfg = AgentConfig::classic_control(self.regularizer(), self.variant());
        cfg.beta = self.beta;
        cfg.munchausen_coeff = self.munchausen_coeff;
        overrides.apply(&mut cfg);
        cfg
    }
}

/// Tabular chain protocol: converge the advantage scheme for each `beta` and
/// record per-state action gaps.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub n_states: usize,
    pub slip: f64,
    pub gamma: f64,
    pub q: f64,
    pub alpha: f64,
    pub betas: Vec<f64>,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_sweeps() -> usize {
    5_000
}

fn default_tol() -> f64 {
    1e-12
}

fn check_label(kind: &str, label: &str) -> Result<(), HarnessError> {
    if label.is_empty()
        || !label
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
    {
        return Err(HarnessError::Spec(format!(
            "{kind} {label:?} must be non-empty lowercase alphanumeric with '-' or '_'"
        )));
    }
    Ok(())
}

fn check_scheme(s: &SchemeSpec) -> Result<(), HarnessError> {
    check_label("scheme label", &s.label)?;
    if !s.q.is_finite() || s.q < 1.0 {
        return Err(HarnessError::Spec(format!(
            "scheme {:?}: entropic index q must be finite and >= 1, got {}",
            s.label, s.q
        )));
    }
    if s.q == 1.0 && s.realization == RealizationSpec::Approximate {
        return Err(HarnessError::Spec(format!(
            "scheme {:?}: the approximate sparse realization is undefined for q = 1 \
             (the Boltzmann family has a closed form)",
            s.label
        )));
    }
    if !s.alpha.is_finite() || s.alpha <= 0.0 {
        return Err(HarnessError::Spec(format!(
            "scheme {:?}: alpha must be finite and > 0, got {}",
            s.label, s.alpha
        )));
    }
    if !s.beta.is_finite() || !(0.0..=1.0).contains(&s.beta) {
        return Err(HarnessError::Spec(format!(
            "scheme {:?}: beta must lie in [0, 1], got {}",
            s.label, s.beta
        )));
    }
    if let Some(c) = s.munchausen_coeff {
        if !c.is_finite() || c <= 0.0 {
            return Err(HarnessError::Spec(format!(
                "scheme {:?}: munchausen_coeff must be finite and > 0, got {c}",
                s.label
            )));
        }
        if s.variant != VariantSpec::Munchausen {
            return Err(HarnessError::Spec(format!(
                "scheme {:?}: munchausen_coeff only applies to the munchausen variant",
                s.label
            )));
        }
    }
    Ok(())
}

impl ExperimentSpec {
    /// Parse a TOML document, rejecting unknown fields.
    pub fn parse(toml_text: &str) -> Result<Self, HarnessError> {
        toml::from_str(toml_text).map_err(|e| HarnessError::Spec(e.to_string()))
    }

    /// Structural and range checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), HarnessError> {
        check_label("experiment name", &self.name)?;
        match self.kind {
            ExperimentKind::CartpoleTraining => {
                if self.schemes.is_empty() {
                    return Err(HarnessError::Spec(
                        "cartpole-training requires at least one [[schemes]] entry".into(),
                    ));
                }
                if self.seeds.is_empty() {
                    return Err(HarnessError::Spec(
                        "cartpole-training requires a non-empty seeds list".into(),
                    ));
                }
                if self.chain.is_some() {
                    return Err(HarnessError::Spec(
                        "the [chain] table only applies to chain-action-gap".into(),
                    ));
                }
                let mut labels: Vec<&str> =
                    self.schemes.iter().map(|s| s.label.as_str()).collect();
                labels.sort_unstable();
                labels.dedup();
                if labels.len() != self.schemes.len() {
                    return Err(HarnessError::Spec("scheme labels must be unique".into()));
                }
                for s in &self.schemes {
                    check_scheme(s)?;
                }
            }
            ExperimentKind::ChainActionGap => {
                if !self.schemes.is_empty() {
                    return Err(HarnessError::Spec(
                        "[[schemes]] entries only apply to cartpole-training".into(),
                    ));
                }
                if !self.seeds.is_empty() {
                    return Err(HarnessError::Spec(
                        "chain-action-gap is deterministic; seeds must be omitted".into(),
                    ));
                }
                let chain = self.chain.as_ref().ok_or_else(|| {
                    HarnessError::Spec("chain-action-gap requires a [chain] table".into())
                })?;
                if chain.n_states < 3 {
                    return Err(HarnessError::Spec(format!(
                        "chain.n_states must be at least 3, got {}",
                        chain.n_states
                    )));
                }
                if !(0.0..=0.5).contains(&chain.slip) {
                    return Err(HarnessError::Spec(format!(
                        "chain.slip must lie in [0, 0.5], got {}",
                        chain.slip
                    )));
                }
                if !chain.gamma.is_finite() || !(0.0 < chain.gamma && chain.gamma < 1.0) {
                    return Err(HarnessError::Spec(format!(
                        "chain.gamma must lie in (0, 1), got {}",
                        chain.gamma
                    )));
                }
                if !chain.q.is_finite() || chain.q <= 1.0 {
                    return Err(HarnessError::Spec(format!(
                        "chain.q must be a sparse index (> 1), got {}",
                        chain.q
                    )));
                }
                if !chain.alpha.is_finite() || chain.alpha <= 0.0 {
                    return Err(HarnessError::Spec(format!(
                        "chain.alpha must be finite and > 0, got {}",
                        chain.alpha
                    )));
                }
                if chain.betas.is_empty() {
                    return Err(HarnessError::Spec("chain.betas must be non-empty".into()));
                }
                for &b in &chain.betas {
                    if !b.is_finite() || !(0.0..=1.0).contains(&b) {
                        return Err(HarnessError::Spec(format!(
                            "chain.betas entries must lie in [0, 1], got {b}"
                        )));
                    }
                }
                if chain.max_sweeps == 0 || chain.tol.is_nan() || chain.tol <= 0.0 || !chain.tol.is_finite() {
                    return Err(HarnessError::Spec(
                        "chain.max_sweeps must be positive and chain.tol a positive float"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
