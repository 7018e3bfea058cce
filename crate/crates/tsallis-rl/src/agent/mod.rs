//! Deep value-based agent: a two-hidden-layer network trained with Adam on
//! replayed transitions against a periodically frozen copy of itself.
//!
//! Three interchangeable targets are provided — advantage augmentation
//! ([`tal_loss`]), floored log-policy augmentation ([`mt_loss`]), and plain
//! regularized value iteration (the advantage form with `beta = 0`) — all
//! parameterized by the same policy family configuration used by the tabular
//! operators. Training is generic over the element type: `f32` for speed,
//! `f64` for finite-difference verification of the gradients.

mod loss;
mod mlp;
mod replay;
mod train;

pub use loss::{act, assemble_batch, mt_loss, tal_loss, Batch};
pub use mlp::{Adam, Dtype, Mlp, MlpGrads};
pub use replay::{ReplayBuffer, Transition};
pub use train::{train, Agent, AgentConfig, CurvePoint, LearningCurve, SchemeVariant};
