//! Policy-gradient and value-based learners.

mod dqn;
mod gae;
mod ppo;
mod replay;

use thiserror::Error;

use crate::approximator::{NetError, Tensor};

pub use dqn::{
    dqn_targets, epsilon_at, select_action, ActionMode, ActionSelection, DqnAgent, DqnHyperparams,
    DqnLoss, EpsilonSchedule,
};
pub use gae::compute_gae;
pub use ppo::{
    clipped_surrogate, normalize_advantages, ppo_minibatch_loss, ppo_update, ActorCritic, PpoBatch,
    PpoHyperparams, PpoLoss, PpoStats, RolloutBuffer,
};
pub use replay::{ReplayBatch, ReplayBuffer, SumTree, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Adds a leading batch axis of size one.
pub fn batch_of_one(obs: &Tensor) -> Result<Tensor, NetError> {
    let mut shape = Vec::with_capacity(obs.shape().len() + 1);
    shape.push(1);
    shape.extend_from_slice(obs.shape());
    obs.clone().reshape(shape)
}
