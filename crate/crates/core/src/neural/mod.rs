//! Q-function approximation: a small feed-forward network trained by SGD
//! against a frozen target copy, fed from an experience replay buffer.

mod network;
mod replay;

pub use network::{bellman_target, train_batch, Gradients, QWeights};
pub use replay::{Experience, ReplayBuffer};

/// Hidden width used unless a config overrides it.
pub const DEFAULT_HIDDEN: usize = 80;
