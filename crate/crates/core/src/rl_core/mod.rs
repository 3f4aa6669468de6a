//! Verifiable rewards for structured traces and the GRPO objective.

mod grpo;
mod rewards;

use thiserror::Error;

pub use grpo::{
    group_advantages, grpo_objective, grpo_objective_grad, kl_estimate, kl_estimate_with, GrpoConfig,
    GrpoOutput, KlEstimator, RolloutGroup,
};
pub use rewards::{
    reward_acc, reward_acc_with, reward_mps, reward_stage1, reward_stage2, score_output, RewardBreakdown,
    RewardConfig,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlError {
    #[error("a group needs at least 2 responses, got {0}")]
    GroupTooSmall(usize),
    #[error("{what} has {found} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
