//! Baseline advantage actor-critic: λ-returns, return scaling, the
//! distributional critic loss and the Reinforce actor loss.

mod losses;
mod returns;
mod scale;

pub use losses::{
    actor_loss_normalized, actor_loss_reinforce, critic_loss, ActorLoss, CriticLossConfig, LossGrad, LossSample,
    LOG_PROB_FLOOR,
};
pub(crate) use losses::{check_target, critic_terms, cross_entropy, reinforce_terms};
pub use returns::{lambda_return_at, lambda_returns, LambdaReturnConfig};
pub use scale::{percentile, ScaleStats};
