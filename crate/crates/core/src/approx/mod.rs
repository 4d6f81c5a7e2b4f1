//! Small differentiable approximators with hand-written gradients.

mod adam;
mod batch;
pub mod checkpoint;
mod mlp;
mod twohot;

pub use adam::{clip_global_norm, ema_update, AdamConfig, OptimizerState};
pub use batch::StatePass;
pub use checkpoint::Checkpoint;
pub use mlp::{
    critic_forward, log_softmax, policy_forward, softmax, Activation, CriticOutput, Forward, ForwardCache, Mlp,
    MlpSpec, ParamLayout, ParamSlice, ParamVector, PolicyOutput,
};
pub use twohot::{expected_value, two_hot_encode, Bins, ValueDistribution};
