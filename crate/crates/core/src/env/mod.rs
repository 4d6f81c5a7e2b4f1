//! Finite MDPs, exact planning oracles and the replay buffer.

mod buffer;
pub mod builtin;
mod mdp;
pub mod planning;

pub use buffer::{ReplayBuffer, Transition};
pub use builtin::EnvSpec;
pub use mdp::{one_hot, sample_categorical, MdpSpec, StepOutcome};
pub use planning::{policy_evaluation, value_iteration, Solution};
