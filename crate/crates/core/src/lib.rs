//! Actor-critic agents regularized toward online guide policies (uniform
//! random, behavior cloning, AlphaZero-style search) on small MDPs with
//! exact solutions.

// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actor_critic;
pub mod approx;
pub mod env;
pub mod error;
pub mod guide;
pub mod harness;
pub mod mcts;

pub use error::{Error, Result};
