//! Constrained novelty seeking for populations of PPO policies.
//!
//! Trains a sequence of behaviorally distinct policies for one task by
//! treating novelty, the minimal Wasserstein-style distance to previously
//! trained policies, as a constraint rather than an extra objective.
//! Ships a PPO backbone, the policy metric and its trajectory estimators,
//! the WSR / TNB / CTNB / IPD update schemes, the Four Reward Maze
//! diagnostic environment, and an experiment harness with a CLI.

pub mod env;
pub mod error;
pub mod harness;
pub mod metric;
pub mod nn;
pub mod ppo;
pub mod strategy;

pub use error::{Error, Result};
