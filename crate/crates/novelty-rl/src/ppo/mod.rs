//! On-policy backbone: rollout collection with strategy termination hooks,
//! generalized advantage estimation over separate task and novelty streams,
//! clipped-surrogate updates, and the outer training loop.

mod gae;
mod rollout;
mod train;
mod update;

pub use gae::gae;
pub use rollout::{collect_episodes, collect_rollout};
pub use train::{train, TrainBudget, TrainResult, UpdateMetrics};
pub use update::{build_batch, ppo_update, Optimizers, UpdateStats};

use crate::env::DoneReason;
use crate::error::{Error, Result};

/// Per-episode record of everything the update step needs.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub action_means: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub task_rewards: Vec<f64>,
    pub novelty_rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub done_reason: Option<DoneReason>,
    /// State reached after the final step.
    pub final_state: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn episode_return(&self) -> f64 {
        self.task_rewards.iter().sum()
    }
}

/// Concatenated trajectories with advantages for both streams. Reward
/// advantages are batch-normalized; cost advantages stay in metric units.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub reward_advantages: Vec<f64>,
    pub cost_advantages: Vec<f64>,
    pub reward_returns: Vec<f64>,
    pub cost_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub steps_per_update: usize,
    pub value_loss_weight: f64,
    pub entropy_weight: f64,
    pub lr: f64,
    pub eval_trials: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 10,
            minibatch_size: 64,
            steps_per_update: 2048,
            value_loss_weight: 0.5,
            entropy_weight: 0.0,
            lr: 3e-4,
            eval_trials: 20,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("lambda must be in [0, 1]".into()));
        }
        if self.clip <= 0.0 {
            return Err(Error::Config("clip must be positive".into()));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.steps_per_update == 0 {
            return Err(Error::Config("epochs/minibatch/steps must be positive".into()));
        }
        Ok(())
    }
}
