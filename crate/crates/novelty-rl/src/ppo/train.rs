use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{evaluate, DoneReason, Environment};
use crate::error::Result;
use crate::metric::{policy_novelty, ReferenceSet};
use crate::nn::{GaussianPolicyParams, MlpParams};
use crate::ppo::update::Optimizers;
use crate::ppo::{build_batch, collect_rollout, ppo_update, PpoConfig, Trajectory};
use crate::strategy::Strategy;

/// Training budget: raw environment transitions or completed episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainBudget {
    Timesteps(usize),
    Episodes(usize),
}

/// One row of the per-update metrics log.
#[derive(Debug, Clone)]
pub struct UpdateMetrics {
    pub update_index: usize,
    pub timesteps: usize,
    pub mean_return: f64,
    pub mean_episode_len: f64,
    pub mean_novelty: f64,
    pub n_novelty_terminations: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Mean return of a short evaluation run after this update; the
    /// success-rate checkpoint trace.
    pub eval_return: f64,
}

impl UpdateMetrics {
    pub const CSV_HEADER: &'static str = "update_index,timesteps,mean_return,mean_episode_len,mean_novelty,n_novelty_terminations,policy_loss,value_loss,eval_return";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.update_index,
            self.timesteps,
            self.mean_return,
            self.mean_episode_len,
            self.mean_novelty,
            self.n_novelty_terminations,
            self.policy_loss,
            self.value_loss,
            self.eval_return
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub policy: GaussianPolicyParams,
    pub metrics: Vec<UpdateMetrics>,
}

impl TrainResult {
    /// Per-update evaluation returns, used as success-rate checkpoints.
    pub fn eval_trace(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.eval_return).collect()
    }
}

fn batch_stats(trajectories: &[Trajectory]) -> (f64, f64, f64, usize, usize) {
    let n_eps = trajectories.len();
    let total_steps: usize = trajectories.iter().map(Trajectory::len).sum();
    let mean_return =
        trajectories.iter().map(Trajectory::episode_return).sum::<f64>() / n_eps.max(1) as f64;
    let mean_len = total_steps as f64 / n_eps.max(1) as f64;
    let novelty_sum: f64 = trajectories
        .iter()
        .flat_map(|t| t.novelty_rewards.iter())
        .sum();
    let mean_novelty = novelty_sum / total_steps.max(1) as f64;
    let n_novelty_term = trajectories
        .iter()
        .filter(|t| t.done_reason == Some(DoneReason::NoveltyTermination))
        .count();
    (mean_return, mean_len, mean_novelty, n_novelty_term, total_steps)
}

/// The outer loop: collect, estimate advantages, update, evaluate, until
/// the budget is spent. Returns the trained policy and one metrics row per
/// update.
pub fn train<E: Environment, R: Rng>(
    policy: &GaussianPolicyParams,
    env: &mut E,
    strategy: &Strategy,
    refs: &ReferenceSet,
    budget: TrainBudget,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<TrainResult> {
    config.validate()?;
    let state_dim = env.spec().state_dim;
    let mut policy = policy.clone();
    let mut critic = MlpParams::glorot(&[state_dim, 32, 32, 1], rng)?;
    let mut cost_critic = MlpParams::glorot(&[state_dim, 32, 32, 1], rng)?;
    let mut opts = Optimizers::new(&policy, &critic, &cost_critic);
    // Evaluation draws from its own stream so checkpoint frequency never
    // perturbs the training randomness.
    let mut eval_rng = ChaCha8Rng::seed_from_u64(rng.gen());

    let mut metrics = Vec::new();
    let mut timesteps = 0usize;
    let mut episodes = 0usize;
    let mut update_index = 0usize;
    loop {
        let exhausted = match budget {
            TrainBudget::Timesteps(t) => timesteps >= t,
            TrainBudget::Episodes(e) => episodes >= e,
        };
        if exhausted {
            break;
        }
        let trajs = collect_rollout(&policy, env, refs, strategy, config.steps_per_update, rng)?;
        let (mean_return, mean_len, mean_novelty, n_novelty_term, total_steps) =
            batch_stats(&trajs);
        timesteps += total_steps;
        episodes += trajs.len();
        let batch_novelty = policy_novelty(&policy, refs, &trajs)?;
        let batch = build_batch(&trajs, &critic, &cost_critic, config)?;
        let stats = ppo_update(
            &mut policy,
            &mut critic,
            &mut cost_critic,
            &mut opts,
            &batch,
            config,
            strategy,
            batch_novelty,
            rng,
        )?;
        update_index += 1;
        let eval_return = if config.eval_trials > 0 {
            evaluate(&policy, env, config.eval_trials, &mut eval_rng)?.mean_return
        } else {
            f64::NAN
        };
        metrics.push(UpdateMetrics {
            update_index,
            timesteps,
            mean_return,
            mean_episode_len: mean_len,
            mean_novelty,
            n_novelty_terminations: n_novelty_term,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            eval_return,
        });
    }
    Ok(TrainResult { policy, metrics })
}
