use rand::Rng;

use crate::env::{DoneReason, Environment};
use crate::error::Result;
use crate::metric::{pointwise_novelty, NoveltyTrace, ReferenceSet};
use crate::nn::GaussianPolicyParams;
use crate::ppo::Trajectory;
use crate::strategy::Strategy;

/// Collect whole episodes until at least `steps_target` transitions are
/// gathered. Novelty is recorded per step whenever the reference set is
/// nonempty; the strategy's termination hook may end an episode early with
/// [`DoneReason::NoveltyTermination`].
pub fn collect_rollout<E: Environment, R: Rng>(
    policy: &GaussianPolicyParams,
    env: &mut E,
    refs: &ReferenceSet,
    strategy: &Strategy,
    steps_target: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let mut trajectories = Vec::new();
    let mut total_steps = 0usize;
    while total_steps < steps_target {
        let mut traj = Trajectory::default();
        let mut trace = NoveltyTrace::new();
        let mut state = env.reset(rng);
        loop {
            let (action, log_prob, mean) = policy.sample_action(&state, rng)?;
            let r_int = if refs.is_empty() {
                0.0
            } else {
                let r = pointwise_novelty(policy, refs, &state)?;
                trace.push(r)?;
                r
            };
            let step = env.step(&action)?;
            traj.states.push(state);
            traj.actions.push(action);
            traj.action_means.push(mean);
            traj.log_probs.push(log_prob);
            traj.task_rewards.push(step.reward);
            traj.novelty_rewards.push(r_int);
            total_steps += 1;
            let t = traj.len();
            if step.done {
                traj.dones.push(true);
                traj.done_reason = step.done_reason;
                traj.final_state = step.next_state;
                break;
            }
            if strategy.should_terminate(&trace, t) {
                traj.dones.push(true);
                traj.done_reason = Some(DoneReason::NoveltyTermination);
                traj.final_state = step.next_state;
                break;
            }
            traj.dones.push(false);
            state = step.next_state;
        }
        trajectories.push(traj);
    }
    Ok(trajectories)
}

/// Collect exactly `n_episodes` full episodes with stochastic actions and
/// no novelty bookkeeping; used for evaluation and novelty estimation.
pub fn collect_episodes<E: Environment, R: Rng>(
    policy: &GaussianPolicyParams,
    env: &mut E,
    n_episodes: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let mut trajectories = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut traj = Trajectory::default();
        let mut state = env.reset(rng);
        loop {
            let (action, log_prob, mean) = policy.sample_action(&state, rng)?;
            let step = env.step(&action)?;
            traj.states.push(state);
            traj.actions.push(action);
            traj.action_means.push(mean);
            traj.log_probs.push(log_prob);
            traj.task_rewards.push(step.reward);
            traj.novelty_rewards.push(0.0);
            traj.dones.push(step.done);
            state = step.next_state;
            if step.done {
                traj.done_reason = step.done_reason;
                traj.final_state = state.clone();
                break;
            }
        }
        trajectories.push(traj);
    }
    Ok(trajectories)
}
