use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{gaussian_log_prob, AdamState, GaussianPolicyParams, MlpParams};
use crate::ppo::{gae, PpoConfig, RolloutBatch, Trajectory};
use crate::strategy::{Direction, Strategy};

/// Assemble a [`RolloutBatch`]: per-trajectory GAE on both the task-reward
/// and novelty streams, then batch-normalize the reward advantages only.
pub fn build_batch(
    trajectories: &[Trajectory],
    critic: &MlpParams,
    cost_critic: &MlpParams,
    config: &PpoConfig,
) -> Result<RolloutBatch> {
    let mut batch = RolloutBatch {
        states: Vec::new(),
        actions: Vec::new(),
        old_log_probs: Vec::new(),
        reward_advantages: Vec::new(),
        cost_advantages: Vec::new(),
        reward_returns: Vec::new(),
        cost_returns: Vec::new(),
    };
    for traj in trajectories {
        let values: Vec<f64> = traj
            .states
            .iter()
            .map(|s| critic.forward(s).map(|v| v[0]))
            .collect::<Result<_>>()?;
        let cost_values: Vec<f64> = traj
            .states
            .iter()
            .map(|s| cost_critic.forward(s).map(|v| v[0]))
            .collect::<Result<_>>()?;
        // Every collected episode ends terminal (reward region, step limit
        // or novelty termination), so no bootstrap value is needed.
        let (adv_r, ret_r) = gae(
            &traj.task_rewards,
            &values,
            0.0,
            &traj.dones,
            config.gamma,
            config.lambda,
        )?;
        let (adv_c, ret_c) = gae(
            &traj.novelty_rewards,
            &cost_values,
            0.0,
            &traj.dones,
            config.gamma,
            config.lambda,
        )?;
        batch.states.extend(traj.states.iter().cloned());
        batch.actions.extend(traj.actions.iter().cloned());
        batch.old_log_probs.extend_from_slice(&traj.log_probs);
        batch.reward_advantages.extend(adv_r);
        batch.cost_advantages.extend(adv_c);
        batch.reward_returns.extend(ret_r);
        batch.cost_returns.extend(ret_c);
    }
    if batch.reward_advantages.iter().any(|a| !a.is_finite())
        || batch.cost_advantages.iter().any(|a| !a.is_finite())
    {
        return Err(Error::NonFinite("advantages".into()));
    }
    normalize(&mut batch.reward_advantages);
    Ok(batch)
}

fn normalize(xs: &mut [f64]) {
    let n = xs.len() as f64;
    if n < 2.0 {
        return;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}

/// Ascent gradient of the clipped surrogate on one advantage stream over
/// the indexed samples, averaged, in flattened policy-parameter order.
fn surrogate_gradient(
    policy: &GaussianPolicyParams,
    batch: &RolloutBatch,
    indices: &[usize],
    advantages: &[f64],
    clip: f64,
) -> Result<(Direction, f64)> {
    let log_std = policy.clamped_log_std();
    let sigma: Vec<f64> = log_std.iter().map(|x| x.exp()).collect();
    let n_mlp = policy.mlp.n_params();
    let mut grad = vec![0.0; policy.n_params()];
    let mut loss = 0.0;
    let mut mlp_acc = crate::nn::MlpGrads::zeros_like(&policy.mlp);
    for &i in indices {
        let state = &batch.states[i];
        let action = &batch.actions[i];
        let mean = policy.mlp.forward(state)?;
        let logp = gaussian_log_prob(&mean, &log_std, action)?;
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let adv = advantages[i];
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        loss += (ratio * adv).min(clipped * adv);
        // The clipped branch is active (zero gradient) when the ratio has
        // left the trust region in the direction the advantage pushes it.
        let clip_active = (adv >= 0.0 && ratio > 1.0 + clip) || (adv <= 0.0 && ratio < 1.0 - clip);
        if clip_active || adv == 0.0 {
            continue;
        }
        let coef = ratio * adv;
        // d logp / d mean_d = (a_d - m_d) / sigma_d^2
        let upstream: Vec<f64> = (0..mean.len())
            .map(|d| coef * (action[d] - mean[d]) / (sigma[d] * sigma[d]))
            .collect();
        let g = policy.mlp.backward(state, &upstream)?;
        mlp_acc.add(&g);
        // d logp / d log_std_d = z_d^2 - 1
        for d in 0..mean.len() {
            let z = (action[d] - mean[d]) / sigma[d];
            grad[n_mlp + d] += coef * (z * z - 1.0);
        }
    }
    let scale = 1.0 / indices.len().max(1) as f64;
    let flat_mlp = mlp_acc.flatten();
    for (g, v) in grad[..n_mlp].iter_mut().zip(&flat_mlp) {
        *g = v * scale;
    }
    for g in grad[n_mlp..].iter_mut() {
        *g *= scale;
    }
    Ok((Direction(grad), loss * scale))
}

/// Descent gradient of `weight * mean (V(s) - target)^2` for a value net.
fn value_gradient(
    net: &MlpParams,
    batch: &RolloutBatch,
    indices: &[usize],
    targets: &[f64],
    weight: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut acc = crate::nn::MlpGrads::zeros_like(net);
    let mut loss = 0.0;
    for &i in indices {
        let v = net.forward(&batch.states[i])?[0];
        let err = v - targets[i];
        loss += err * err;
        let g = net.backward(&batch.states[i], &[2.0 * err])?;
        acc.add(&g);
    }
    let scale = weight / indices.len().max(1) as f64;
    acc.scale(scale);
    Ok((acc.flatten(), loss * scale))
}

/// Optimizer state for the three networks of one training run.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub policy: AdamState,
    pub critic: AdamState,
    pub cost_critic: AdamState,
}

impl Optimizers {
    pub fn new(policy: &GaussianPolicyParams, critic: &MlpParams, cost_critic: &MlpParams) -> Self {
        Self {
            policy: AdamState::new(policy.n_params()),
            critic: AdamState::new(critic.n_params()),
            cost_critic: AdamState::new(cost_critic.n_params()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UpdateStats {
    /// Full-batch ascent gradient of the reward surrogate at the pre-update
    /// parameters.
    pub g_r: Direction,
    /// Full-batch ascent gradient of the cost (novelty) surrogate; points
    /// toward increasing expected novelty.
    pub g_c: Direction,
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// One PPO update: several epochs of minibatch steps. Each minibatch
/// computes the reward and cost surrogate gradients, lets the strategy
/// combine them, and applies the result with Adam; both value nets are
/// regression-fitted to their returns on the same minibatches.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng>(
    policy: &mut GaussianPolicyParams,
    critic: &mut MlpParams,
    cost_critic: &mut MlpParams,
    opts: &mut Optimizers,
    batch: &RolloutBatch,
    config: &PpoConfig,
    strategy: &Strategy,
    batch_novelty: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::Domain("empty rollout batch".into()));
    }
    let all: Vec<usize> = (0..batch.len()).collect();
    let (g_r, policy_loss) =
        surrogate_gradient(policy, batch, &all, &batch.reward_advantages, config.clip)?;
    let (g_c, _) = surrogate_gradient(policy, batch, &all, &batch.cost_advantages, config.clip)?;
    if !policy_loss.is_finite() {
        return Err(Error::NonFinite(format!("policy loss {policy_loss}")));
    }

    let mut value_loss_total = 0.0;
    let mut value_loss_count = 0usize;
    let mut indices = all.clone();
    for _ in 0..config.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(config.minibatch_size) {
            let (g_f, _) =
                surrogate_gradient(policy, batch, chunk, &batch.reward_advantages, config.clip)?;
            let (g_g, _) =
                surrogate_gradient(policy, batch, chunk, &batch.cost_advantages, config.clip)?;
            let dir = strategy.combine(&g_f, &g_g, batch_novelty)?;
            // Ascent: Adam descends, so feed the negated direction.
            let descent: Vec<f64> = dir.0.iter().map(|x| -x).collect();
            let mut flat = policy.flatten();
            opts.policy.step(&mut flat, &descent, config.lr)?;
            policy.assign_flat(&flat)?;

            let (vg, vl) = value_gradient(
                critic,
                batch,
                chunk,
                &batch.reward_returns,
                config.value_loss_weight,
            )?;
            let mut cflat = critic.flatten();
            opts.critic.step(&mut cflat, &vg, config.lr)?;
            critic.assign_flat(&cflat)?;
            value_loss_total += vl;
            value_loss_count += 1;

            let (cg, _) = value_gradient(
                cost_critic,
                batch,
                chunk,
                &batch.cost_returns,
                config.value_loss_weight,
            )?;
            let mut ccflat = cost_critic.flatten();
            opts.cost_critic.step(&mut ccflat, &cg, config.lr)?;
            cost_critic.assign_flat(&ccflat)?;
        }
    }
    Ok(UpdateStats {
        g_r,
        g_c,
        policy_loss,
        value_loss: value_loss_total / value_loss_count.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MazeEnv;
    use crate::metric::ReferenceSet;
    use crate::ppo::collect_rollout;
    use crate::strategy::{make_strategy, NoveltyConfig, StrategyKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_batch(seed: u64) -> (GaussianPolicyParams, RolloutBatch) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = GaussianPolicyParams::new(2, 2, &mut rng).unwrap();
        let mut env = MazeEnv::new();
        let refs = ReferenceSet::new();
        let strat = make_strategy(NoveltyConfig::new(StrategyKind::Ppo)).unwrap();
        let trajs = collect_rollout(&policy, &mut env, &refs, &strat, 256, &mut rng).unwrap();
        let critic = MlpParams::glorot(&[2, 32, 32, 1], &mut rng).unwrap();
        let cost_critic = MlpParams::zeros(&[2, 32, 32, 1]).unwrap();
        let cfg = PpoConfig::default();
        let batch = build_batch(&trajs, &critic, &cost_critic, &cfg).unwrap();
        (policy, batch)
    }

    #[test]
    fn reward_advantages_are_normalized() {
        let (_, batch) = small_batch(0);
        let n = batch.len() as f64;
        let mean = batch.reward_advantages.iter().sum::<f64>() / n;
        let var = batch
            .reward_advantages
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 1e-10);
        assert!((var.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ratio_one_matches_vanilla_policy_gradient() {
        // Freshly collected batch: logp_new == logp_old, so the surrogate
        // gradient must equal mean A * grad logp.
        let (policy, batch) = small_batch(1);
        let all: Vec<usize> = (0..batch.len()).collect();
        let (g, _) =
            surrogate_gradient(&policy, &batch, &all, &batch.reward_advantages, 0.2).unwrap();
        // Vanilla estimator computed independently.
        let log_std = policy.clamped_log_std();
        let sigma: Vec<f64> = log_std.iter().map(|x| x.exp()).collect();
        let n_mlp = policy.mlp.n_params();
        let mut expect = vec![0.0; policy.n_params()];
        let mut acc = crate::nn::MlpGrads::zeros_like(&policy.mlp);
        for i in 0..batch.len() {
            let mean = policy.mlp.forward(&batch.states[i]).unwrap();
            let adv = batch.reward_advantages[i];
            if adv == 0.0 {
                continue;
            }
            let upstream: Vec<f64> = (0..2)
                .map(|d| adv * (batch.actions[i][d] - mean[d]) / (sigma[d] * sigma[d]))
                .collect();
            acc.add(&policy.mlp.backward(&batch.states[i], &upstream).unwrap());
            for d in 0..2 {
                let z = (batch.actions[i][d] - mean[d]) / sigma[d];
                expect[n_mlp + d] += adv * (z * z - 1.0);
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for (e, v) in expect[..n_mlp].iter_mut().zip(&acc.flatten()) {
            *e = v * scale;
        }
        for e in expect[n_mlp..].iter_mut() {
            *e *= scale;
        }
        for (a, b) in g.0.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn clipped_sample_contributes_no_gradient() {
        let (policy, mut batch) = small_batch(2);
        // Force a large positive advantage with an artificially low stored
        // log-prob so the ratio exceeds 1 + clip.
        batch.reward_advantages.iter_mut().for_each(|a| *a = 0.0);
        batch.reward_advantages[0] = 1.0;
        batch.old_log_probs[0] -= 1.0; // ratio = e > 1.2
        let idx = vec![0usize];
        let (g, _) =
            surrogate_gradient(&policy, &batch, &idx, &batch.reward_advantages, 0.2).unwrap();
        assert!(g.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_advantages_zero_gradient() {
        let (policy, mut batch) = small_batch(3);
        batch.reward_advantages.iter_mut().for_each(|a| *a = 0.0);
        let all: Vec<usize> = (0..batch.len()).collect();
        let (g, _) =
            surrogate_gradient(&policy, &batch, &all, &batch.reward_advantages, 0.2).unwrap();
        assert!(g.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn clip_containment() {
        let (_, batch) = small_batch(4);
        let clip = 0.2;
        for i in 0..batch.len() {
            let ratio = (batch.old_log_probs[i] - batch.old_log_probs[i]).exp();
            let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
            assert!((1.0 - clip..=1.0 + clip).contains(&clipped));
        }
    }

    #[test]
    fn update_runs_and_returns_gradients() {
        let (mut policy, batch) = small_batch(5);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut critic = MlpParams::glorot(&[2, 32, 32, 1], &mut rng).unwrap();
        let mut cost_critic = MlpParams::glorot(&[2, 32, 32, 1], &mut rng).unwrap();
        let mut opts = Optimizers::new(&policy, &critic, &cost_critic);
        let cfg = PpoConfig {
            epochs: 2,
            ..PpoConfig::default()
        };
        let strat = make_strategy(NoveltyConfig::new(StrategyKind::Ppo)).unwrap();
        let before = policy.flatten();
        let stats = ppo_update(
            &mut policy,
            &mut critic,
            &mut cost_critic,
            &mut opts,
            &batch,
            &cfg,
            &strat,
            f64::INFINITY,
            &mut rng,
        )
        .unwrap();
        assert!(stats.g_r.0.iter().any(|&x| x != 0.0));
        assert!(stats.policy_loss.is_finite());
        assert_ne!(before, policy.flatten());
    }
}
