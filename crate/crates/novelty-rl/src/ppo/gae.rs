use crate::error::{Error, Result};

/// Generalized advantage estimation.
///
/// `delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t`,
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`,
/// `return_t = A_t + V_t`. `bootstrap_value` stands in for `V_{T}` past the
/// end of the sequence.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_len = rewards.len();
    if values.len() != t_len || dones.len() != t_len {
        return Err(Error::Shape(format!(
            "gae lengths r={} v={} d={}",
            t_len,
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; t_len];
    let mut returns = vec![0.0; t_len];
    let mut next_adv = 0.0;
    for t in (0..t_len).rev() {
        let next_value = if t + 1 < t_len { values[t + 1] } else { bootstrap_value };
        let nonterminal = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * nonterminal - values[t];
        next_adv = delta + gamma * lambda * nonterminal * next_adv;
        advantages[t] = next_adv;
        returns[t] = next_adv + values[t];
    }
    Ok((advantages, returns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn undiscounted_cumulative_sums() {
        let (adv, ret) = gae(&[1.0, 1.0], &[0.0, 0.0], 0.0, &[false, true], 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![2.0, 1.0]);
        assert_eq!(ret, vec![2.0, 1.0]);
    }

    #[test]
    fn single_terminal_step() {
        let (adv, _) = gae(&[3.0], &[1.25], 0.0, &[true], 0.99, 0.95).unwrap();
        assert!((adv[0] - (3.0 - 1.25)).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let rewards = [0.5, -0.2, 1.0];
        let values = [0.1, 0.3, -0.4];
        let dones = [false, false, true];
        let gamma = 0.9;
        let (adv, _) = gae(&rewards, &values, 0.0, &dones, gamma, 0.0).unwrap();
        for t in 0..3 {
            let next_v = if t + 1 < 3 { values[t + 1] } else { 0.0 };
            let nonterminal = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] + gamma * next_v * nonterminal - values[t];
            assert!((adv[t] - delta).abs() < 1e-12);
        }
    }

    /// Brute-force oracle: A_t = sum_l (gamma*lambda)^l delta_{t+l} up to the
    /// first terminal.
    fn brute_force(
        rewards: &[f64],
        values: &[f64],
        bootstrap: f64,
        dones: &[bool],
        gamma: f64,
        lambda: f64,
    ) -> Vec<f64> {
        let t_len = rewards.len();
        let delta: Vec<f64> = (0..t_len)
            .map(|t| {
                let next_v = if t + 1 < t_len { values[t + 1] } else { bootstrap };
                let nonterminal = if dones[t] { 0.0 } else { 1.0 };
                rewards[t] + gamma * next_v * nonterminal - values[t]
            })
            .collect();
        (0..t_len)
            .map(|t| {
                let mut acc = 0.0;
                let mut w = 1.0;
                for l in t..t_len {
                    acc += w * delta[l];
                    if dones[l] {
                        break;
                    }
                    w *= gamma * lambda;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_random_horizons() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..100 {
            let t_len = rng.gen_range(1..=6);
            let rewards: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let values: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut dones = vec![false; t_len];
            dones[t_len - 1] = rng.gen_bool(0.8);
            let gamma = rng.gen_range(0.0..1.0);
            let lambda = rng.gen_range(0.0..=1.0);
            let bootstrap = rng.gen_range(-2.0..2.0);
            let (adv, ret) = gae(&rewards, &values, bootstrap, &dones, gamma, lambda).unwrap();
            let oracle = brute_force(&rewards, &values, bootstrap, &dones, gamma, lambda);
            for t in 0..t_len {
                assert!((adv[t] - oracle[t]).abs() < 1e-10);
                assert!((ret[t] - (oracle[t] + values[t])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(gae(&[1.0], &[0.0, 0.0], 0.0, &[true], 0.9, 0.9).is_err());
    }
}
