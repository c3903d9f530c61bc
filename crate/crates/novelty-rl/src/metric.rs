//! Policy distance and novelty machinery: the closed-form Gaussian
//! Wasserstein-2 distance, pointwise and trajectory-based novelty against a
//! reference set, and the single-trajectory visitation estimator.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::GaussianPolicyParams;
use crate::ppo::Trajectory;

/// W2 between two diagonal Gaussians:
/// `sqrt(||m1 - m2||^2 + sum_d (s1_d - s2_d)^2)`.
pub fn wasserstein2_gaussian(m1: &[f64], s1: &[f64], m2: &[f64], s2: &[f64]) -> Result<f64> {
    if m1.len() != m2.len() || s1.len() != s2.len() || m1.len() != s1.len() {
        return Err(Error::Shape("wasserstein2_gaussian dims".into()));
    }
    if s1.iter().chain(s2).any(|&s| s < 0.0) {
        return Err(Error::Domain("negative sigma".into()));
    }
    let mut acc = 0.0;
    for d in 0..m1.len() {
        let dm = m1[d] - m2[d];
        let ds = s1[d] - s2[d];
        acc += dm * dm + ds * ds;
    }
    Ok(acc.sqrt())
}

/// Euclidean distance between the two policies' deterministic actions at `state`.
fn mean_distance(a: &GaussianPolicyParams, b: &GaussianPolicyParams, state: &[f64]) -> Result<f64> {
    let ma = a.mean(state)?;
    let mb = b.mean(state)?;
    Ok(ma
        .iter()
        .zip(&mb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Expectation of the full Gaussian W2 over a shared state sample.
pub fn expected_w2(
    a: &GaussianPolicyParams,
    b: &GaussianPolicyParams,
    states: &[Vec<f64>],
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Domain("expected_w2 over zero states".into()));
    }
    let sa: Vec<f64> = a.clamped_log_std().iter().map(|x| x.exp()).collect();
    let sb: Vec<f64> = b.clamped_log_std().iter().map(|x| x.exp()).collect();
    let mut acc = 0.0;
    for s in states {
        acc += wasserstein2_gaussian(&a.mean(s)?, &sa, &b.mean(s)?, &sb)?;
    }
    Ok(acc / states.len() as f64)
}

/// Immutable ordered set of previously trained policies.
#[derive(Debug, Clone, Default)]
pub struct ReferenceSet {
    policies: Vec<GaussianPolicyParams>,
    ids: Vec<String>,
}

impl ReferenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: impl Into<String>, policy: GaussianPolicyParams) {
        self.ids.push(id.into());
        self.policies.push(policy);
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn policies(&self) -> &[GaussianPolicyParams] {
        &self.policies
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Instant novelty `r_int` at one state: min over references of the
/// deterministic-action distance. An empty reference set yields `+inf`
/// so that every strategy degenerates to plain PPO for the first policy.
pub fn pointwise_novelty(
    policy: &GaussianPolicyParams,
    refs: &ReferenceSet,
    state: &[f64],
) -> Result<f64> {
    if refs.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut best = f64::INFINITY;
    for r in refs.policies() {
        let d = mean_distance(policy, r, state)?;
        if d < best {
            best = d;
        }
    }
    Ok(best)
}

/// Per-episode novelty stream and its running cumulative mean.
#[derive(Debug, Clone, Default)]
pub struct NoveltyTrace {
    per_step: Vec<f64>,
    running_mean: Vec<f64>,
    sum: f64,
}

impl NoveltyTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r_int: f64) -> Result<()> {
        if r_int < 0.0 {
            return Err(Error::Domain(format!("negative novelty {r_int}")));
        }
        self.per_step.push(r_int);
        self.sum += r_int;
        self.running_mean.push(self.sum / self.per_step.len() as f64);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }

    pub fn per_step(&self) -> &[f64] {
        &self.per_step
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn last_running_mean(&self) -> Option<f64> {
        self.running_mean.last().copied()
    }
}

/// Trajectory-based estimate of the novelty `U(policy | refs)`: per
/// reference, the mean deterministic-action distance over every visited
/// state; then the min over references.
pub fn policy_novelty(
    policy: &GaussianPolicyParams,
    refs: &ReferenceSet,
    trajectories: &[Trajectory],
) -> Result<f64> {
    if refs.is_empty() {
        return Ok(f64::INFINITY);
    }
    let n_states: usize = trajectories.iter().map(|t| t.states.len()).sum();
    if n_states == 0 {
        return Err(Error::Domain("policy_novelty over zero states".into()));
    }
    let mut best = f64::INFINITY;
    for r in refs.policies() {
        let mut acc = 0.0;
        for traj in trajectories {
            for s in &traj.states {
                acc += mean_distance(policy, r, s)?;
            }
        }
        let avg = acc / n_states as f64;
        if avg < best {
            best = avg;
        }
    }
    Ok(best)
}

/// Pairwise novelty of a population. Entry `(i, j)` is the state-averaged
/// distance of policy `i` against policy `j` over policy `i`'s own
/// evaluation trajectories; the diagonal is zero.
#[derive(Debug, Clone)]
pub struct NoveltyMatrix {
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl NoveltyMatrix {
    pub fn mean_offdiag(&self) -> f64 {
        let n = self.values.len();
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += self.values[i][j];
                    count += 1;
                }
            }
        }
        acc / count as f64
    }

    /// CSV export: header of policy ids, one row per policy, final row
    /// `mean_offdiag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("id,");
        out.push_str(&self.ids.join(","));
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("mean_offdiag,{}\n", self.mean_offdiag()));
        out
    }
}

pub fn pairwise_novelty_matrix(
    population: &[(String, GaussianPolicyParams)],
    eval_trajectories: &[Vec<Trajectory>],
) -> Result<NoveltyMatrix> {
    if population.len() < 2 {
        return Err(Error::Domain("pairwise matrix needs >= 2 policies".into()));
    }
    if eval_trajectories.len() != population.len()
        || eval_trajectories.iter().any(|t| t.is_empty())
    {
        return Err(Error::Domain(
            "every policy needs at least one evaluation trajectory".into(),
        ));
    }
    let n = population.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut single = ReferenceSet::new();
            single.push(population[j].0.clone(), population[j].1.clone());
            values[i][j] = policy_novelty(&population[i].1, &single, &eval_trajectories[i])?;
        }
    }
    Ok(NoveltyMatrix {
        ids: population.iter().map(|(id, _)| id.clone()).collect(),
        values,
    })
}

/// Visitation histogram: per-cell visit counts divided by the number of
/// trajectories. These are expected per-trajectory visit counts, not a
/// normalized distribution, and may exceed one.
pub fn visitation_estimate<B, F>(trajectories: &[Trajectory], bin: F) -> BTreeMap<B, f64>
where
    B: Ord,
    F: Fn(&[f64]) -> B,
{
    let mut counts: BTreeMap<B, f64> = BTreeMap::new();
    let n = trajectories.len().max(1) as f64;
    for traj in trajectories {
        for s in &traj.states {
            *counts.entry(bin(s)).or_insert(0.0) += 1.0;
        }
    }
    for v in counts.values_mut() {
        *v /= n;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn traj_with_states(states: Vec<Vec<f64>>) -> Trajectory {
        let mut t = Trajectory::default();
        t.states = states;
        t
    }

    fn constant_policy(offset: f64) -> GaussianPolicyParams {
        // Zero weights, output bias = offset: mean(s) = offset everywhere.
        let mut mlp = MlpParams::zeros(&[2, 4, 4, 1]).unwrap();
        let last = mlp.biases.len() - 1;
        mlp.biases[last][0] = offset;
        GaussianPolicyParams {
            mlp,
            log_std: vec![0.0],
        }
    }

    #[test]
    fn w2_identity() {
        let d = wasserstein2_gaussian(&[1.0, 2.0], &[0.5, 0.5], &[1.0, 2.0], &[0.5, 0.5]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn w2_equal_sigmas_is_mean_distance() {
        let d = wasserstein2_gaussian(&[0.0, 0.0], &[1.0, 1.0], &[3.0, 4.0], &[1.0, 1.0]).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn w2_scalar_sigma_difference() {
        let d = wasserstein2_gaussian(&[0.0], &[1.0], &[0.0], &[2.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w2_negative_sigma_rejected() {
        assert!(wasserstein2_gaussian(&[0.0], &[-0.1], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn pointwise_novelty_of_copy_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicyParams::new(2, 2, &mut rng).unwrap();
        let mut refs = ReferenceSet::new();
        refs.push("copy", p.clone());
        for s in [[0.0, 0.0], [4.0, 9.0], [16.0, 2.0]] {
            assert_eq!(pointwise_novelty(&p, &refs, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn pointwise_novelty_takes_min() {
        let p = constant_policy(0.0);
        let mut refs = ReferenceSet::new();
        refs.push("a", constant_policy(0.5));
        refs.push("b", constant_policy(-0.3));
        refs.push("c", constant_policy(0.9));
        let r = pointwise_novelty(&p, &refs, &[1.0, 1.0]).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pointwise_novelty_scalar_offset() {
        let p = constant_policy(1.0);
        let mut refs = ReferenceSet::new();
        refs.push("r", constant_policy(-0.5));
        let r = pointwise_novelty(&p, &refs, &[2.0, 3.0]).unwrap();
        assert!((r - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_refs_is_infinite() {
        let p = constant_policy(0.0);
        let refs = ReferenceSet::new();
        assert!(pointwise_novelty(&p, &refs, &[0.0, 0.0]).unwrap().is_infinite());
    }

    #[test]
    fn trace_single_push() {
        let mut tr = NoveltyTrace::new();
        tr.push(2.0).unwrap();
        assert_eq!(tr.running_mean(), &[2.0]);
    }

    #[test]
    fn trace_cumulative_means() {
        let mut tr = NoveltyTrace::new();
        tr.push(1.0).unwrap();
        tr.push(3.0).unwrap();
        tr.push(5.0).unwrap();
        let rm = tr.running_mean();
        assert!((rm[0] - 1.0).abs() < 1e-12);
        assert!((rm[1] - 2.0).abs() < 1e-12);
        assert!((rm[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_zeros_monotone_nonincreasing() {
        let mut tr = NoveltyTrace::new();
        tr.push(1.5).unwrap();
        for _ in 0..10 {
            tr.push(0.0).unwrap();
        }
        let rm = tr.running_mean();
        for w in rm.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn trace_rejects_negative() {
        let mut tr = NoveltyTrace::new();
        assert!(tr.push(-0.1).is_err());
    }

    #[test]
    fn policy_novelty_of_self_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = GaussianPolicyParams::new(2, 1, &mut rng).unwrap();
        let mut refs = ReferenceSet::new();
        refs.push("self", p.clone());
        let trajs = vec![traj_with_states(vec![vec![0.1, 0.2], vec![3.0, 4.0]])];
        assert!(policy_novelty(&p, &refs, &trajs).unwrap() < 1e-12);
    }

    #[test]
    fn policy_novelty_constant_offsets() {
        let p = constant_policy(0.0);
        let mut refs = ReferenceSet::new();
        refs.push("near", constant_policy(0.2));
        refs.push("far", constant_policy(0.7));
        let trajs = vec![traj_with_states(vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]])];
        let u = policy_novelty(&p, &refs, &trajs).unwrap();
        assert!((u - 0.2).abs() < 1e-12);
    }

    #[test]
    fn policy_novelty_zero_states_errors() {
        let p = constant_policy(0.0);
        let mut refs = ReferenceSet::new();
        refs.push("r", constant_policy(1.0));
        assert!(policy_novelty(&p, &refs, &[]).is_err());
    }

    #[test]
    fn pairwise_matrix_identical_policies() {
        let p = constant_policy(0.0);
        let pop = vec![("a".to_string(), p.clone()), ("b".to_string(), p.clone())];
        let trajs = vec![
            vec![traj_with_states(vec![vec![1.0, 1.0]])],
            vec![traj_with_states(vec![vec![2.0, 2.0]])],
        ];
        let m = pairwise_novelty_matrix(&pop, &trajs).unwrap();
        assert_eq!(m.values[0][1], 0.0);
        assert_eq!(m.values[1][0], 0.0);
        assert_eq!(m.values[0][0], 0.0);
        assert_eq!(m.mean_offdiag(), 0.0);
    }

    #[test]
    fn pairwise_matrix_offsets() {
        // Offsets 0, 1, 3 give pairwise distances 1, 2, 3 -> mean 2.
        let pop = vec![
            ("a".to_string(), constant_policy(0.0)),
            ("b".to_string(), constant_policy(1.0)),
            ("c".to_string(), constant_policy(3.0)),
        ];
        let trajs: Vec<_> = (0..3)
            .map(|_| vec![traj_with_states(vec![vec![0.0, 0.0], vec![5.0, 5.0]])])
            .collect();
        let m = pairwise_novelty_matrix(&pop, &trajs).unwrap();
        assert!((m.mean_offdiag() - 2.0).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(m.values[i][i], 0.0);
        }
    }

    #[test]
    fn pairwise_matrix_requires_two() {
        let pop = vec![("a".to_string(), constant_policy(0.0))];
        let trajs = vec![vec![traj_with_states(vec![vec![0.0, 0.0]])]];
        assert!(pairwise_novelty_matrix(&pop, &trajs).is_err());
    }

    #[test]
    fn matrix_csv_layout() {
        let pop = vec![
            ("a".to_string(), constant_policy(0.0)),
            ("b".to_string(), constant_policy(2.0)),
        ];
        let trajs: Vec<_> = (0..2)
            .map(|_| vec![traj_with_states(vec![vec![0.0, 0.0]])])
            .collect();
        let m = pairwise_novelty_matrix(&pop, &trajs).unwrap();
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "id,a,b");
        assert!(lines[3].starts_with("mean_offdiag,"));
    }

    #[test]
    fn visitation_single_trajectory_counts() {
        let t = traj_with_states(vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]]);
        let h = visitation_estimate(&[t], |s| s[0] as i64);
        assert_eq!(h[&0], 3.0);
        assert_eq!(h[&1], 1.0);
    }

    #[test]
    fn visitation_averages_over_trajectories() {
        let a = traj_with_states(vec![vec![0.0], vec![0.0], vec![0.0]]);
        let b = traj_with_states(vec![vec![0.0]]);
        let h = visitation_estimate(&[a, b], |s| s[0] as i64);
        assert_eq!(h[&0], 2.0);
    }

    #[test]
    fn visitation_deterministic_chain() {
        // s0 -> s1 -> s1 with T = 2: expected visits to s1 are exactly 2.
        let t = traj_with_states(vec![vec![0.0], vec![1.0], vec![1.0]]);
        let h = visitation_estimate(&[t], |s| s[0] as i64);
        assert_eq!(h[&1], 2.0);
        assert_eq!(h[&0], 1.0);
    }
}
