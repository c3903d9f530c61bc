use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::MlpParams;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LOG_2PI: f64 = 1.8378770664093453;

/// A diagonal-Gaussian policy: an MLP produces the action mean, the
/// state-independent `log_std` vector fixes the exploration noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicyParams {
    pub mlp: MlpParams,
    pub log_std: Vec<f64>,
}

impl GaussianPolicyParams {
    /// Fresh policy with the default 2-hidden-layer topology and sigma = 1.
    pub fn new<R: Rng>(state_dim: usize, action_dim: usize, rng: &mut R) -> Result<Self> {
        let dims = MlpParams::default_policy_dims(state_dim, action_dim);
        Ok(Self {
            mlp: MlpParams::glorot(&dims, rng)?,
            log_std: vec![0.0; action_dim],
        })
    }

    pub fn action_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    /// Deterministic part of the policy at `state`.
    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(state)
    }

    pub fn clamped_log_std(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|x| x.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect()
    }

    /// Draw an action; returns `(action, log_prob, mean)`.
    pub fn sample_action<R: Rng>(&self, state: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let mean = self.mean(state)?;
        let log_std = self.clamped_log_std();
        let action: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect();
        let lp = gaussian_log_prob(&mean, &log_std, &action)?;
        Ok((action, lp, mean))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.mlp.flatten();
        out.extend_from_slice(&self.log_std);
        out
    }

    pub fn n_params(&self) -> usize {
        self.mlp.n_params() + self.log_std.len()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "flat length {} != {}",
                flat.len(),
                self.n_params()
            )));
        }
        let split = self.mlp.n_params();
        self.mlp.assign_flat(&flat[..split])?;
        self.log_std.copy_from_slice(&flat[split..]);
        Ok(())
    }
}

/// Log density of a diagonal Gaussian at `action`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> Result<f64> {
    if mean.len() != log_std.len() || mean.len() != action.len() {
        return Err(Error::Shape(format!(
            "gaussian_log_prob dims {}/{}/{}",
            mean.len(),
            log_std.len(),
            action.len()
        )));
    }
    let mut lp = 0.0;
    for d in 0..mean.len() {
        let z = (action[d] - mean[d]) / log_std[d].exp();
        lp += -log_std[d] - 0.5 * LOG_2PI - 0.5 * z * z;
    }
    Ok(lp)
}
