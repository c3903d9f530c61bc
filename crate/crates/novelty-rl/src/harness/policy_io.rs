use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{GaussianPolicyParams, MlpParams};

/// On-disk policy format. JSON keeps `f64` values lossless via
/// shortest-roundtrip formatting, so load/save round-trips are byte
/// identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub log_std: Vec<f64>,
    pub metadata: PolicyMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetadata {
    pub seed: u64,
    pub strategy: String,
    pub env_name: String,
}

impl PolicyFile {
    pub fn from_policy(policy: &GaussianPolicyParams, metadata: PolicyMetadata) -> Self {
        Self {
            layer_dims: policy.mlp.layer_dims.clone(),
            weights: policy.mlp.weights.clone(),
            biases: policy.mlp.biases.clone(),
            log_std: policy.log_std.clone(),
            metadata,
        }
    }

    pub fn into_policy(self) -> Result<(GaussianPolicyParams, PolicyMetadata)> {
        let mlp = MlpParams {
            layer_dims: self.layer_dims,
            weights: self.weights,
            biases: self.biases,
        };
        if self.log_std.len() != mlp.output_dim() {
            return Err(Error::Shape("log_std length != action dim".into()));
        }
        Ok((
            GaussianPolicyParams {
                mlp,
                log_std: self.log_std,
            },
            self.metadata,
        ))
    }
}

pub fn save_policy(
    path: &Path,
    policy: &GaussianPolicyParams,
    metadata: PolicyMetadata,
) -> Result<()> {
    let file = PolicyFile::from_policy(policy, metadata);
    let json = serde_json::to_string_pretty(&file)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<(GaussianPolicyParams, PolicyMetadata)> {
    let text = fs::read_to_string(path)?;
    let file: PolicyFile = serde_json::from_str(&text)?;
    file.into_policy()
}
