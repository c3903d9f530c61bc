//! Small dense networks with hand-written backprop, a diagonal Gaussian
//! action head and an Adam optimizer. Everything is `f64` and allocation
//! patterns are kept simple; the networks involved are tiny.

mod adam;
mod gaussian;
mod mlp;

pub use adam::AdamState;
pub use gaussian::{gaussian_log_prob, GaussianPolicyParams, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{MlpGrads, MlpParams};
