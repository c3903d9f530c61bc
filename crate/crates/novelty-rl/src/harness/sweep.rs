use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::population::{train_novel_phase, train_reference_phase, TrainedPolicy};

/// Results for one threshold multiplier.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub r0: f64,
    pub return_q1: f64,
    pub return_median: f64,
    pub return_q3: f64,
    pub mean_novelty: f64,
    pub policies: Vec<TrainedPolicy>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub r0_auto: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("multiplier,r0,return_q1,return_median,return_q3,mean_novelty\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.multiplier, p.r0, p.return_q1, p.return_median, p.return_q3, p.mean_novelty
            );
        }
        s
    }
}

/// Linear-interpolation quantile of an unsorted sample.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    if v.len() == 1 {
        return v[0];
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] * (1.0 - frac) + v[hi] * frac
}

/// Sweep the novelty threshold over multiples of the auto value. The
/// reference population is trained once and shared; the novelty policies
/// use multiplier-independent seeds, so a 1.0 entry reproduces the plain
/// population run exactly.
pub fn threshold_sweep(cfg: &RunConfig, multipliers: &[f64]) -> Result<SweepResult> {
    if multipliers.is_empty() {
        return Err(Error::Config("sweep needs at least one multiplier".into()));
    }
    if multipliers.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(Error::Config("sweep multipliers must be positive".into()));
    }
    if cfg.n_novel == 0 {
        return Err(Error::Config("sweep needs k >= 1 novelty policies".into()));
    }
    let (reference, _matrix, r0_auto) = train_reference_phase(cfg)?;
    let mut points = Vec::with_capacity(multipliers.len());
    for &mult in multipliers {
        let r0 = mult * r0_auto;
        let policies = train_novel_phase(cfg, &reference, r0)?;
        let returns: Vec<f64> = policies.iter().map(|p| p.final_return).collect();
        let mean_novelty =
            policies.iter().map(|p| p.novelty).sum::<f64>() / policies.len() as f64;
        points.push(SweepPoint {
            multiplier: mult,
            r0,
            return_q1: quantile(&returns, 0.25),
            return_median: quantile(&returns, 0.5),
            return_q3: quantile(&returns, 0.75),
            mean_novelty,
            policies,
        });
    }
    Ok(SweepResult { r0_auto, points })
}
