use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Fraction of training checkpoints that strictly beat the baseline
/// median return. An empty checkpoint trace counts as never successful.
pub fn success_rate(checkpoint_returns: &[f64], baseline_median: f64) -> f64 {
    if checkpoint_returns.is_empty() {
        eprintln!("warning: success rate of an empty checkpoint trace is 0");
        return 0.0;
    }
    let hits = checkpoint_returns
        .iter()
        .filter(|&&r| r > baseline_median)
        .count();
    hits as f64 / checkpoint_returns.len() as f64
}

/// Novelty of one policy divided by the mean novelty of the plain-PPO
/// population. A zero or non-positive baseline carries no scale.
pub fn relative_novelty(novelty: f64, ppo_mean_novelty: f64) -> Result<f64> {
    if ppo_mean_novelty.is_nan() || ppo_mean_novelty <= 0.0 {
        return Err(Error::Domain(format!(
            "relative novelty undefined for baseline {ppo_mean_novelty}"
        )));
    }
    Ok(novelty / ppo_mean_novelty)
}

/// Median of an unsorted sample; the mean of the two middle order
/// statistics for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("median of empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// One policy's row in the experiment report.
#[derive(Debug, Clone)]
pub struct PolicyReportRow {
    pub id: String,
    pub strategy: String,
    pub final_return: f64,
    pub novelty: f64,
    pub relative_novelty: f64,
    pub success_rate: f64,
}

/// Per-strategy summary statistics.
#[derive(Debug, Clone)]
pub struct GroupAggregate {
    pub strategy: String,
    pub n: usize,
    pub mean_return: f64,
    pub mean_novelty: f64,
    pub mean_relative_novelty: f64,
    pub mean_success_rate: f64,
}

/// Full report of one population run: a row per policy plus per-strategy
/// aggregates, the baseline median return and the baseline novelty scale.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<PolicyReportRow>,
    pub baseline_median: f64,
    pub ppo_mean_novelty: f64,
}

impl ExperimentReport {
    pub fn aggregates(&self) -> Vec<GroupAggregate> {
        let mut order: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.strategy.as_str()) {
                order.push(&r.strategy);
            }
        }
        order
            .iter()
            .map(|strat| {
                let group: Vec<&PolicyReportRow> =
                    self.rows.iter().filter(|r| r.strategy == *strat).collect();
                let n = group.len();
                let mean = |f: fn(&PolicyReportRow) -> f64| {
                    group.iter().map(|r| f(r)).sum::<f64>() / n as f64
                };
                GroupAggregate {
                    strategy: strat.to_string(),
                    n,
                    mean_return: mean(|r| r.final_return),
                    mean_novelty: mean(|r| r.novelty),
                    mean_relative_novelty: mean(|r| r.relative_novelty),
                    mean_success_rate: mean(|r| r.success_rate),
                }
            })
            .collect()
    }

    /// Multi-section CSV: per-policy rows, per-strategy aggregates, then
    /// the baseline scalars.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("id,strategy,final_return,novelty,relative_novelty,success_rate\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.id, r.strategy, r.final_return, r.novelty, r.relative_novelty, r.success_rate
            );
        }
        out.push('\n');
        out.push_str(
            "strategy,n,mean_return,mean_novelty,mean_relative_novelty,mean_success_rate\n",
        );
        for a in self.aggregates() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                a.strategy,
                a.n,
                a.mean_return,
                a.mean_novelty,
                a.mean_relative_novelty,
                a.mean_success_rate
            );
        }
        out.push('\n');
        let _ = writeln!(out, "baseline_median,{}", self.baseline_median);
        let _ = writeln!(out, "ppo_mean_novelty,{}", self.ppo_mean_novelty);
        out
    }
}
