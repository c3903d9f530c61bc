//! The update schemes attached to the PPO backbone: plain PPO, weighted-sum
//! reward (WSR), task-novel bisector (TNB), its constraint-gated variant
//! (CTNB) and interior policy differentiation (IPD). Each strategy is a pair
//! of (episode termination hook, gradient combination rule).

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metric::NoveltyTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Ppo,
    Wsr,
    Tnb,
    Ctnb,
    Ipd,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Ppo => "ppo",
            StrategyKind::Wsr => "wsr",
            StrategyKind::Tnb => "tnb",
            StrategyKind::Ctnb => "ctnb",
            StrategyKind::Ipd => "ipd",
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(StrategyKind::Ppo),
            "wsr" => Ok(StrategyKind::Wsr),
            "tnb" => Ok(StrategyKind::Tnb),
            "ctnb" => Ok(StrategyKind::Ctnb),
            "ipd" => Ok(StrategyKind::Ipd),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Strategy selection plus its hyperparameters.
#[derive(Debug, Clone)]
pub struct NoveltyConfig {
    pub strategy: StrategyKind,
    /// Minimal permitted novelty threshold, metric units.
    pub r0: f64,
    /// Grace period: the constraint is only enforced after `t_s` timesteps.
    pub t_s: usize,
    /// Fixed penalty weight (1 - alpha) / alpha used by WSR.
    pub wsr_weight: f64,
    /// Use the projection variant of the bisector's cos <= 0 branch
    /// (subtract the parallel component instead of adding it).
    pub tnb_projection: bool,
}

impl NoveltyConfig {
    pub fn new(strategy: StrategyKind) -> Self {
        Self {
            strategy,
            r0: 0.0,
            t_s: 20,
            wsr_weight: 10.0,
            tnb_projection: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r0 < 0.0 {
            return Err(Error::Config("r0 must be >= 0".into()));
        }
        if self.wsr_weight < 0.0 {
            return Err(Error::Config("wsr_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// A direction in flattened policy-parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(pub Vec<f64>);

impl Direction {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

fn check_lengths(a: &Direction, b: &Direction) -> Result<()> {
    if a.0.len() != b.0.len() {
        return Err(Error::Shape(format!(
            "direction lengths {} vs {}",
            a.0.len(),
            b.0.len()
        )));
    }
    Ok(())
}

/// WSR: `g_f + wsr_weight * g_g`, applied unconditionally.
pub fn combine_wsr(g_f: &Direction, g_g: &Direction, wsr_weight: f64) -> Result<Direction> {
    check_lengths(g_f, g_g)?;
    Ok(Direction(
        g_f.0
            .iter()
            .zip(&g_g.0)
            .map(|(f, g)| f + wsr_weight * g)
            .collect(),
    ))
}

/// TNB: the revised bisector of the task and novelty gradients, rescaled to
/// the fixed stride `(|g_f| + |g_g|) / 2`. A zero novelty gradient leaves
/// `g_f` unchanged; a zero task gradient yields a no-op direction.
pub fn combine_tnb(g_f: &Direction, g_g: &Direction) -> Result<Direction> {
    combine_tnb_with(g_f, g_g, false)
}

pub fn combine_tnb_with(g_f: &Direction, g_g: &Direction, projection: bool) -> Result<Direction> {
    check_lengths(g_f, g_g)?;
    let nf = g_f.norm();
    let ng = g_g.norm();
    if ng == 0.0 {
        return Ok(g_f.clone());
    }
    if nf == 0.0 {
        return Ok(Direction::zeros(g_f.0.len()));
    }
    let cos = g_f.dot(g_g) / (nf * ng);
    let coef = if cos <= 0.0 {
        if projection {
            // Remove g_f's component along g_g: g_g . p = 0 on this branch.
            -(nf / ng) * cos
        } else {
            (nf / ng) * cos
        }
    } else {
        nf / ng
    };
    let raw: Vec<f64> = g_f.0.iter().zip(&g_g.0).map(|(f, g)| f + coef * g).collect();
    let raw = Direction(raw);
    let rn = raw.norm();
    if rn == 0.0 {
        return Ok(raw);
    }
    let stride = (nf + ng) / 2.0;
    Ok(Direction(raw.0.iter().map(|x| x * stride / rn).collect()))
}

/// CTNB: apply the bisector only while the novelty constraint is violated.
pub fn combine_ctnb(
    g_f: &Direction,
    g_g: &Direction,
    novelty_estimate: f64,
    r0: f64,
) -> Result<Direction> {
    if novelty_estimate < 0.0 {
        return Err(Error::Domain("negative novelty estimate".into()));
    }
    if novelty_estimate - r0 < 0.0 {
        combine_tnb(g_f, g_g)
    } else {
        Ok(g_f.clone())
    }
}

/// IPD episode termination: fire once the running mean novelty drops below
/// the threshold after the grace period. `t` is the number of steps taken
/// in the episode so far (the trace holds `t` entries).
pub fn ipd_hook(trace: &NoveltyTrace, t: usize, r0: f64, t_s: usize) -> bool {
    if t <= t_s {
        return false;
    }
    match trace.last_running_mean() {
        Some(rm) => rm - r0 < 0.0,
        None => false,
    }
}

/// A packaged strategy: termination hook + gradient combiner.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub config: NoveltyConfig,
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        self.config.strategy
    }

    /// Rollout hook, checked after every environment step.
    pub fn should_terminate(&self, trace: &NoveltyTrace, t: usize) -> bool {
        match self.config.strategy {
            StrategyKind::Ipd => ipd_hook(trace, t, self.config.r0, self.config.t_s),
            _ => false,
        }
    }

    /// Combine the task gradient `g_f` and novelty gradient `g_g` into the
    /// update direction. `batch_novelty` is the per-update novelty estimate
    /// used by CTNB's constraint gate.
    pub fn combine(&self, g_f: &Direction, g_g: &Direction, batch_novelty: f64) -> Result<Direction> {
        match self.config.strategy {
            StrategyKind::Ppo | StrategyKind::Ipd => Ok(g_f.clone()),
            StrategyKind::Wsr => combine_wsr(g_f, g_g, self.config.wsr_weight),
            StrategyKind::Tnb => combine_tnb_with(g_f, g_g, self.config.tnb_projection),
            StrategyKind::Ctnb => {
                if batch_novelty - self.config.r0 < 0.0 {
                    combine_tnb_with(g_f, g_g, self.config.tnb_projection)
                } else {
                    Ok(g_f.clone())
                }
            }
        }
    }
}

pub fn make_strategy(config: NoveltyConfig) -> Result<Strategy> {
    config.validate()?;
    Ok(Strategy { config })
}
