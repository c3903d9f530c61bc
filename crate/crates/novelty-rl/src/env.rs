//! Environment contract and the Four Reward Maze diagnostic task: a 16x16
//! continuous map with four terminal reward disks at the edge midpoints and
//! a -0.01 step penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::GaussianPolicyParams;

/// Static description of an environment's spaces and horizon.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoneReason {
    RewardRegion,
    StepLimit,
    NoveltyTermination,
}

impl DoneReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DoneReason::RewardRegion => "reward_region",
            DoneReason::StepLimit => "step_limit",
            DoneReason::NoveltyTermination => "novelty_termination",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub done_reason: Option<DoneReason>,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;
    fn reset<R: Rng>(&mut self, rng: &mut R) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

pub const MAZE_SIZE: f64 = 16.0;
pub const DISK_RADIUS: f64 = 1.0;
pub const STEP_PENALTY: f64 = -0.01;

/// The four reward disks: center and terminal reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disk {
    Top,
    Down,
    Left,
    Right,
}

pub const DISKS: [(Disk, (f64, f64), f64); 4] = [
    (Disk::Top, (8.0, 16.0), 5.0),
    (Disk::Down, (8.0, 0.0), 5.0),
    (Disk::Left, (0.0, 8.0), 10.0),
    (Disk::Right, (16.0, 8.0), 1.0),
];

#[derive(Debug, Clone)]
pub struct MazeEnv {
    spec: EnvSpec,
    position: (f64, f64),
    steps: usize,
    start_override: Option<(f64, f64)>,
}

impl Default for MazeEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl MazeEnv {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 2,
                action_dim: 2,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                max_episode_steps: 100,
            },
            position: (8.0, 8.0),
            steps: 0,
            start_override: None,
        }
    }

    /// Evaluation helper: force every episode to start at a fixed position
    /// instead of sampling uniformly. `None` restores random starts.
    pub fn set_start_override(&mut self, start: Option<(f64, f64)>) {
        self.start_override = start;
    }

    pub fn position(&self) -> (f64, f64) {
        self.position
    }

    /// The disk containing `pos`, if any.
    pub fn disk_at(pos: (f64, f64)) -> Option<Disk> {
        for (disk, center, _) in DISKS {
            let dx = pos.0 - center.0;
            let dy = pos.1 - center.1;
            if (dx * dx + dy * dy).sqrt() < DISK_RADIUS {
                return Some(disk);
            }
        }
        None
    }
}

impl Environment for MazeEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        self.steps = 0;
        self.position = match self.start_override {
            Some(p) => p,
            None => loop {
                let p = (rng.gen_range(0.0..MAZE_SIZE), rng.gen_range(0.0..MAZE_SIZE));
                if MazeEnv::disk_at(p).is_none() {
                    break p;
                }
            },
        };
        vec![self.position.0, self.position.1]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != 2 {
            return Err(Error::Shape(format!("maze action length {}", action.len())));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("maze action".into()));
        }
        let ax = action[0].clamp(-1.0, 1.0);
        let ay = action[1].clamp(-1.0, 1.0);
        self.position.0 = (self.position.0 + ax).clamp(0.0, MAZE_SIZE);
        self.position.1 = (self.position.1 + ay).clamp(0.0, MAZE_SIZE);
        self.steps += 1;
        let next_state = vec![self.position.0, self.position.1];
        if let Some(disk) = MazeEnv::disk_at(self.position) {
            let reward = DISKS.iter().find(|(d, _, _)| *d == disk).unwrap().2;
            return Ok(StepResult {
                next_state,
                reward,
                done: true,
                done_reason: Some(DoneReason::RewardRegion),
            });
        }
        let done = self.steps >= self.spec.max_episode_steps;
        Ok(StepResult {
            next_state,
            reward: STEP_PENALTY,
            done,
            done_reason: done.then_some(DoneReason::StepLimit),
        })
    }
}

/// Construct an environment by its config name.
pub fn make_env(name: &str) -> Result<MazeEnv> {
    match name {
        "four_reward_maze" => Ok(MazeEnv::new()),
        other => Err(Error::Config(format!("unknown environment '{other}'"))),
    }
}

/// Result of evaluating a policy for a number of trials.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub mean_return: f64,
    pub returns: Vec<f64>,
    pub terminal_states: Vec<Vec<f64>>,
    pub done_reasons: Vec<DoneReason>,
}

/// Run `n_trials` stochastic-action episodes and average the undiscounted
/// returns.
pub fn evaluate<E: Environment, R: Rng>(
    policy: &GaussianPolicyParams,
    env: &mut E,
    n_trials: usize,
    rng: &mut R,
) -> Result<EvalResult> {
    let mut returns = Vec::with_capacity(n_trials);
    let mut terminal_states = Vec::with_capacity(n_trials);
    let mut done_reasons = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let mut state = env.reset(rng);
        let mut ep_return = 0.0;
        loop {
            let (action, _, _) = policy.sample_action(&state, rng)?;
            let step = env.step(&action)?;
            ep_return += step.reward;
            state = step.next_state;
            if step.done {
                terminal_states.push(state.clone());
                done_reasons.push(step.done_reason.unwrap());
                break;
            }
        }
        returns.push(ep_return);
    }
    let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
    Ok(EvalResult {
        mean_return,
        returns,
        terminal_states,
        done_reasons,
    })
}
