use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::ppo::PpoConfig;
use crate::strategy::{NoveltyConfig, StrategyKind};

/// Novelty threshold: taken from the PPO population's pairwise matrix
/// ("auto") or pinned to a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum R0Setting {
    Auto,
    Value(f64),
}

/// Resolved configuration of one population run. Parsed from a flat
/// `key = value` file with JSON-style values; every run writes a resolved
/// copy next to its artifacts.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub env: String,
    /// Number of plain-PPO reference policies (M).
    pub n_reference: usize,
    /// Number of novelty-seeking policies (K).
    pub n_novel: usize,
    pub strategy: StrategyKind,
    pub r0: R0Setting,
    pub ts: usize,
    pub wsr_weight: f64,
    pub tnb_projection: bool,
    pub seed: u64,
    /// Training budget per policy, in episodes.
    pub episodes: usize,
    /// Trials for the final evaluation of each policy.
    pub eval_trials: usize,
    /// Trials per success-rate checkpoint during training.
    pub checkpoint_trials: usize,
    pub steps_per_update: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "four_reward_maze".into(),
            n_reference: 5,
            n_novel: 5,
            strategy: StrategyKind::Ipd,
            r0: R0Setting::Auto,
            ts: 20,
            wsr_weight: 10.0,
            tnb_projection: false,
            seed: 0,
            episodes: 6100,
            eval_trials: 100,
            checkpoint_trials: 20,
            steps_per_update: 2048,
            out: PathBuf::from("out/run"),
        }
    }
}

impl RunConfig {
    /// Parse a flat key-value config file. Unknown keys are rejected. The
    /// `NOVELTY_RL_SEED` environment variable overrides the seed.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_str_contents(&text)?;
        cfg.apply_env_override()?;
        Ok(cfg)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env_override(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var("NOVELTY_RL_SEED") {
            self.seed = s
                .parse()
                .map_err(|_| Error::Config(format!("NOVELTY_RL_SEED='{s}' is not a u64")))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        // JSON-style values, with bare strings accepted as a convenience.
        let value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
        let as_u64 = |v: &Value| -> Result<u64> {
            v.as_u64()
                .ok_or_else(|| Error::Config(format!("{key}: expected non-negative integer")))
        };
        let as_f64 = |v: &Value| -> Result<f64> {
            v.as_f64()
                .ok_or_else(|| Error::Config(format!("{key}: expected number")))
        };
        match key {
            "env" => self.env = value.as_str().unwrap_or(raw).to_string(),
            "m" | "n_reference" => self.n_reference = as_u64(&value)? as usize,
            "k" | "n_novel" => self.n_novel = as_u64(&value)? as usize,
            "strategy" => self.strategy = value.as_str().unwrap_or(raw).parse()?,
            "r0" => {
                self.r0 = match &value {
                    Value::String(s) if s == "auto" => R0Setting::Auto,
                    v => R0Setting::Value(as_f64(v)?),
                }
            }
            "ts" => self.ts = as_u64(&value)? as usize,
            "wsr_weight" => self.wsr_weight = as_f64(&value)?,
            "alpha" => {
                let a = as_f64(&value)?;
                if !(0.0..1.0).contains(&a) || a == 0.0 {
                    return Err(Error::Config("alpha must be in (0, 1)".into()));
                }
                self.wsr_weight = (1.0 - a) / a;
            }
            "tnb_projection" => {
                self.tnb_projection = value
                    .as_bool()
                    .ok_or_else(|| Error::Config("tnb_projection: expected bool".into()))?
            }
            "seed" => self.seed = as_u64(&value)?,
            "episodes" => self.episodes = as_u64(&value)? as usize,
            "eval_trials" => self.eval_trials = as_u64(&value)? as usize,
            "checkpoint_trials" => self.checkpoint_trials = as_u64(&value)? as usize,
            "steps_per_update" => self.steps_per_update = as_u64(&value)? as usize,
            "out" => self.out = PathBuf::from(value.as_str().unwrap_or(raw)),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_novel > 0 && self.n_reference == 0 {
            return Err(Error::Config(
                "a novelty phase needs at least one reference policy (m >= 1)".into(),
            ));
        }
        if let R0Setting::Value(v) = self.r0 {
            if v < 0.0 {
                return Err(Error::Config("r0 must be >= 0".into()));
            }
        }
        if self.eval_trials == 0 {
            return Err(Error::Config("eval_trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Novelty configuration with the auto threshold substituted in.
    pub fn novelty_config(&self, auto_r0: f64) -> NoveltyConfig {
        NoveltyConfig {
            strategy: self.strategy,
            r0: match self.r0 {
                R0Setting::Auto => auto_r0,
                R0Setting::Value(v) => v,
            },
            t_s: self.ts,
            wsr_weight: self.wsr_weight,
            tnb_projection: self.tnb_projection,
        }
    }

    pub fn ppo_config(&self) -> PpoConfig {
        PpoConfig {
            steps_per_update: self.steps_per_update,
            eval_trials: self.checkpoint_trials,
            ..PpoConfig::default()
        }
    }

    /// Serialize back to the flat key-value format.
    pub fn to_resolved_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "env = {:?}", self.env);
        let _ = writeln!(s, "m = {}", self.n_reference);
        let _ = writeln!(s, "k = {}", self.n_novel);
        let _ = writeln!(s, "strategy = {:?}", self.strategy.as_str());
        match self.r0 {
            R0Setting::Auto => {
                let _ = writeln!(s, "r0 = \"auto\"");
            }
            R0Setting::Value(v) => {
                let _ = writeln!(s, "r0 = {v}");
            }
        }
        let _ = writeln!(s, "ts = {}", self.ts);
        let _ = writeln!(s, "wsr_weight = {}", self.wsr_weight);
        let _ = writeln!(s, "tnb_projection = {}", self.tnb_projection);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "episodes = {}", self.episodes);
        let _ = writeln!(s, "eval_trials = {}", self.eval_trials);
        let _ = writeln!(s, "checkpoint_trials = {}", self.checkpoint_trials);
        let _ = writeln!(s, "steps_per_update = {}", self.steps_per_update);
        let _ = writeln!(s, "out = {:?}", self.out.display().to_string());
        s
    }
}
