use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{make_env, Environment};
use crate::error::{Error, Result};
use crate::harness::config::{R0Setting, RunConfig};
use crate::harness::derive_seed;
use crate::harness::plot;
use crate::harness::policy_io::{save_policy, PolicyMetadata};
use crate::harness::report::{
    median, relative_novelty, success_rate, ExperimentReport, PolicyReportRow,
};
use crate::metric::{pairwise_novelty_matrix, policy_novelty, NoveltyMatrix, ReferenceSet};
use crate::nn::GaussianPolicyParams;
use crate::ppo::{collect_episodes, train, TrainBudget, Trajectory, UpdateMetrics};
use crate::strategy::{make_strategy, NoveltyConfig, StrategyKind};

/// One fully trained and evaluated policy.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub id: String,
    pub strategy: String,
    pub seed: u64,
    pub policy: GaussianPolicyParams,
    pub final_return: f64,
    pub eval_trajectories: Vec<Trajectory>,
    pub checkpoint_returns: Vec<f64>,
    pub metrics_csv: String,
    /// Novelty against the references that existed when training started;
    /// for plain-PPO policies, the row mean of the pairwise matrix.
    pub novelty: f64,
}

/// Everything a population run produces, before and after writing to disk.
#[derive(Debug, Clone)]
pub struct PopulationArtifacts {
    pub reference: Vec<TrainedPolicy>,
    pub novel: Vec<TrainedPolicy>,
    pub matrix: NoveltyMatrix,
    pub r0_auto: f64,
    pub r0_used: f64,
    pub report: ExperimentReport,
}

fn metrics_to_csv(metrics: &[UpdateMetrics]) -> String {
    let mut s = String::from(UpdateMetrics::CSV_HEADER);
    s.push('\n');
    for m in metrics {
        s.push_str(&m.to_csv_row());
        s.push('\n');
    }
    s
}

fn train_one(
    cfg: &RunConfig,
    id: &str,
    strategy_name: &str,
    novelty_cfg: NoveltyConfig,
    refs: &ReferenceSet,
    seed: u64,
    eval_seed: u64,
) -> Result<TrainedPolicy> {
    let mut env = make_env(&cfg.env)?;
    let spec = env.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = GaussianPolicyParams::new(spec.state_dim, spec.action_dim, &mut rng)?;
    let strat = make_strategy(novelty_cfg)?;
    let result = train(
        &init,
        &mut env,
        &strat,
        refs,
        TrainBudget::Episodes(cfg.episodes),
        &cfg.ppo_config(),
        &mut rng,
    )?;
    let mut eval_rng = ChaCha8Rng::seed_from_u64(eval_seed);
    let eval_trajectories =
        collect_episodes(&result.policy, &mut env, cfg.eval_trials, &mut eval_rng)?;
    let final_return = eval_trajectories
        .iter()
        .map(Trajectory::episode_return)
        .sum::<f64>()
        / cfg.eval_trials as f64;
    let novelty = if refs.is_empty() {
        0.0
    } else {
        policy_novelty(&result.policy, refs, &eval_trajectories)?
    };
    Ok(TrainedPolicy {
        id: id.to_string(),
        strategy: strategy_name.to_string(),
        seed,
        final_return,
        eval_trajectories,
        checkpoint_returns: result.eval_trace(),
        metrics_csv: metrics_to_csv(&result.metrics),
        novelty,
        policy: result.policy,
    })
}

/// Phase 1 and 2: train the plain-PPO reference population and estimate
/// the auto novelty threshold from its pairwise matrix.
pub fn train_reference_phase(
    cfg: &RunConfig,
) -> Result<(Vec<TrainedPolicy>, NoveltyMatrix, f64)> {
    if cfg.n_reference < 2 {
        return Err(Error::Config(
            "the pairwise novelty matrix needs at least two reference policies".into(),
        ));
    }
    let mut reference = Vec::with_capacity(cfg.n_reference);
    for i in 0..cfg.n_reference {
        let id = format!("ppo_{i}");
        let p = train_one(
            cfg,
            &id,
            "ppo",
            NoveltyConfig::new(StrategyKind::Ppo),
            &ReferenceSet::new(),
            derive_seed(cfg.seed, "ppo", i as u64),
            derive_seed(cfg.seed, "ppo_final_eval", i as u64),
        )?;
        eprintln!("trained {id}: final return {:.3}", p.final_return);
        reference.push(p);
    }
    let population: Vec<(String, GaussianPolicyParams)> = reference
        .iter()
        .map(|p| (p.id.clone(), p.policy.clone()))
        .collect();
    let eval_trajs: Vec<Vec<Trajectory>> = reference
        .iter()
        .map(|p| p.eval_trajectories.clone())
        .collect();
    let matrix = pairwise_novelty_matrix(&population, &eval_trajs)?;
    let n = reference.len();
    for (i, p) in reference.iter_mut().enumerate() {
        p.novelty = matrix.values[i].iter().sum::<f64>() / (n - 1) as f64;
    }
    let r0_auto = matrix.mean_offdiag();
    Ok((reference, matrix, r0_auto))
}

/// Phase 3: train the novelty-seeking policies sequentially, each against
/// the references trained so far. The seed stream depends only on the base
/// seed and the policy index, never on the threshold, so threshold sweeps
/// share initializations across multipliers.
pub fn train_novel_phase(
    cfg: &RunConfig,
    reference: &[TrainedPolicy],
    r0: f64,
) -> Result<Vec<TrainedPolicy>> {
    let mut refs = ReferenceSet::new();
    for p in reference {
        refs.push(p.id.clone(), p.policy.clone());
    }
    // The passed threshold wins even when the config pins a value; sweeps
    // pass scaled thresholds while the rest of the config stays fixed.
    let mut novelty_cfg = cfg.novelty_config(r0);
    novelty_cfg.r0 = r0;
    let mut novel = Vec::with_capacity(cfg.n_novel);
    for i in 0..cfg.n_novel {
        let id = format!("novel_{i}");
        let p = train_one(
            cfg,
            &id,
            cfg.strategy.as_str(),
            novelty_cfg.clone(),
            &refs,
            derive_seed(cfg.seed, "novel", i as u64),
            derive_seed(cfg.seed, "novel_final_eval", i as u64),
        )?;
        eprintln!(
            "trained {id}: final return {:.3}, novelty {:.4}",
            p.final_return, p.novelty
        );
        refs.push(p.id.clone(), p.policy.clone());
        novel.push(p);
    }
    Ok(novel)
}

fn build_report(
    reference: &[TrainedPolicy],
    novel: &[TrainedPolicy],
) -> Result<ExperimentReport> {
    let finals: Vec<f64> = reference.iter().map(|p| p.final_return).collect();
    let baseline_median = median(&finals)?;
    let ppo_mean_novelty =
        reference.iter().map(|p| p.novelty).sum::<f64>() / reference.len() as f64;
    let mut rows = Vec::new();
    for p in reference {
        // A reference policy is judged on its single final evaluation.
        rows.push(PolicyReportRow {
            id: p.id.clone(),
            strategy: p.strategy.clone(),
            final_return: p.final_return,
            novelty: p.novelty,
            relative_novelty: relative_novelty(p.novelty, ppo_mean_novelty)?,
            success_rate: success_rate(&[p.final_return], baseline_median),
        });
    }
    for p in novel {
        rows.push(PolicyReportRow {
            id: p.id.clone(),
            strategy: p.strategy.clone(),
            final_return: p.final_return,
            novelty: p.novelty,
            relative_novelty: relative_novelty(p.novelty, ppo_mean_novelty)?,
            success_rate: success_rate(&p.checkpoint_returns, baseline_median),
        });
    }
    Ok(ExperimentReport {
        rows,
        baseline_median,
        ppo_mean_novelty,
    })
}

fn write_artifacts(cfg: &RunConfig, arts: &PopulationArtifacts) -> Result<()> {
    let out = &cfg.out;
    fs::create_dir_all(out.join("policies"))?;
    fs::create_dir_all(out.join("metrics"))?;
    fs::create_dir_all(out.join("plots"))?;
    for p in arts.reference.iter().chain(&arts.novel) {
        save_policy(
            &out.join("policies").join(format!("{}.json", p.id)),
            &p.policy,
            PolicyMetadata {
                seed: p.seed,
                strategy: p.strategy.clone(),
                env_name: cfg.env.clone(),
            },
        )?;
        fs::write(
            out.join("metrics").join(format!("{}.csv", p.id)),
            &p.metrics_csv,
        )?;
    }
    fs::write(out.join("metrics/ppo_pairwise.csv"), arts.matrix.to_csv())?;
    fs::write(out.join("report.csv"), arts.report.to_csv())?;
    fs::write(out.join("config.resolved"), cfg.to_resolved_string())?;
    let groups: Vec<(String, &[Trajectory])> = arts
        .reference
        .iter()
        .chain(&arts.novel)
        .map(|p| {
            let n = p.eval_trajectories.len().min(5);
            (p.id.clone(), &p.eval_trajectories[..n])
        })
        .collect();
    fs::write(
        out.join("plots/eval_trajectories.svg"),
        plot::plot_trajectories(&groups),
    )?;
    let manifest = serde_json::json!({
        "status": "ok",
        "env": cfg.env,
        "seed": cfg.seed,
        "strategy": cfg.strategy.as_str(),
        "r0_auto": arts.r0_auto,
        "r0_used": arts.r0_used,
        "reference_ids": arts.reference.iter().map(|p| p.id.clone()).collect::<Vec<_>>(),
        "novel_ids": arts.novel.iter().map(|p| p.id.clone()).collect::<Vec<_>>(),
        "baseline_median": arts.report.baseline_median,
        "ppo_mean_novelty": arts.report.ppo_mean_novelty,
    });
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

fn write_error_manifest(out: &Path, err: &Error) {
    if fs::create_dir_all(out).is_err() {
        return;
    }
    let manifest = serde_json::json!({
        "status": "error",
        "message": err.to_string(),
    });
    let _ = fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n",
    );
}

/// Run a full population experiment: M plain-PPO references, the pairwise
/// novelty matrix, then K novelty-seeking policies, writing every artifact
/// under `cfg.out`. On failure a manifest recording the error is written
/// before the error propagates.
pub fn run_population(cfg: &RunConfig) -> Result<PopulationArtifacts> {
    cfg.validate()?;
    match run_population_inner(cfg) {
        Ok(arts) => Ok(arts),
        Err(e) => {
            write_error_manifest(&cfg.out, &e);
            Err(e)
        }
    }
}

fn run_population_inner(cfg: &RunConfig) -> Result<PopulationArtifacts> {
    let (reference, matrix, r0_auto) = train_reference_phase(cfg)?;
    let r0_used = match cfg.r0 {
        R0Setting::Auto => r0_auto,
        R0Setting::Value(v) => v,
    };
    let novel = train_novel_phase(cfg, &reference, r0_used)?;
    let report = build_report(&reference, &novel)?;
    let arts = PopulationArtifacts {
        reference,
        novel,
        matrix,
        r0_auto,
        r0_used,
        report,
    };
    write_artifacts(cfg, &arts)?;
    Ok(arts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(out: std::path::PathBuf) -> RunConfig {
        RunConfig {
            n_reference: 2,
            n_novel: 1,
            strategy: StrategyKind::Ipd,
            episodes: 6,
            eval_trials: 4,
            checkpoint_trials: 2,
            steps_per_update: 128,
            seed: 11,
            out,
            ..RunConfig::default()
        }
    }

    #[test]
    fn tiny_population_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path().join("run"));
        let arts = run_population(&cfg).unwrap();
        assert_eq!(arts.reference.len(), 2);
        assert_eq!(arts.novel.len(), 1);
        assert!(arts.r0_auto >= 0.0);
        for name in [
            "policies/ppo_0.json",
            "policies/ppo_1.json",
            "policies/novel_0.json",
            "metrics/ppo_0.csv",
            "metrics/ppo_pairwise.csv",
            "report.csv",
            "config.resolved",
            "manifest.json",
            "plots/eval_trajectories.svg",
        ] {
            assert!(cfg.out.join(name).is_file(), "missing {name}");
        }
        // Reference novelty is the matrix row mean, so relative novelty
        // averages to one over the reference group.
        let ppo_rows: Vec<_> = arts
            .report
            .rows
            .iter()
            .filter(|r| r.strategy == "ppo")
            .collect();
        let mean_rel = ppo_rows.iter().map(|r| r.relative_novelty).sum::<f64>()
            / ppo_rows.len() as f64;
        assert!((mean_rel - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_a = tiny_config(dir.path().join("a"));
        let cfg_b = tiny_config(dir.path().join("b"));
        run_population(&cfg_a).unwrap();
        run_population(&cfg_b).unwrap();
        for name in ["policies/novel_0.json", "metrics/ppo_pairwise.csv", "report.csv"] {
            let a = fs::read(cfg_a.out.join(name)).unwrap();
            let b = fs::read(cfg_b.out.join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} differs between reruns");
        }
    }

    #[test]
    fn failed_run_leaves_error_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path().join("bad"));
        cfg.env = "no_such_env".into();
        assert!(run_population(&cfg).is_err());
        let manifest = fs::read_to_string(cfg.out.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"status\": \"error\""));
    }
}
