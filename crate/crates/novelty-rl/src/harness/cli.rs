use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{make_env, Environment};
use crate::error::{Error, Result};
use crate::harness::config::{R0Setting, RunConfig};
use crate::harness::derive_seed;
use crate::harness::plot::plot_trajectories;
use crate::harness::policy_io::{load_policy, save_policy, PolicyMetadata};
use crate::harness::population::run_population;
use crate::harness::sweep::threshold_sweep;
use crate::metric::{pairwise_novelty_matrix, ReferenceSet};
use crate::nn::GaussianPolicyParams;
use crate::ppo::{collect_episodes, train, TrainBudget, Trajectory, UpdateMetrics};
use crate::strategy::{make_strategy, NoveltyConfig, StrategyKind};

#[derive(Parser)]
#[command(name = "novelty-rl", version, about = "Constrained novelty-seeking policy training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single policy, optionally against reference policies.
    Train(TrainArgs),
    /// Run a full population experiment from a config file.
    Population(PopulationArgs),
    /// Evaluate a saved policy and print its mean return.
    Evaluate(EvaluateArgs),
    /// Sweep the novelty threshold over multiples of the auto value.
    Sweep(SweepArgs),
    /// Render evaluation trajectories of saved policies as an SVG.
    Plot(PlotArgs),
    /// Print the report of a finished population run.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "four_reward_maze")]
    env: String,
    #[arg(long, default_value = "ppo")]
    strategy: String,
    /// Novelty threshold: a number or "auto" (pairwise mean of the references).
    #[arg(long, default_value = "auto")]
    r0: String,
    #[arg(long, default_value_t = 20)]
    ts: usize,
    #[arg(long, default_value_t = 10.0)]
    wsr_weight: f64,
    #[arg(long, default_value_t = false)]
    tnb_projection: bool,
    #[arg(long, default_value_t = 6100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2048)]
    steps_per_update: usize,
    /// Reference policy files; may be given several times.
    #[arg(long = "ref")]
    refs: Vec<PathBuf>,
    /// Where to save the trained policy.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-update metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct PopulationArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory from the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "four_reward_maze")]
    env: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated threshold multipliers.
    #[arg(long, default_value = "0.5,1.0,2.0")]
    multipliers: String,
    /// Where to write the sweep CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Policy files to draw; may be given several times.
    #[arg(long = "policy", required = true)]
    policies: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "four_reward_maze")]
    env: String,
    /// Fixed start position "x,y"; episodes start at random otherwise.
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of a finished population run.
    #[arg(long)]
    run: PathBuf,
}

/// Parse and execute a command line. Exit codes: 0 success, 1 for
/// configuration and usage errors, 2 for runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Population(a) => cmd_population(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn parse_r0(raw: &str) -> Result<R0Setting> {
    if raw == "auto" {
        return Ok(R0Setting::Auto);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Config(format!("--r0 '{raw}' is neither a number nor 'auto'")))?;
    if v < 0.0 {
        return Err(Error::Config("r0 must be >= 0".into()));
    }
    Ok(R0Setting::Value(v))
}

/// Auto threshold for an ad-hoc reference set: evaluate every reference
/// and take the mean off-diagonal of their pairwise novelty matrix.
fn auto_r0_from_refs(
    env_name: &str,
    refs: &ReferenceSet,
    seed: u64,
) -> Result<f64> {
    if refs.len() < 2 {
        return Err(Error::Config(
            "the auto threshold needs at least two reference policies; \
             pass --ref twice or set --r0 to a number"
                .into(),
        ));
    }
    let population: Vec<(String, GaussianPolicyParams)> = refs
        .ids()
        .iter()
        .cloned()
        .zip(refs.policies().iter().cloned())
        .collect();
    let mut eval_trajs = Vec::with_capacity(refs.len());
    for (i, p) in refs.policies().iter().enumerate() {
        let mut env = make_env(env_name)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "auto_r0", i as u64));
        eval_trajs.push(collect_episodes(p, &mut env, 20, &mut rng)?);
    }
    Ok(pairwise_novelty_matrix(&population, &eval_trajs)?.mean_offdiag())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let kind: StrategyKind = a.strategy.parse()?;
    let mut refs = ReferenceSet::new();
    for path in &a.refs {
        let (policy, _) = load_policy(path)?;
        refs.push(path.display().to_string(), policy);
    }
    let r0 = match parse_r0(&a.r0)? {
        R0Setting::Value(v) => v,
        R0Setting::Auto => match kind {
            // Only the threshold-gated strategies consume r0.
            StrategyKind::Ipd | StrategyKind::Ctnb => auto_r0_from_refs(&a.env, &refs, a.seed)?,
            _ => f64::INFINITY,
        },
    };
    let strat = make_strategy(NoveltyConfig {
        strategy: kind,
        r0,
        t_s: a.ts,
        wsr_weight: a.wsr_weight,
        tnb_projection: a.tnb_projection,
    })?;
    let mut env = make_env(&a.env)?;
    let spec = env.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let init = GaussianPolicyParams::new(spec.state_dim, spec.action_dim, &mut rng)?;
    let config = crate::ppo::PpoConfig {
        steps_per_update: a.steps_per_update,
        ..Default::default()
    };
    let result = train(
        &init,
        &mut env,
        &strat,
        &refs,
        TrainBudget::Episodes(a.episodes),
        &config,
        &mut rng,
    )?;
    save_policy(
        &a.out,
        &result.policy,
        PolicyMetadata {
            seed: a.seed,
            strategy: kind.as_str().to_string(),
            env_name: a.env.clone(),
        },
    )?;
    if let Some(path) = &a.metrics {
        let mut csv = String::from(UpdateMetrics::CSV_HEADER);
        csv.push('\n');
        for m in &result.metrics {
            csv.push_str(&m.to_csv_row());
            csv.push('\n');
        }
        fs::write(path, csv)?;
    }
    let last = result.metrics.last();
    println!(
        "trained {} policy over {} updates; final rollout return {:.3}; saved to {}",
        kind.as_str(),
        result.metrics.len(),
        last.map_or(f64::NAN, |m| m.mean_return),
        a.out.display()
    );
    Ok(())
}

fn cmd_population(a: PopulationArgs) -> Result<()> {
    let mut cfg = RunConfig::from_file(&a.config)?;
    if let Some(out) = a.out {
        cfg.out = out;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let arts = run_population(&cfg)?;
    println!(
        "population run complete: {} reference + {} novelty policies, r0 auto {:.4} (used {:.4}); artifacts in {}",
        arts.reference.len(),
        arts.novel.len(),
        arts.r0_auto,
        arts.r0_used,
        cfg.out.display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::Config("--trials must be >= 1".into()));
    }
    let (policy, _) = load_policy(&a.policy)?;
    let mut env = make_env(&a.env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let result = crate::env::evaluate(&policy, &mut env, a.trials, &mut rng)?;
    println!("mean return over {} trials: {:.4}", a.trials, result.mean_return);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = RunConfig::from_file(&a.config)?;
    let multipliers: Vec<f64> = a
        .multipliers
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad multiplier '{s}'")))
        })
        .collect::<Result<_>>()?;
    let result = threshold_sweep(&cfg, &multipliers)?;
    let csv = result.to_csv();
    match &a.out {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let start = match &a.start {
        None => None,
        Some(raw) => {
            let parts: Vec<&str> = raw.split(',').collect();
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("--start '{raw}' is not 'x,y'")))
            };
            match parts.as_slice() {
                [x, y] => Some((parse(x)?, parse(y)?)),
                _ => return Err(Error::Config(format!("--start '{raw}' is not 'x,y'"))),
            }
        }
    };
    let mut groups: Vec<(String, Vec<Trajectory>)> = Vec::new();
    for (i, path) in a.policies.iter().enumerate() {
        let (policy, _) = load_policy(path)?;
        let mut env = make_env(&a.env)?;
        env.set_start_override(start);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(a.seed, "plot", i as u64));
        let trajs = collect_episodes(&policy, &mut env, a.episodes, &mut rng)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("policy_{i}"));
        groups.push((stem, trajs));
    }
    let borrowed: Vec<(String, &[Trajectory])> = groups
        .iter()
        .map(|(id, t)| (id.clone(), t.as_slice()))
        .collect();
    fs::write(&a.out, plot_trajectories(&borrowed))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let path = a.run.join("report.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    print!("{text}");
    Ok(())
}
