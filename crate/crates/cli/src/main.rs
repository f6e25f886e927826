//! `paddpg`: train, evaluate, summarise and trace classic vs learnable
//! action heads.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use paddpg::harness::{
    self, checkpoint_path, run_evaluation, run_training, summarise_dir, trace_activations, unix_millis,
    write_metadata, write_trace_csv, RunMetadata,
};
use paddpg::{EnvKind, HeadKind, RunConfig};

#[derive(Parser)]
#[command(name = "paddpg", version, about = "DDPG with a learnable tanh(kx - kx0) action head")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one head variant over several seeds and keep the best checkpoint per seed.
    Train(TrainArgs),
    /// Evaluate saved checkpoints on fresh seeds without exploration noise.
    Eval(EvalArgs),
    /// Pool evaluation results into mean ± std tables with improvements.
    Summarise(SummariseArgs),
    /// Record k, x0, pre-activation and action per step for a learnable-head checkpoint.
    Trace(TraceArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_parser = parse_env)]
    env: EnvKind,
    #[arg(long, value_parser = parse_head)]
    head: HeadKind,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    /// Run directory for checkpoints, CSVs and run.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training episodes per seed (500 for pendulum, 2000 for hetero2 if omitted).
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Episodes per trial.
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    /// Explicit checkpoint files instead of the run directory's best checkpoints.
    #[arg(long, num_args = 1..)]
    checkpoints: Vec<PathBuf>,
    /// Also write per-step observation, action, k and x0 traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SummariseArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, value_parser = parse_env)]
    env: EnvKind,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Reset seed of the traced episode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    /// Output CSV file.
    #[arg(long)]
    trace: PathBuf,
}

fn parse_env(s: &str) -> Result<EnvKind, String> {
    s.parse().map_err(|e: paddpg::Error| e.to_string())
}

fn parse_head(s: &str) -> Result<HeadKind, String> {
    s.parse().map_err(|e: paddpg::Error| e.to_string())
}

fn config(common: &Common) -> RunConfig {
    let mut c = RunConfig::new(common.env, common.head, &common.out);
    c.train_seeds = common.seeds.clone();
    c
}

/// Returns whether every seed or checkpoint completed.
fn train(args: TrainArgs) -> Result<bool> {
    let mut config = config(&args.common);
    config.episodes = args.episodes.unwrap_or(harness::default_episodes(config.env));
    config.train_horizon = args.horizon;
    let started = (unix_millis(), Instant::now());
    let report = run_training(&config)?;
    for o in &report.outcomes {
        println!(
            "seed {}: best selection reward {:.2} after episode {} -> {}",
            o.seed,
            o.best_score,
            o.best_episode + 1,
            o.checkpoint.display()
        );
    }
    for (seed, msg) in &report.failures {
        eprintln!("seed {seed} aborted: {msg}");
    }
    let mut meta = RunMetadata::new("train", config.clone(), started.0);
    meta.wall_seconds = started.1.elapsed().as_secs_f64();
    meta.outputs = report.outcomes.iter().flat_map(|o| [o.checkpoint.clone(), o.curve.clone()]).collect();
    meta.failures = report.failures.iter().map(|(s, m)| format!("seed {s}: {m}")).collect();
    write_metadata(&meta, &config.output_dir)?;
    Ok(report.failures.is_empty())
}

fn eval(args: EvalArgs) -> Result<bool> {
    let mut config = config(&args.common);
    config.eval_trials = args.trials;
    config.eval_episodes_per_trial = args.episodes;
    config.eval_horizon = args.horizon;
    config.trace = args.trace;
    let checkpoints = if args.checkpoints.is_empty() {
        config.train_seeds.iter().map(|&s| checkpoint_path(&config, s)).collect()
    } else {
        args.checkpoints.clone()
    };
    let started = (unix_millis(), Instant::now());
    let report = run_evaluation(&checkpoints, &config)?;
    println!(
        "{} episodes from {} of {} checkpoints",
        report.episodes.len(),
        checkpoints.len() - report.failures.len(),
        checkpoints.len()
    );
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    for (path, msg) in &report.failures {
        eprintln!("{}: {msg}", path.display());
    }
    let mut meta = RunMetadata::new("eval", config.clone(), started.0);
    meta.wall_seconds = started.1.elapsed().as_secs_f64();
    meta.outputs = report.files.clone();
    meta.failures = report.failures.iter().map(|(p, m)| format!("{}: {m}", p.display())).collect();
    write_metadata(&meta, &config.output_dir)?;
    Ok(report.failures.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Summarise(a) => {
            let table = summarise_dir(&a.out).with_context(|| format!("summarising {}", a.out.display()))?;
            print!("{}", table.render_text());
            Ok(true)
        }
        Command::Trace(a) => {
            if a.horizon == 0 {
                bail!("horizon must be positive");
            }
            let rows = trace_activations(&a.checkpoint, a.env, a.seed, a.horizon)?;
            write_trace_csv(&rows, &a.trace)?;
            println!("wrote {} rows to {}", rows.len(), a.trace.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
