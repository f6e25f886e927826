//! Multi-seed training with best-checkpoint selection.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_parent, csv_error, derived_seeds, RunConfig};
use crate::agent::{rollout, Agent};
use crate::error::Result;
use crate::nn::ActorNetwork;

/// Mixed into the training seed so selection episodes never coincide with
/// training or evaluation episodes.
const SELECTION_STREAM: u64 = 0x5e1e_c7ed_0000_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    /// Mean deterministic selection reward of the saved actor.
    pub best_score: f64,
    /// Zero-based training episode after which the saved actor was taken.
    pub best_episode: usize,
    pub updates: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub outcomes: Vec<SeedOutcome>,
    /// Seeds whose run aborted, with the reason.
    pub failures: Vec<(u64, String)>,
}

impl TrainingReport {
    pub fn checkpoints(&self) -> Vec<PathBuf> {
        self.outcomes.iter().map(|o| o.checkpoint.clone()).collect()
    }
}

#[derive(Debug, Serialize)]
struct CurveRow {
    episode: usize,
    steps: usize,
    total_reward: f64,
    updates: usize,
    selection_reward: Option<f64>,
    best_selection_reward: Option<f64>,
}

pub fn checkpoint_path(config: &RunConfig, seed: u64) -> PathBuf {
    config
        .checkpoint_dir()
        .join(format!("{}_{}_seed{seed}.ckpt", config.env, config.head))
}

fn curve_path(config: &RunConfig, seed: u64) -> PathBuf {
    config
        .output_dir
        .join(format!("train_{}_{}_seed{seed}.csv", config.env, config.head))
}

/// Mean reward of deterministic episodes from the selection seeds of
/// `train_seed`, each cut off at the training horizon.
pub fn selection_score(actor: &ActorNetwork<f64>, config: &RunConfig, train_seed: u64) -> Result<f64> {
    let mut env = config.env.make::<f64>();
    let seeds = derived_seeds(train_seed ^ SELECTION_STREAM, config.selection_episodes);
    let mut total = 0.0;
    for &s in &seeds {
        total += rollout(actor, env.as_mut(), s, config.train_horizon, None)?.total;
    }
    Ok(total / seeds.len() as f64)
}

/// Trains one seed and writes its training curve and best checkpoint. The
/// curve is written even when the run aborts part way.
pub fn train_seed(config: &RunConfig, seed: u64) -> Result<SeedOutcome> {
    let mut agent = Agent::<f64>::new(&config.actor_config(), &config.critic_config(), config.agent.clone(), seed)?;
    let mut env = config.env.make::<f64>();
    let mut rows = Vec::with_capacity(config.episodes);
    let mut best: Option<(f64, usize, ActorNetwork<f64>)> = None;

    let mut run = || -> Result<()> {
        for episode in 0..config.episodes {
            let episode_seed = agent.next_seed();
            let stats = agent.train_episode(env.as_mut(), episode_seed, config.train_horizon)?;
            let due = (episode + 1) % config.selection_interval == 0 || episode + 1 == config.episodes;
            let score = if due { Some(selection_score(agent.actor(), config, seed)?) } else { None };
            if let Some(s) = score {
                if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                    best = Some((s, episode, agent.actor().clone()));
                }
            }
            rows.push(CurveRow {
                episode,
                steps: stats.steps,
                total_reward: stats.total,
                updates: stats.updates,
                selection_reward: score,
                best_selection_reward: best.as_ref().map(|b| b.0),
            });
        }
        Ok(())
    };
    let result = run();

    let curve = curve_path(config, seed);
    create_parent(&curve)?;
    let mut w = csv::Writer::from_path(&curve).map_err(|e| csv_error(&curve, e))?;
    for row in &rows {
        w.serialize(row).map_err(|e| csv_error(&curve, e))?;
    }
    w.flush()?;
    result?;

    let (best_score, best_episode, actor) = best.expect("the final episode is always evaluated");
    let checkpoint = checkpoint_path(config, seed);
    create_parent(&checkpoint)?;
    actor.to_checkpoint().save(&checkpoint)?;
    Ok(SeedOutcome { seed, checkpoint, curve, best_score, best_episode, updates: agent.updates() })
}

/// Trains every seed of `config`, in parallel across seeds. A failing seed
/// is recorded in the report and does not stop the others.
pub fn run_training(config: &RunConfig) -> Result<TrainingReport> {
    config.validate()?;
    std::fs::create_dir_all(config.checkpoint_dir())?;
    let results: Vec<(u64, Result<SeedOutcome>)> =
        config.train_seeds.par_iter().map(|&s| (s, train_seed(config, s))).collect();
    let mut report = TrainingReport::default();
    for (seed, r) in results {
        match r {
            Ok(o) => report.outcomes.push(o),
            Err(e) => report.failures.push((seed, e.to_string())),
        }
    }
    Ok(report)
}
