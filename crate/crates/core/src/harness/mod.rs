//! Benchmark protocol: multi-seed training with best-checkpoint selection,
//! evaluation of checkpoints on fresh seeds, pooled summaries and
//! activation traces.
//!
//! Every output file except `run.json` is a pure function of the
//! [`RunConfig`], so repeated runs produce byte-identical CSVs.

mod eval;
mod meta;
mod summary;
mod trace;
mod train;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::nn::{ActorConfig, CriticConfig, HeadKind};

pub use eval::{
    action_change, load_eval_steps, run_evaluation, write_eval_csvs, EvalEpisode, EvaluationReport,
};
pub use meta::{unix_millis, write_metadata, RunMetadata};
pub use summary::{summarise, summarise_dir, Improvement, SummaryRow, SummaryTable};
pub use trace::{trace_activations, write_trace_csv, TraceRow};
pub use train::{
    checkpoint_path, run_training, selection_score, train_seed, SeedOutcome, TrainingReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvKind,
    pub head: HeadKind,
    pub train_seeds: Vec<u64>,
    pub episodes: usize,
    pub train_horizon: usize,
    pub eval_trials: usize,
    pub eval_episodes_per_trial: usize,
    pub eval_horizon: usize,
    /// First evaluation trial seed; trial `t` uses `eval_seed_base + t`.
    pub eval_seed_base: u64,
    /// Episodes between deterministic evaluations for checkpoint selection.
    pub selection_interval: usize,
    /// Deterministic episodes averaged per selection evaluation.
    pub selection_episodes: usize,
    /// Keep per-step observations, actions, `k` and `x0` of evaluation episodes.
    pub trace: bool,
    pub output_dir: PathBuf,
    pub agent: AgentConfig,
}

/// Training episodes used when none are requested.
pub fn default_episodes(env: EnvKind) -> usize {
    match env {
        EnvKind::Pendulum => 500,
        EnvKind::Hetero2 => 2000,
    }
}

impl RunConfig {
    pub fn new(env: EnvKind, head: HeadKind, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            env,
            head,
            train_seeds: (0..5).collect(),
            episodes: default_episodes(env),
            train_horizon: 200,
            eval_trials: 20,
            eval_episodes_per_trial: 10,
            eval_horizon: 500,
            eval_seed_base: 1_000_000,
            selection_interval: 10,
            selection_episodes: 5,
            trace: false,
            output_dir: output_dir.into(),
            agent: AgentConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("episodes", self.episodes),
            ("train_horizon", self.train_horizon),
            ("eval_trials", self.eval_trials),
            ("eval_episodes_per_trial", self.eval_episodes_per_trial),
            ("eval_horizon", self.eval_horizon),
            ("selection_interval", self.selection_interval),
            ("selection_episodes", self.selection_episodes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.train_seeds.is_empty() {
            return Err(Error::Config("at least one training seed is required".into()));
        }
        let mut seeds = self.train_seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("training seeds must be distinct".into()));
        }
        self.agent.validate()
    }

    pub fn actor_config(&self) -> ActorConfig {
        let (obs, act) = dims(self.env);
        ActorConfig::new(obs, act, self.head)
    }

    pub fn critic_config(&self) -> CriticConfig {
        let (obs, act) = dims(self.env);
        CriticConfig::new(obs, act)
    }

    /// Evaluation trial seeds, shared by every checkpoint and variant.
    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.eval_trials as u64).map(|t| self.eval_seed_base + t).collect()
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.output_dir.join("checkpoints")
    }
}

/// Observation and action widths of an environment.
pub fn dims(env: EnvKind) -> (usize, usize) {
    let e = env.make::<f64>();
    (e.obs_dim(), e.action_dim())
}

/// `n` reset seeds derived from `seed`.
pub fn derived_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}
