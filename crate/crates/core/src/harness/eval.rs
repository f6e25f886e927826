//! Deterministic evaluation of saved actors on fresh trial seeds.
//!
//! Step rows go to `eval_steps_<env>_<variant>.csv` with columns
//! `env,variant,train_seed,trial_seed,episode,step,reward,done`; episode
//! totals go to `eval_episodes_<env>_<variant>.csv`. With tracing on, the
//! per-actuator rollout records go to `eval_trace_<env>_<variant>.csv`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_parent, csv_error, derived_seeds, RunConfig};
use crate::agent::{rollout, StepTrace};
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::nn::{ActorNetwork, Checkpoint, HeadKind};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub env: EnvKind,
    pub variant: HeadKind,
    pub train_seed: u64,
    pub trial_seed: u64,
    /// Index within the trial.
    pub episode: usize,
    pub rewards: Vec<f64>,
    pub total: f64,
    pub steps: usize,
    pub trace: Option<Vec<StepTrace>>,
}

#[derive(Debug, Default)]
pub struct EvaluationReport {
    pub episodes: Vec<EvalEpisode>,
    /// Checkpoints that could not be evaluated, with the reason.
    pub failures: Vec<(PathBuf, String)>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepRow {
    env: String,
    variant: String,
    train_seed: u64,
    trial_seed: u64,
    episode: usize,
    step: usize,
    reward: f64,
    done: bool,
}

#[derive(Debug, Serialize)]
struct EpisodeRow<'a> {
    env: &'a str,
    variant: &'a str,
    train_seed: u64,
    trial_seed: u64,
    episode: usize,
    steps: usize,
    total: f64,
}

/// Training seed encoded in a `..._seed<N>.ckpt` file name.
fn seed_from_name(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    stem.rsplit_once("_seed")?.1.parse().ok()
}

fn evaluate_checkpoint(path: &Path, index: usize, config: &RunConfig) -> Result<Vec<EvalEpisode>> {
    let actor = ActorNetwork::<f64>::from_checkpoint(&Checkpoint::load(path)?)?;
    let mut env = config.env.make::<f64>();
    if actor.obs_dim() != env.obs_dim() || actor.action_dim() != env.action_dim() {
        return Err(Error::Shape(format!(
            "actor is {}x{} but {} is {}x{}",
            actor.obs_dim(),
            actor.action_dim(),
            config.env,
            env.obs_dim(),
            env.action_dim()
        )));
    }
    let train_seed = seed_from_name(path).unwrap_or(index as u64);
    let mut out = Vec::with_capacity(config.eval_trials * config.eval_episodes_per_trial);
    for trial_seed in config.trial_seeds() {
        for (episode, reset) in derived_seeds(trial_seed, config.eval_episodes_per_trial).into_iter().enumerate() {
            let mut trace = config.trace.then(Vec::new);
            let stats = rollout(&actor, env.as_mut(), reset, config.eval_horizon, trace.as_mut())?;
            out.push(EvalEpisode {
                env: config.env,
                variant: actor.kind(),
                train_seed,
                trial_seed,
                episode,
                rewards: stats.rewards,
                total: stats.total,
                steps: stats.steps,
                trace,
            });
        }
    }
    Ok(out)
}

/// Evaluates each checkpoint for `eval_trials × eval_episodes_per_trial`
/// noise-free episodes and writes the CSVs into the output directory.
/// Unreadable or mismatched checkpoints are reported per file.
pub fn run_evaluation(checkpoints: &[PathBuf], config: &RunConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let results: Vec<(PathBuf, Result<Vec<EvalEpisode>>)> = checkpoints
        .par_iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), evaluate_checkpoint(p, i, config)))
        .collect();
    let mut report = EvaluationReport::default();
    for (path, r) in results {
        match r {
            Ok(eps) => report.episodes.extend(eps),
            Err(e) => report.failures.push((path, e.to_string())),
        }
    }
    report.files = write_eval_csvs(&report.episodes, &config.output_dir)?;
    Ok(report)
}

/// Writes step, episode and (when present) trace CSVs, one set per
/// environment and variant, in order of first appearance.
pub fn write_eval_csvs(episodes: &[EvalEpisode], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: Vec<((EnvKind, HeadKind), Vec<&EvalEpisode>)> = Vec::new();
    for e in episodes {
        let key = (e.env, e.variant);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(e),
            None => groups.push((key, vec![e])),
        }
    }
    let mut files = Vec::new();
    for ((env, variant), eps) in groups {
        let suffix = format!("{env}_{variant}.csv");
        let steps = dir.join(format!("eval_steps_{suffix}"));
        create_parent(&steps)?;
        let mut w = csv::Writer::from_path(&steps).map_err(|e| csv_error(&steps, e))?;
        for e in &eps {
            for (i, &reward) in e.rewards.iter().enumerate() {
                let row = StepRow {
                    env: env.to_string(),
                    variant: variant.to_string(),
                    train_seed: e.train_seed,
                    trial_seed: e.trial_seed,
                    episode: e.episode,
                    step: i,
                    reward,
                    done: i + 1 == e.rewards.len(),
                };
                w.serialize(row).map_err(|err| csv_error(&steps, err))?;
            }
        }
        w.flush()?;
        files.push(steps);

        let totals = dir.join(format!("eval_episodes_{suffix}"));
        let mut w = csv::Writer::from_path(&totals).map_err(|e| csv_error(&totals, e))?;
        for e in &eps {
            let row = EpisodeRow {
                env: env.name(),
                variant: variant.name(),
                train_seed: e.train_seed,
                trial_seed: e.trial_seed,
                episode: e.episode,
                steps: e.steps,
                total: e.total,
            };
            w.serialize(row).map_err(|err| csv_error(&totals, err))?;
        }
        w.flush()?;
        files.push(totals);

        if eps.iter().any(|e| e.trace.is_some()) {
            let path = dir.join(format!("eval_trace_{suffix}"));
            write_episode_traces(&eps, &path)?;
            files.push(path);
        }
    }
    Ok(files)
}

fn write_episode_traces(eps: &[&EvalEpisode], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let obs_dim = eps
        .iter()
        .find_map(|e| e.trace.as_ref()?.first().map(|s| s.obs.len()))
        .unwrap_or(0);
    let mut header: Vec<String> =
        ["train_seed", "trial_seed", "episode", "step", "actuator"].map(String::from).to_vec();
    header.extend((0..obs_dim).map(|i| format!("obs_{i}")));
    header.extend(["pre_activation", "k", "x0", "action"].map(String::from));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let opt = |v: &Option<Vec<f64>>, j: usize| v.as_ref().map_or(String::new(), |v| v[j].to_string());
    for e in eps {
        for (t, s) in e.trace.iter().flatten().enumerate() {
            for j in 0..s.action.len() {
                let mut rec = vec![
                    e.train_seed.to_string(),
                    e.trial_seed.to_string(),
                    e.episode.to_string(),
                    t.to_string(),
                    j.to_string(),
                ];
                rec.extend(s.obs.iter().map(f64::to_string));
                rec.push(s.pre_activation[j].to_string());
                rec.push(opt(&s.k, j));
                rec.push(opt(&s.x0, j));
                rec.push(s.action[j].to_string());
                w.write_record(&rec).map_err(|err| csv_error(path, err))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds episodes from an `eval_steps_*.csv` file.
pub fn load_eval_steps(path: &Path) -> Result<Vec<EvalEpisode>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out: Vec<EvalEpisode> = Vec::new();
    for row in r.deserialize::<StepRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let env: EnvKind = row.env.parse()?;
        let variant: HeadKind = row.variant.parse()?;
        let same = out.last().is_some_and(|e| {
            e.env == env
                && e.variant == variant
                && e.train_seed == row.train_seed
                && e.trial_seed == row.trial_seed
                && e.episode == row.episode
        });
        if !same {
            out.push(EvalEpisode {
                env,
                variant,
                train_seed: row.train_seed,
                trial_seed: row.trial_seed,
                episode: row.episode,
                rewards: Vec::new(),
                total: 0.0,
                steps: 0,
                trace: None,
            });
        }
        let e = out.last_mut().expect("pushed above");
        if row.step != e.steps {
            return Err(Error::Parse(format!(
                "{}: step {} follows step {} in episode {}",
                path.display(),
                row.step,
                e.steps as i64 - 1,
                e.episode
            )));
        }
        e.rewards.push(row.reward);
        e.total += row.reward;
        e.steps += 1;
    }
    Ok(out)
}

/// Mean absolute step-to-step action change over the last `last` steps of a
/// trace, averaged over actuators. `None` for traces shorter than two steps.
pub fn action_change(trace: &[StepTrace], last: usize) -> Option<f64> {
    if trace.len() < 2 {
        return None;
    }
    let start = trace.len().saturating_sub(last).max(1);
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in start..trace.len() {
        for (a, b) in trace[t].action.iter().zip(&trace[t - 1].action) {
            sum += (a - b).abs();
            n += 1;
        }
    }
    Some(sum / n as f64)
}
