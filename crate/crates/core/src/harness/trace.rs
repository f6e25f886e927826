//! Per-step, per-actuator record of the learnable head's `k`, `x0`,
//! pre-activation and action along one deterministic episode.

use std::path::Path;

use serde::Serialize;

use super::{create_parent, csv_error};
use crate::agent::rollout;
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::nn::{ActorNetwork, Checkpoint, HeadKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub actuator: usize,
    pub pre_activation: f64,
    pub k: f64,
    pub x0: f64,
    pub action: f64,
    pub reward: f64,
}

/// Rolls out the checkpointed actor from `env.reset(episode_seed)` without
/// noise. Only learnable-head checkpoints carry `k` and `x0`.
pub fn trace_activations(checkpoint: &Path, env: EnvKind, episode_seed: u64, horizon: usize) -> Result<Vec<TraceRow>> {
    let actor = ActorNetwork::<f64>::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    if actor.kind() != HeadKind::Learnable {
        return Err(Error::UnsupportedVariant(format!(
            "{} holds a {} head; activation traces need a {} head",
            checkpoint.display(),
            actor.kind(),
            HeadKind::Learnable
        )));
    }
    let mut e = env.make::<f64>();
    let mut steps = Vec::new();
    rollout(&actor, e.as_mut(), episode_seed, horizon, Some(&mut steps))?;
    let mut rows = Vec::with_capacity(steps.len() * actor.action_dim());
    for (t, s) in steps.iter().enumerate() {
        let (k, x0) = (s.k.as_ref().expect("learnable head"), s.x0.as_ref().expect("learnable head"));
        for j in 0..s.action.len() {
            rows.push(TraceRow {
                step: t,
                actuator: j,
                pre_activation: s.pre_activation[j],
                k: k[j],
                x0: x0[j],
                action: s.action[j],
                reward: s.reward,
            });
        }
    }
    Ok(rows)
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}
