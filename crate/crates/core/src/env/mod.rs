//! Seedable continuous-control environments.
//!
//! Agents emit actions in `[-1, 1]^n`; each environment scales them to its
//! own actuator range. Out-of-range actions are clipped and counted.

mod hetero;
mod pendulum;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use hetero::{HeteroActuatorEnv, HeteroParams};
pub use pendulum::PendulumEnv;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub obs: Vec<T>,
    pub reward: T,
    /// The episode is over, by termination or by the horizon.
    pub done: bool,
    /// The episode ended only because the horizon was reached.
    pub truncated: bool,
    /// Number of steps taken so far in this episode (1 after the first step).
    pub step_index: usize,
}

impl<T> StepResult<T> {
    /// True when the new state is a genuine terminal state.
    pub fn terminal(&self) -> bool {
        self.done && !self.truncated
    }
}

pub trait Environment<T: Scalar>: Send {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Steps after which an episode is cut off.
    fn horizon(&self) -> usize;
    fn set_horizon(&mut self, horizon: usize);
    /// Starts a new episode with its own random initial state.
    fn reset(&mut self, seed: u64) -> Vec<T>;
    fn step(&mut self, action: &[T]) -> Result<StepResult<T>>;
    /// How many action components were clipped into `[-1, 1]` so far.
    fn clipped_actions(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pendulum,
    Hetero2,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Hetero2 => "hetero2",
        }
    }

    pub fn make<T: Scalar>(self) -> Box<dyn Environment<T>> {
        match self {
            EnvKind::Pendulum => Box::new(PendulumEnv::new()),
            EnvKind::Hetero2 => Box::new(HeteroActuatorEnv::new()),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "hetero2" => Ok(EnvKind::Hetero2),
            other => Err(Error::Config(format!(
                "unknown environment `{other}` (expected `pendulum` or `hetero2`)"
            ))),
        }
    }
}

/// Clips each component into `[-1, 1]`, returning the clipped vector and
/// how many components were out of range.
pub(crate) fn clip_unit<T: Scalar>(action: &[T], expected: usize) -> Result<(Vec<T>, u64)> {
    if action.len() != expected {
        return Err(Error::Width { expected, got: action.len() });
    }
    let mut clipped = 0;
    let out = action
        .iter()
        .map(|&a| {
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("action component {a}")));
            }
            if a.abs() > T::one() {
                clipped += 1;
            }
            Ok(a.max(-T::one()).min(T::one()))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok((out, clipped))
}
