//! Fixed-capacity circular experience buffer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_CAPACITY: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<T>,
    /// Action actually sent to the environment (after noise and clipping).
    pub action: Vec<T>,
    pub reward: T,
    pub next_obs: Vec<T>,
    /// True only for genuine terminal states, never for time-limit cut-offs.
    pub done: bool,
}

/// A sampled minibatch laid out as row-per-transition tensors.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub obs: Tensor<T>,
    pub action: Tensor<T>,
    /// `batch×1`
    pub reward: Tensor<T>,
    pub next_obs: Tensor<T>,
    /// `batch×1`, 1 for terminal transitions.
    pub done: Tensor<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_transitions(ts: &[Transition<T>]) -> Result<Self> {
        let first = ts.first().ok_or_else(|| Error::State("empty batch".into()))?;
        let (od, ad) = (first.obs.len(), first.action.len());
        let n = ts.len();
        let mut obs = Vec::with_capacity(n * od);
        let mut next = Vec::with_capacity(n * od);
        let mut act = Vec::with_capacity(n * ad);
        let mut rew = Vec::with_capacity(n);
        let mut done = Vec::with_capacity(n);
        for t in ts {
            if t.obs.len() != od || t.next_obs.len() != od {
                return Err(Error::Width { expected: od, got: t.obs.len().max(t.next_obs.len()) });
            }
            if t.action.len() != ad {
                return Err(Error::Width { expected: ad, got: t.action.len() });
            }
            obs.extend_from_slice(&t.obs);
            next.extend_from_slice(&t.next_obs);
            act.extend_from_slice(&t.action);
            rew.push(t.reward);
            done.push(if t.done { T::one() } else { T::zero() });
        }
        Ok(Self {
            obs: Tensor::from_vec(n, od, obs)?,
            action: Tensor::from_vec(n, ad, act)?,
            reward: Tensor::from_vec(n, 1, rew)?,
            next_obs: Tensor::from_vec(n, od, next)?,
            done: Tensor::from_vec(n, 1, done)?,
        })
    }

    pub fn len(&self) -> usize {
        self.reward.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ring buffer over flat per-field storage. Once full, each push replaces
/// the oldest transition.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    obs: Vec<T>,
    action: Vec<T>,
    reward: Vec<T>,
    next_obs: Vec<T>,
    done: Vec<bool>,
    write_index: usize,
    count: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 || obs_dim == 0 || action_dim == 0 {
            return Err(Error::Config("replay capacity and widths must be positive".into()));
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            obs: Vec::with_capacity(capacity * obs_dim),
            action: Vec::with_capacity(capacity * action_dim),
            reward: Vec::with_capacity(capacity),
            next_obs: Vec::with_capacity(capacity * obs_dim),
            done: Vec::with_capacity(capacity),
            write_index: 0,
            count: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.capacity
    }

    pub fn push(&mut self, t: Transition<T>) -> Result<()> {
        if t.obs.len() != self.obs_dim {
            return Err(Error::Width { expected: self.obs_dim, got: t.obs.len() });
        }
        if t.next_obs.len() != self.obs_dim {
            return Err(Error::Width { expected: self.obs_dim, got: t.next_obs.len() });
        }
        if t.action.len() != self.action_dim {
            return Err(Error::Width { expected: self.action_dim, got: t.action.len() });
        }
        if !t.reward.is_finite() {
            return Err(Error::NonFinite(format!("reward {}", t.reward)));
        }
        if self.count < self.capacity {
            self.obs.extend_from_slice(&t.obs);
            self.action.extend_from_slice(&t.action);
            self.reward.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.done.push(t.done);
            self.count += 1;
        } else {
            let i = self.write_index;
            let (o, a) = (self.obs_dim, self.action_dim);
            self.obs[i * o..(i + 1) * o].copy_from_slice(&t.obs);
            self.action[i * a..(i + 1) * a].copy_from_slice(&t.action);
            self.reward[i] = t.reward;
            self.next_obs[i * o..(i + 1) * o].copy_from_slice(&t.next_obs);
            self.done[i] = t.done;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
        Ok(())
    }

    /// Transition at storage slot `slot`.
    pub fn slot(&self, slot: usize) -> Option<Transition<T>> {
        if slot >= self.count {
            return None;
        }
        let (o, a) = (self.obs_dim, self.action_dim);
        Some(Transition {
            obs: self.obs[slot * o..(slot + 1) * o].to_vec(),
            action: self.action[slot * a..(slot + 1) * a].to_vec(),
            reward: self.reward[slot],
            next_obs: self.next_obs[slot * o..(slot + 1) * o].to_vec(),
            done: self.done[slot],
        })
    }

    /// Live transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = Transition<T>> + '_ {
        let start = if self.is_full() { self.write_index } else { 0 };
        (0..self.count).map(move |i| self.slot((start + i) % self.capacity).expect("live slot"))
    }

    /// Draws `batch` storage slots uniformly with replacement.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || self.count < batch {
            return Err(Error::Underfull { count: self.count, batch });
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.count)).collect())
    }

    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<Transition<T>>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| self.slot(i).expect("index below count"))
            .collect())
    }
}
