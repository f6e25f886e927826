//! DDPG: behaviour and target actor/critic pairs, Gaussian exploration,
//! bootstrapped critic regression, deterministic policy-gradient actor
//! updates through the critic, and soft target tracking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, AdamState};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::{ActorConfig, ActorNetwork, CriticConfig, CriticNetwork};
use crate::replay::{Batch, ReplayBuffer, Transition, DEFAULT_CAPACITY};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_sigma: f64,
    pub batch_size: usize,
    /// Transitions collected before the first gradient update.
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        let batch_size = 64;
        Self {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            noise_sigma: 0.25,
            batch_size,
            warmup_steps: batch_size * 10,
            buffer_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be non-negative", self.noise_sigma)));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("batch size and buffer capacity must be positive".into()));
        }
        Ok(())
    }
}

/// One exploration decision, before and after noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample<T> {
    /// Deterministic actor output.
    pub clean: Vec<T>,
    /// Noise drawn for this call (zeros without exploration).
    pub noise: Vec<T>,
    /// `clip(clean + noise, -1, 1)`.
    pub action: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean Q of the actor's own actions on the batch (before the actor step).
    pub actor_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeStats {
    pub rewards: Vec<f64>,
    pub total: f64,
    pub steps: usize,
    /// Gradient updates performed during the episode.
    pub updates: usize,
}

impl EpisodeStats {
    fn record(&mut self, reward: f64) {
        self.rewards.push(reward);
        self.total += reward;
        self.steps += 1;
    }
}

/// Adds `tape` gradients of `binding` into the matching parameters.
fn pull_grads<T: Scalar>(tape: &Tape<T>, binding: &[Var], params: Vec<&mut Tensor<T>>) -> Result<()> {
    if binding.len() != params.len() {
        return Err(Error::State(format!(
            "{} bound tensors for {} parameters",
            binding.len(),
            params.len()
        )));
    }
    for (v, p) in binding.iter().zip(params) {
        match tape.grad(*v) {
            Some(g) => p.accumulate_grad(g)?,
            // parameter did not influence the loss
            None => p.accumulate_grad(&vec![T::zero(); p.len()])?,
        }
    }
    Ok(())
}

fn actor_ascent<T: Scalar, F>(
    actor: &mut ActorNetwork<T>,
    opt: &mut AdamState<T>,
    obs: &Tensor<T>,
    objective: F,
) -> Result<T>
where
    F: FnOnce(&mut Tape<T>, Var, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let o = tape.constant(obs.clone())?;
    let mut binding = Vec::new();
    let out = actor.forward(&mut tape, o, Some(&mut binding))?;
    let q = objective(&mut tape, o, out.action)?;
    let mean_q = tape.mean(q)?;
    let loss = tape.neg(mean_q)?;
    tape.backward(loss)?;
    pull_grads(&tape, &binding, actor.params_mut())?;
    opt.step(&mut actor.params_mut())?;
    actor.weight_normalise()?;
    tape.value(mean_q).item()
}

/// `θ′ ← τ·θ + (1 − τ)·θ′` for each matching pair.
pub fn soft_update_params<T: Scalar>(
    targets: Vec<&mut Tensor<T>>,
    sources: Vec<&Tensor<T>>,
    tau: T,
) -> Result<()> {
    if targets.len() != sources.len() {
        return Err(Error::Shape("target and source parameter lists differ".into()));
    }
    let keep = T::one() - tau;
    for (t, s) in targets.into_iter().zip(sources) {
        if t.shape() != s.shape() {
            return Err(Error::Shape(format!("target {:?} vs source {:?}", t.shape(), s.shape())));
        }
        for (a, &b) in t.data_mut().iter_mut().zip(s.data()) {
            *a = tau * b + keep * *a;
        }
    }
    Ok(())
}

pub struct Agent<T: Scalar> {
    actor: ActorNetwork<T>,
    critic: CriticNetwork<T>,
    target_actor: ActorNetwork<T>,
    target_critic: CriticNetwork<T>,
    actor_opt: AdamState<T>,
    critic_opt: AdamState<T>,
    buffer: ReplayBuffer<T>,
    config: AgentConfig,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    updates: u64,
}

impl<T: Scalar> Agent<T> {
    /// Builds fresh networks; every random draw of the run flows from `seed`.
    pub fn new(actor: &ActorConfig, critic: &CriticConfig, config: AgentConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ActorNetwork::new(actor, &mut rng)?;
        let c = CriticNetwork::new(critic, &mut rng)?;
        Self::assemble(a, c, config, rng)
    }

    /// Wraps existing networks; targets start as exact copies.
    pub fn from_networks(
        actor: ActorNetwork<T>,
        critic: CriticNetwork<T>,
        config: AgentConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::assemble(actor, critic, config, ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(
        actor: ActorNetwork<T>,
        critic: CriticNetwork<T>,
        config: AgentConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if actor.obs_dim() != critic.obs_dim() || actor.action_dim() != critic.action_dim() {
            return Err(Error::Shape(format!(
                "actor ({}, {}) and critic ({}, {}) disagree on widths",
                actor.obs_dim(),
                actor.action_dim(),
                critic.obs_dim(),
                critic.action_dim()
            )));
        }
        let actor_opt = AdamState::new(AdamConfig::with_learning_rate(T::lit(config.actor_lr)), &actor.params())?;
        let critic_opt =
            AdamState::new(AdamConfig::with_learning_rate(T::lit(config.critic_lr)), &critic.params())?;
        let buffer = ReplayBuffer::new(config.buffer_capacity, actor.obs_dim(), actor.action_dim())?;
        let noise = Normal::new(0.0, config.noise_sigma)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            buffer,
            config,
            rng,
            noise,
            updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn actor(&self) -> &ActorNetwork<T> {
        &self.actor
    }

    pub fn critic(&self) -> &CriticNetwork<T> {
        &self.critic
    }

    pub fn target_actor(&self) -> &ActorNetwork<T> {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &CriticNetwork<T> {
        &self.target_critic
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer<T> {
        &mut self.buffer
    }

    /// Gradient updates performed so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn act_detailed(&mut self, obs: &[T], explore: bool) -> Result<ActionSample<T>> {
        if let Some(x) = obs.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("observation component {x}")));
        }
        let clean = self.actor.act(obs)?;
        let noise: Vec<T> = if explore && self.config.noise_sigma > 0.0 {
            (0..clean.len()).map(|_| T::lit(self.noise.sample(&mut self.rng))).collect()
        } else {
            vec![T::zero(); clean.len()]
        };
        let action = clean
            .iter()
            .zip(&noise)
            .map(|(&a, &n)| (a + n).max(-T::one()).min(T::one()))
            .collect();
        Ok(ActionSample { clean, noise, action })
    }

    pub fn act(&mut self, obs: &[T], explore: bool) -> Result<Vec<T>> {
        Ok(self.act_detailed(obs, explore)?.action)
    }

    /// Bootstrapped targets `y = r + γ·(1 − done)·Q′(o′, π′(o′))`, `batch×1`.
    pub fn compute_targets(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        let next_action = self.target_actor.evaluate(&batch.next_obs)?.action;
        let next_q = self.target_critic.evaluate(&batch.next_obs, &next_action)?;
        let gamma = T::lit(self.config.gamma);
        let y = batch
            .reward
            .data()
            .iter()
            .zip(batch.done.data())
            .zip(next_q.data())
            .map(|((&r, &d), &q)| r + gamma * (T::one() - d) * q)
            .collect();
        Tensor::from_vec(batch.len(), 1, y)
    }

    /// One ADAM step on the critic's mean squared error against `targets`.
    /// Returns the loss before the step.
    pub fn critic_step(&mut self, obs: &Tensor<T>, action: &Tensor<T>, targets: &Tensor<T>) -> Result<T> {
        let mut tape = Tape::new();
        let o = tape.constant(obs.clone())?;
        let a = tape.constant(action.clone())?;
        let y = tape.constant(targets.clone())?;
        let mut binding = Vec::new();
        let q = self.critic.forward(&mut tape, o, a, Some(&mut binding))?;
        let diff = tape.sub(q, y)?;
        let sq = tape.square(diff)?;
        let loss = tape.mean(sq)?;
        tape.backward(loss)?;
        pull_grads(&tape, &binding, self.critic.params_mut())?;
        self.critic_opt.step(&mut self.critic.params_mut())?;
        tape.value(loss).item()
    }

    /// One ADAM ascent step on the mean of `objective(obs, π(obs))`, followed
    /// by weight renormalisation of the actor. `objective` must record a
    /// `batch×1` value on the tape and is treated as fixed (its own
    /// parameters receive no update). Returns the objective before the step.
    pub fn actor_step_with<F>(&mut self, obs: &Tensor<T>, objective: F) -> Result<T>
    where
        F: FnOnce(&mut Tape<T>, Var, Var) -> Result<Var>,
    {
        actor_ascent(&mut self.actor, &mut self.actor_opt, obs, objective)
    }

    /// Critic regression followed by an actor step through the updated
    /// critic, with the critic held fixed during the latter.
    pub fn update(&mut self, transitions: &[Transition<T>]) -> Result<UpdateStats> {
        let batch = Batch::from_transitions(transitions)?;
        let targets = self.compute_targets(&batch)?;
        let critic_loss = self.critic_step(&batch.obs, &batch.action, &targets)?;
        let critic = &self.critic;
        let actor_objective = actor_ascent(&mut self.actor, &mut self.actor_opt, &batch.obs, |tape, o, a| {
            critic.forward(tape, o, a, None)
        })?;
        self.updates += 1;
        Ok(UpdateStats { critic_loss: critic_loss.as_f64(), actor_objective: actor_objective.as_f64() })
    }

    pub fn soft_update(&mut self) -> Result<()> {
        let tau = T::lit(self.config.tau);
        soft_update_params(self.target_actor.params_mut(), self.actor.params(), tau)?;
        soft_update_params(self.target_critic.params_mut(), self.critic.params(), tau)
    }

    /// Samples a batch and performs one update and soft update when the
    /// buffer holds at least `max(batch_size, warmup_steps)` transitions.
    pub fn maybe_learn(&mut self) -> Result<Option<UpdateStats>> {
        let needed = self.config.batch_size.max(self.config.warmup_steps);
        if self.buffer.len() < needed {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
        let stats = self.update(&batch)?;
        self.soft_update()?;
        Ok(Some(stats))
    }

    /// Runs one exploratory episode from `env.reset(episode_seed)`, storing
    /// every transition and learning after each step.
    pub fn train_episode(
        &mut self,
        env: &mut dyn Environment<T>,
        episode_seed: u64,
        max_steps: usize,
    ) -> Result<EpisodeStats> {
        env.set_horizon(max_steps);
        let mut obs = env.reset(episode_seed);
        let mut stats = EpisodeStats::default();
        for _ in 0..max_steps {
            let action = self.act(&obs, true)?;
            let step = env.step(&action)?;
            self.buffer.push(Transition {
                obs: std::mem::take(&mut obs),
                action,
                reward: step.reward,
                next_obs: step.obs.clone(),
                done: step.terminal(),
            })?;
            stats.record(step.reward.as_f64());
            if self.maybe_learn()?.is_some() {
                stats.updates += 1;
            }
            obs = step.obs;
            if step.done {
                break;
            }
        }
        Ok(stats)
    }

    /// Draws a fresh `u64` from the agent's generator.
    pub fn next_seed(&mut self) -> u64 {
        self.rng.random()
    }
}

/// Per-step record of a deterministic rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub obs: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub k: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Runs the actor without exploration noise from `env.reset(seed)` for at
/// most `horizon` steps.
pub fn rollout<T: Scalar>(
    actor: &ActorNetwork<T>,
    env: &mut dyn Environment<T>,
    seed: u64,
    horizon: usize,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<EpisodeStats> {
    env.set_horizon(horizon);
    let mut obs = env.reset(seed);
    let mut stats = EpisodeStats::default();
    let to64 = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    for _ in 0..horizon {
        let values = actor.evaluate(&Tensor::row_vector(&obs)?)?;
        let action = values.action.data().to_vec();
        let step = env.step(&action)?;
        stats.record(step.reward.as_f64());
        if let Some(t) = trace.as_deref_mut() {
            t.push(StepTrace {
                obs: to64(&obs),
                pre_activation: to64(values.pre_activation.data()),
                k: values.k.as_ref().map(|k| to64(k.data())),
                x0: values.x0.as_ref().map(|x| to64(x.data())),
                action: to64(&action),
                reward: step.reward.as_f64(),
                done: step.done,
            });
        }
        obs = step.obs;
        if step.done {
            break;
        }
    }
    Ok(stats)
}
