//! DDPG for continuous control with a learnable `tanh(k·x − k·x0)` action
//! head, a parameter-matched classic `tanh` baseline, reference
//! environments, and a seeded benchmark harness.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which the harness and CLI use.

pub mod adam;
pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use agent::{rollout, Agent, AgentConfig, EpisodeStats, StepTrace, UpdateStats};
pub use env::{EnvKind, Environment, HeteroActuatorEnv, PendulumEnv, StepResult};
pub use error::{Error, Result};
pub use harness::{EvalEpisode, RunConfig, SummaryTable};
pub use nn::{
    ActionHead, Activation, ActorConfig, ActorNetwork, Checkpoint, CriticConfig, CriticNetwork, DenseLayer,
    HeadKind,
};
pub use replay::{ReplayBuffer, Transition};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tape64 = Tape<f64>;
pub type DenseLayer64 = DenseLayer<f64>;
pub type Actor64 = ActorNetwork<f64>;
pub type Critic64 = CriticNetwork<f64>;
pub type Agent64 = Agent<f64>;
pub type Checkpoint64 = Checkpoint<f64>;
pub type ReplayBuffer64 = ReplayBuffer<f64>;

pub type Tensor32 = Tensor<f32>;
pub type Actor32 = ActorNetwork<f32>;
pub type Agent32 = Agent<f32>;
