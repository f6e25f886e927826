//! Fully connected layers, actor and critic networks, and checkpoints.

pub mod actor;
pub mod checkpoint;
pub mod critic;
pub mod dense;

pub use actor::{
    actor_parameter_count, ActionHead, ActorConfig, ActorNetwork, ActorOutput, ActorValues, HeadKind,
};
pub use checkpoint::Checkpoint;
pub use critic::{CriticConfig, CriticNetwork};
pub use dense::{Activation, DenseLayer};
