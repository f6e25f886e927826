use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::dense::{Activation, DenseLayer};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
}

impl CriticConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self { obs_dim, action_dim, hidden: vec![64, 64] }
    }
}

/// Q-network over the concatenated `[obs | action]` input with tanh hidden
/// layers and an unbounded linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNetwork<T> {
    layers: Vec<DenseLayer<T>>,
    obs_dim: usize,
    action_dim: usize,
}

impl<T: Scalar> CriticNetwork<T> {
    pub fn new<R: Rng>(config: &CriticConfig, rng: &mut R) -> Result<Self> {
        if config.obs_dim == 0 || config.action_dim == 0 || config.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("critic dimensions must be positive".into()));
        }
        let mut width = config.obs_dim + config.action_dim;
        let mut layers = Vec::with_capacity(config.hidden.len() + 1);
        for &h in &config.hidden {
            layers.push(DenseLayer::new(width, h, Activation::Tanh, 1.0, rng));
            width = h;
        }
        layers.push(DenseLayer::new(width, 1, Activation::Identity, 1.0, rng));
        Self::from_layers(layers, config.obs_dim, config.action_dim)
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>, obs_dim: usize, action_dim: usize) -> Result<Self> {
        let mut width = obs_dim + action_dim;
        for (i, l) in layers.iter().enumerate() {
            if l.inputs() != width {
                return Err(Error::Shape(format!(
                    "critic layer {i} expects {} inputs, gets {width}",
                    l.inputs()
                )));
            }
            width = l.outputs();
        }
        if width != 1 {
            return Err(Error::Shape(format!("critic must output one value, not {width}")));
        }
        Ok(Self { layers, obs_dim, action_dim })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    /// Zeroes the output layer so every Q-value starts at exactly zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("critic has an output layer");
        last.weight_mut().data_mut().iter_mut().for_each(|w| *w = T::zero());
        last.bias_mut().data_mut().iter_mut().for_each(|b| *b = T::zero());
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(DenseLayer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(DenseLayer::params_mut).collect()
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.named_params(&format!("critic.{i}")))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Records `Q(obs, action)`, a `batch×1` tensor.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        obs: Var,
        action: Var,
        mut binding: Option<&mut Vec<Var>>,
    ) -> Result<Var> {
        let (ob, ab) = (tape.value(obs).shape(), tape.value(action).shape());
        if ob.1 != self.obs_dim || ab.1 != self.action_dim {
            return Err(Error::Shape(format!(
                "critic expects widths ({}, {}), got ({}, {})",
                self.obs_dim, self.action_dim, ob.1, ab.1
            )));
        }
        let mut h = tape.concat_cols(obs, action)?;
        for layer in &self.layers {
            h = layer.forward(tape, h, binding.as_deref_mut())?;
        }
        Ok(h)
    }

    /// Q-values for a batch, without gradient tracking.
    pub fn evaluate(&self, obs: &Tensor<T>, action: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let o = tape.constant(obs.clone())?;
        let a = tape.constant(action.clone())?;
        let q = self.forward(&mut tape, o, a, None)?;
        Ok(tape.value(q).clone())
    }
}
