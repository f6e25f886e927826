//! Actor networks: observer layer, policy layers, a linear projection to the
//! action width, and one of two action heads.
//!
//! The learnable head maps the projection output `x` through
//! `tanh(k ⊙ x − k ⊙ x0)`, where `k` and `x0` come from two fully connected
//! branches fed by `x`. `k` passes through a sigmoid rescaled onto
//! `[k_min, k_max]`, so it is always positive and bounded; `x0` is linear.
//! The classic head instead stacks two fully connected layers (tanh between
//! them) in front of the final tanh. Both heads add `2·(A² + A)` weights and
//! biases for `A` actuators (plus `2·A` gains under weight normalisation), so
//! the two actors always have identical parameter counts.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::dense::{Activation, DenseLayer};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Which action head an actor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Plain `tanh` after two extra fully connected layers.
    Classic,
    /// Parameterised `tanh(k·x − k·x0)`.
    Learnable,
}

impl HeadKind {
    pub const ALL: [HeadKind; 2] = [HeadKind::Classic, HeadKind::Learnable];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Classic => "classic",
            HeadKind::Learnable => "learnable",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(HeadKind::Classic),
            "learnable" | "parameterised" | "parameterized" => Ok(HeadKind::Learnable),
            other => Err(Error::Config(format!(
                "unknown head `{other}` (expected `classic` or `learnable`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionHead<T> {
    Classic { extra1: DenseLayer<T>, extra2: DenseLayer<T> },
    Parameterised { k_branch: DenseLayer<T>, x0_branch: DenseLayer<T>, k_min: T, k_max: T },
}

impl<T: Scalar> ActionHead<T> {
    pub fn kind(&self) -> HeadKind {
        match self {
            ActionHead::Classic { .. } => HeadKind::Classic,
            ActionHead::Parameterised { .. } => HeadKind::Learnable,
        }
    }

    fn layers(&self) -> [&DenseLayer<T>; 2] {
        match self {
            ActionHead::Classic { extra1, extra2 } => [extra1, extra2],
            ActionHead::Parameterised { k_branch, x0_branch, .. } => [k_branch, x0_branch],
        }
    }

    fn layers_mut(&mut self) -> [&mut DenseLayer<T>; 2] {
        match self {
            ActionHead::Classic { extra1, extra2 } => [extra1, extra2],
            ActionHead::Parameterised { k_branch, x0_branch, .. } => [k_branch, x0_branch],
        }
    }

    fn layer_names(&self) -> [&'static str; 2] {
        match self {
            ActionHead::Classic { .. } => ["head.extra1", "head.extra2"],
            ActionHead::Parameterised { .. } => ["head.k", "head.x0"],
        }
    }
}

/// Architecture of an actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub observer_width: usize,
    /// Widths of the tanh policy layers after the observer.
    pub policy_widths: Vec<usize>,
    pub head: HeadKind,
    pub k_min: f64,
    pub k_max: f64,
    pub weight_norm: bool,
    /// Initialisation scale of the projection and of the learnable head's branches.
    pub output_init_scale: f64,
}

impl ActorConfig {
    pub fn new(obs_dim: usize, action_dim: usize, head: HeadKind) -> Self {
        Self {
            obs_dim,
            action_dim,
            observer_width: 64,
            policy_widths: vec![64],
            head,
            k_min: 0.1,
            k_max: 10.0,
            weight_norm: true,
            output_init_scale: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.action_dim == 0 || self.observer_width == 0 {
            return Err(Error::Config("actor dimensions must be positive".into()));
        }
        if self.policy_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("policy widths must be positive".into()));
        }
        if !(self.k_min > 0.0 && self.k_max > self.k_min && self.k_max.is_finite()) {
            return Err(Error::Config(format!(
                "k range [{}, {}] must satisfy 0 < k_min < k_max",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

/// Tape handles produced by one actor forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ActorOutput {
    pub action: Var,
    /// Pre-activation `x` from the projection layer.
    pub pre_activation: Var,
    /// Slope `k` (learnable head only).
    pub k: Option<Var>,
    /// Offset `x0` (learnable head only).
    pub x0: Option<Var>,
}

/// Values of one actor evaluation, detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorValues<T> {
    pub action: Tensor<T>,
    pub pre_activation: Tensor<T>,
    pub k: Option<Tensor<T>>,
    pub x0: Option<Tensor<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorNetwork<T> {
    observer: DenseLayer<T>,
    policy: Vec<DenseLayer<T>>,
    projection: DenseLayer<T>,
    head: ActionHead<T>,
    obs_dim: usize,
    action_dim: usize,
}

impl<T: Scalar> ActorNetwork<T> {
    pub fn new<R: Rng>(config: &ActorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let a = config.action_dim;
        let observer = DenseLayer::new(config.obs_dim, config.observer_width, Activation::Tanh, 1.0, rng);
        let mut width = config.observer_width;
        let mut policy = Vec::with_capacity(config.policy_widths.len());
        for &w in &config.policy_widths {
            policy.push(DenseLayer::new(width, w, Activation::Tanh, 1.0, rng));
            width = w;
        }
        let small = config.output_init_scale;
        let projection = DenseLayer::new(width, a, Activation::Identity, small, rng);
        let head = match config.head {
            HeadKind::Classic => ActionHead::Classic {
                extra1: DenseLayer::new(a, a, Activation::Tanh, 1.0, rng),
                extra2: DenseLayer::new(a, a, Activation::Identity, 1.0, rng),
            },
            HeadKind::Learnable => ActionHead::Parameterised {
                k_branch: DenseLayer::new(a, a, Activation::Identity, small, rng),
                x0_branch: DenseLayer::new(a, a, Activation::Identity, small, rng),
                k_min: T::lit(config.k_min),
                k_max: T::lit(config.k_max),
            },
        };
        let mut net = Self::from_parts(observer, policy, projection, head)?;
        if config.weight_norm {
            net.enable_weight_norm()?;
        }
        Ok(net)
    }

    /// Assembles an actor from explicit layers, checking that widths chain.
    pub fn from_parts(
        observer: DenseLayer<T>,
        policy: Vec<DenseLayer<T>>,
        projection: DenseLayer<T>,
        head: ActionHead<T>,
    ) -> Result<Self> {
        let mut width = observer.outputs();
        for (i, l) in policy.iter().enumerate() {
            if l.inputs() != width {
                return Err(Error::Shape(format!(
                    "policy layer {i} expects {} inputs, previous layer gives {width}",
                    l.inputs()
                )));
            }
            width = l.outputs();
        }
        if projection.inputs() != width {
            return Err(Error::Shape(format!(
                "projection expects {} inputs, policy gives {width}",
                projection.inputs()
            )));
        }
        let a = projection.outputs();
        for l in head.layers() {
            if l.inputs() != a || l.outputs() != a {
                return Err(Error::Shape(format!(
                    "head layers must be {a}x{a}, got {}x{}",
                    l.inputs(),
                    l.outputs()
                )));
            }
        }
        if let ActionHead::Parameterised { k_min, k_max, .. } = &head {
            if !(*k_min > T::zero() && *k_max > *k_min) {
                return Err(Error::Config(format!("invalid k range [{k_min}, {k_max}]")));
            }
        }
        Ok(Self { obs_dim: observer.inputs(), observer, policy, projection, head, action_dim: a })
    }

    fn enable_weight_norm(&mut self) -> Result<()> {
        for layer in self.layers_mut() {
            let l = std::mem::replace(layer, DenseLayer::zeros(1, 1, Activation::Identity));
            *layer = l.with_weight_norm()?;
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn head(&self) -> &ActionHead<T> {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut ActionHead<T> {
        &mut self.head
    }

    pub fn kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn observer(&self) -> &DenseLayer<T> {
        &self.observer
    }

    pub fn policy(&self) -> &[DenseLayer<T>] {
        &self.policy
    }

    pub fn projection(&self) -> &DenseLayer<T> {
        &self.projection
    }

    pub fn projection_mut(&mut self) -> &mut DenseLayer<T> {
        &mut self.projection
    }

    /// `(k_min, k_max)` for the learnable head.
    pub fn k_range(&self) -> Option<(T, T)> {
        match &self.head {
            ActionHead::Parameterised { k_min, k_max, .. } => Some((*k_min, *k_max)),
            ActionHead::Classic { .. } => None,
        }
    }

    /// All layers from input to output.
    pub fn layers(&self) -> Vec<&DenseLayer<T>> {
        let mut out = vec![&self.observer];
        out.extend(self.policy.iter());
        out.push(&self.projection);
        out.extend(self.head.layers());
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer<T>> {
        let mut out = vec![&mut self.observer];
        out.extend(self.policy.iter_mut());
        out.push(&mut self.projection);
        out.extend(self.head.layers_mut());
        out
    }

    fn layer_names(&self) -> Vec<String> {
        let mut out = vec!["observer".to_string()];
        out.extend((0..self.policy.len()).map(|i| format!("policy.{i}")));
        out.push("projection".into());
        out.extend(self.head.layer_names().iter().map(|s| s.to_string()));
        out
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers().into_iter().flat_map(DenseLayer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers_mut().into_iter().flat_map(DenseLayer::params_mut).collect()
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        self.layer_names()
            .iter()
            .zip(self.layers())
            .flat_map(|(name, l)| l.named_params(name))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Records `π^A(π^P(π^O(obs)))` on the tape.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        obs: Var,
        mut binding: Option<&mut Vec<Var>>,
    ) -> Result<ActorOutput> {
        let width = tape.value(obs).cols();
        if width != self.obs_dim {
            return Err(Error::Shape(format!(
                "actor expects {} observation values, got {width}",
                self.obs_dim
            )));
        }
        let mut h = self.observer.forward(tape, obs, binding.as_deref_mut())?;
        for layer in &self.policy {
            h = layer.forward(tape, h, binding.as_deref_mut())?;
        }
        let x = self.projection.forward(tape, h, binding.as_deref_mut())?;
        match &self.head {
            ActionHead::Classic { extra1, extra2 } => {
                let e1 = extra1.forward(tape, x, binding.as_deref_mut())?;
                let e2 = extra2.forward(tape, e1, binding.as_deref_mut())?;
                let action = tape.tanh(e2)?;
                Ok(ActorOutput { action, pre_activation: x, k: None, x0: None })
            }
            ActionHead::Parameterised { k_branch, x0_branch, k_min, k_max } => {
                let z = k_branch.forward(tape, x, binding.as_deref_mut())?;
                let s = tape.sigmoid(z)?;
                let k = tape.affine(s, *k_max - *k_min, *k_min)?;
                let x0 = x0_branch.forward(tape, x, binding.as_deref_mut())?;
                let kx = tape.mul(k, x)?;
                let kx0 = tape.mul(k, x0)?;
                let arg = tape.sub(kx, kx0)?;
                let action = tape.tanh(arg)?;
                Ok(ActorOutput { action, pre_activation: x, k: Some(k), x0: Some(x0) })
            }
        }
    }

    /// Evaluates a batch of observations without gradient tracking.
    pub fn evaluate(&self, obs: &Tensor<T>) -> Result<ActorValues<T>> {
        obs.check_finite("observation")?;
        let mut tape = Tape::new();
        let o = tape.constant(obs.clone())?;
        let out = self.forward(&mut tape, o, None)?;
        Ok(ActorValues {
            action: tape.value(out.action).clone(),
            pre_activation: tape.value(out.pre_activation).clone(),
            k: out.k.map(|v| tape.value(v).clone()),
            x0: out.x0.map(|v| tape.value(v).clone()),
        })
    }

    pub fn act(&self, obs: &[T]) -> Result<Vec<T>> {
        let o = Tensor::row_vector(obs)?;
        Ok(self.evaluate(&o)?.action.into_data())
    }

    /// Renormalises the weight directions of every layer that has a gain; see
    /// [`DenseLayer::weight_normalise`]. Layers without one are left alone so
    /// the parameter list never changes.
    pub fn weight_normalise(&mut self) -> Result<()> {
        for (name, layer) in self.layer_names().into_iter().zip(self.layers_mut()) {
            if !layer.is_weight_normalised() {
                continue;
            }
            layer.weight_normalise().map_err(|e| match e {
                Error::ZeroNorm(msg) => Error::ZeroNorm(format!("{name}: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }
}

/// Parameter count of an actor with the given architecture, computed from
/// layer shapes alone.
pub fn actor_parameter_count(config: &ActorConfig) -> usize {
    let per_layer = |i: usize, o: usize| i * o + o + if config.weight_norm { o } else { 0 };
    let mut total = per_layer(config.obs_dim, config.observer_width);
    let mut width = config.observer_width;
    for &w in &config.policy_widths {
        total += per_layer(width, w);
        width = w;
    }
    let a = config.action_dim;
    total + per_layer(width, a) + 2 * per_layer(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_names_parse() {
        assert_eq!("classic".parse::<HeadKind>().unwrap(), HeadKind::Classic);
        assert_eq!("learnable".parse::<HeadKind>().unwrap(), HeadKind::Learnable);
        assert!("relu".parse::<HeadKind>().is_err());
        assert_eq!(HeadKind::Learnable.to_string(), "learnable");
    }

    #[test]
    fn rejects_bad_k_range() {
        let mut cfg = ActorConfig::new(3, 1, HeadKind::Learnable);
        cfg.k_min = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ActorNetwork::<f64>::new(&cfg, &mut rng).is_err());
    }

    #[test]
    fn wrong_observation_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = ActorNetwork::<f64>::new(&ActorConfig::new(3, 1, HeadKind::Classic), &mut rng).unwrap();
        assert!(matches!(net.act(&[0.0, 1.0]), Err(Error::Shape(_))));
        assert!(matches!(net.act(&[0.0, f64::NAN, 1.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn structural_count_matches_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for head in HeadKind::ALL {
            for wn in [false, true] {
                let mut cfg = ActorConfig::new(24, 4, head);
                cfg.policy_widths = vec![64, 32];
                cfg.weight_norm = wn;
                let net = ActorNetwork::<f64>::new(&cfg, &mut rng).unwrap();
                assert_eq!(net.parameter_count(), actor_parameter_count(&cfg));
            }
        }
    }

    #[test]
    fn initial_k_is_near_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = ActorNetwork::<f64>::new(&ActorConfig::new(3, 1, HeadKind::Learnable), &mut rng).unwrap();
        let v = net.evaluate(&Tensor::from_rows(&[[1.0, 0.0, 0.5]]).unwrap()).unwrap();
        let k = v.k.unwrap().data()[0];
        assert!((k - 5.05).abs() < 0.01, "k = {k}");
        assert!(v.x0.unwrap().data()[0].abs() < 1e-3);
    }

    #[test]
    fn renormalising_keeps_function_and_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for wn in [true, false] {
            let mut cfg = ActorConfig::new(3, 2, HeadKind::Learnable);
            cfg.weight_norm = wn;
            let mut actor = ActorNetwork::<f64>::new(&cfg, &mut rng).unwrap();
            let before = actor.act(&[0.3, -0.2, 0.9]).unwrap();
            let count = actor.parameter_count();
            actor.weight_normalise().unwrap();
            assert_eq!(actor.parameter_count(), count);
            let after = actor.act(&[0.3, -0.2, 0.9]).unwrap();
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
