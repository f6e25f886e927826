//! Central finite-difference gradient checks shared by the test targets.

#![allow(dead_code)]

use paddpg::nn::{ActorConfig, ActorNetwork, CriticConfig, CriticNetwork, DenseLayer};
use paddpg::{Activation, HeadKind, Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const PROBES: usize = 100;
/// Relative errors are taken against `max(|analytic|, |numeric|, FLOOR)`.
/// A central difference at `h = 1e-6` carries about `ε·|L|/h ≈ 1e-10` of
/// rounding noise, so entries below the floor are held to an absolute
/// tolerance of `1e-5 · FLOOR`.
pub const FLOOR: f64 = 1e-4;

/// A scalar loss over learnable tensors.
pub trait Case {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>>;
    fn loss(&self, tape: &mut Tape<f64>, binding: Option<&mut Vec<Var>>) -> Result<Var>;
}

#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub probes: usize,
    pub worst: f64,
    /// Analytic and numeric values at the worst probe.
    pub at_worst: (f64, f64),
}

fn loss_value<C: Case>(case: &C) -> f64 {
    let mut tape = Tape::new();
    let l = case.loss(&mut tape, None).unwrap();
    tape.value(l).item().unwrap()
}

/// Compares reverse-mode gradients with `(L(θ+h) − L(θ−h)) / 2h` on
/// `PROBES` parameter entries drawn uniformly over all entries.
pub fn check<C: Case>(name: &str, case: &mut C, seed: u64) -> Report {
    let mut tape = Tape::new();
    let mut binding = Vec::new();
    let l = case.loss(&mut tape, Some(&mut binding)).unwrap();
    tape.backward(l).unwrap();
    let analytic: Vec<Tensor<f64>> = binding.iter().map(|&v| tape.grad_tensor(v)).collect();
    let sizes: Vec<usize> = case.params_mut().iter().map(|p| p.len()).collect();
    assert_eq!(sizes.len(), analytic.len(), "{name}: binding covers every parameter");
    let total: usize = sizes.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut at_worst = (0.0, 0.0);
    for _ in 0..PROBES {
        let mut flat = rng.random_range(0..total);
        let mut p = 0;
        while flat >= sizes[p] {
            flat -= sizes[p];
            p += 1;
        }
        let original = case.params_mut()[p].data()[flat];
        case.params_mut()[p].data_mut()[flat] = original + STEP;
        let plus = loss_value(case);
        case.params_mut()[p].data_mut()[flat] = original - STEP;
        let minus = loss_value(case);
        case.params_mut()[p].data_mut()[flat] = original;
        let numeric = (plus - minus) / (2.0 * STEP);
        let a = analytic[p].data()[flat];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        if rel > worst {
            worst = rel;
            at_worst = (a, numeric);
        }
    }
    Report { name: name.to_string(), probes: PROBES, worst, at_worst }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor<f64> {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Weighted sum `Σ c ⊙ f(x)` of a layer's outputs.
pub struct DenseCase {
    pub layer: DenseLayer<f64>,
    pub x: Tensor<f64>,
    pub c: Tensor<f64>,
}

impl Case for DenseCase {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.layer.params_mut()
    }

    fn loss(&self, tape: &mut Tape<f64>, binding: Option<&mut Vec<Var>>) -> Result<Var> {
        let x = tape.constant(self.x.clone())?;
        let y = self.layer.forward(tape, x, binding)?;
        let c = tape.constant(self.c.clone())?;
        let p = tape.mul(y, c)?;
        tape.sum(p)
    }
}

/// Weighted sum of the actor's actions.
pub struct ActorCase {
    pub actor: ActorNetwork<f64>,
    pub obs: Tensor<f64>,
    pub c: Tensor<f64>,
}

impl Case for ActorCase {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.actor.params_mut()
    }

    fn loss(&self, tape: &mut Tape<f64>, binding: Option<&mut Vec<Var>>) -> Result<Var> {
        let o = tape.constant(self.obs.clone())?;
        let out = self.actor.forward(tape, o, binding)?;
        let c = tape.constant(self.c.clone())?;
        let p = tape.mul(out.action, c)?;
        tape.sum(p)
    }
}

/// Critic mean squared error against fixed targets.
pub struct CriticCase {
    pub critic: CriticNetwork<f64>,
    pub obs: Tensor<f64>,
    pub action: Tensor<f64>,
    pub y: Tensor<f64>,
}

impl Case for CriticCase {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.critic.params_mut()
    }

    fn loss(&self, tape: &mut Tape<f64>, binding: Option<&mut Vec<Var>>) -> Result<Var> {
        let o = tape.constant(self.obs.clone())?;
        let a = tape.constant(self.action.clone())?;
        let y = tape.constant(self.y.clone())?;
        let q = self.critic.forward(tape, o, a, binding)?;
        let d = tape.sub(q, y)?;
        let s = tape.square(d)?;
        tape.mean(s)
    }
}

/// The actor objective `−mean Q(o, π(o))` with the critic held fixed.
pub struct PolicyCase {
    pub actor: ActorNetwork<f64>,
    pub critic: CriticNetwork<f64>,
    pub obs: Tensor<f64>,
}

impl Case for PolicyCase {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.actor.params_mut()
    }

    fn loss(&self, tape: &mut Tape<f64>, binding: Option<&mut Vec<Var>>) -> Result<Var> {
        let o = tape.constant(self.obs.clone())?;
        let out = self.actor.forward(tape, o, binding)?;
        let q = self.critic.forward(tape, o, out.action, None)?;
        let m = tape.mean(q)?;
        tape.neg(m)
    }
}

/// Runs the check over every layer, head and critic configuration.
pub fn all_configurations() -> Vec<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut reports = Vec::new();
    let batch = 8;

    for act in [Activation::Identity, Activation::Tanh, Activation::Sigmoid] {
        for wn in [false, true] {
            let mut layer = DenseLayer::new(5, 4, act, 1.0, &mut rng);
            if wn {
                layer = layer.with_weight_norm().unwrap();
            }
            let mut case =
                DenseCase { layer, x: random_tensor(&mut rng, batch, 5, 1.0), c: random_tensor(&mut rng, batch, 4, 1.0) };
            let name = format!("dense {act:?}{}", if wn { " weight-norm" } else { "" });
            reports.push(check(&name, &mut case, rng.random()));
        }
    }

    for (obs, hidden, act) in [(3usize, vec![16usize], 1usize), (4, vec![16], 2), (24, vec![32, 32], 4)] {
        for head in HeadKind::ALL {
            for wn in [true, false] {
                let mut config = ActorConfig::new(obs, act, head);
                config.observer_width = hidden[0];
                config.policy_widths = hidden.clone();
                config.weight_norm = wn;
                // larger output layers so the head works away from its linear regime
                config.output_init_scale = 1.0;
                let actor = ActorNetwork::new(&config, &mut rng).unwrap();
                let mut case = ActorCase {
                    actor,
                    obs: random_tensor(&mut rng, batch, obs, 1.0),
                    c: random_tensor(&mut rng, batch, act, 1.0),
                };
                let name = format!(
                    "actor {head} obs={obs} hidden={hidden:?} act={act}{}",
                    if wn { " weight-norm" } else { "" }
                );
                reports.push(check(&name, &mut case, rng.random()));
            }
        }
        let critic = CriticNetwork::new(&CriticConfig::new(obs, act), &mut rng).unwrap();
        let mut case = CriticCase {
            critic: critic.clone(),
            obs: random_tensor(&mut rng, batch, obs, 1.0),
            action: random_tensor(&mut rng, batch, act, 1.0),
            y: random_tensor(&mut rng, batch, 1, 2.0),
        };
        reports.push(check(&format!("critic obs={obs} act={act}"), &mut case, rng.random()));

        for head in HeadKind::ALL {
            let mut config = ActorConfig::new(obs, act, head);
            config.output_init_scale = 1.0;
            let mut case = PolicyCase {
                actor: ActorNetwork::new(&config, &mut rng).unwrap(),
                critic: critic.clone(),
                obs: random_tensor(&mut rng, batch, obs, 1.0),
            };
            reports.push(check(&format!("actor-through-critic {head} obs={obs} act={act}"), &mut case, rng.random()));
        }
    }
    reports
}
