//! `PADDPG v1` checkpoint files.
//!
//! ```text
//! PADDPG v1
//! observer.weight 3 64
//! <row-major values, one matrix row per line>
//! observer.gain 1 64
//! ...
//! ```
//!
//! Values are written in scientific notation with enough significant digits
//! (17 for `f64`) to reload bit-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::actor::{ActionHead, ActorNetwork};
use crate::nn::critic::CriticNetwork;
use crate::nn::dense::{Activation, DenseLayer};
use crate::scalar::{format_exact, Scalar};
use crate::tensor::Tensor;

pub const HEADER: &str = "PADDPG v1";

/// Ordered named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Default for Checkpoint<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Parse(format!("invalid parameter name {name:?}")));
        }
        if self.get(&name).is_some() {
            return Err(Error::Parse(format!("duplicate parameter {name}")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor<T>)] {
        &self.entries
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        for (name, t) in &self.entries {
            writeln!(w, "{name} {} {}", t.rows(), t.cols())?;
            for r in 0..t.rows() {
                let line: Vec<String> = t.row(r).iter().map(|&x| format_exact(x)).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        if header.trim_end() != HEADER {
            return Err(Error::Parse(format!(
                "expected header `{HEADER}`, found `{}`",
                header.trim_end()
            )));
        }
        let mut body = String::new();
        reader.read_to_string(&mut body)?;
        let mut tokens = body.split_whitespace();
        let mut ckpt = Self::new();
        while let Some(name) = tokens.next() {
            let mut dim = |what: &str| -> Result<usize> {
                tokens
                    .next()
                    .ok_or_else(|| Error::Parse(format!("{name}: missing {what}")))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{name}: bad {what}: {e}")))
            };
            let rows = dim("row count")?;
            let cols = dim("column count")?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Parse(format!("{name}: shape overflows")))?;
            let mut data = Vec::with_capacity(n.min(1 << 20));
            for i in 0..n {
                let tok = tokens
                    .next()
                    .ok_or_else(|| Error::Parse(format!("{name}: expected {n} values, found {i}")))?;
                let v = tok
                    .parse::<T>()
                    .map_err(|_| Error::Parse(format!("{name}: `{tok}` is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!("{name}: non-finite value `{tok}`")));
                }
                data.push(v);
            }
            let t = Tensor::from_vec(rows, cols, data).map_err(|e| Error::Parse(format!("{name}: {e}")))?;
            ckpt.push(name, t)?;
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    fn take_layer(
        map: &mut BTreeMap<String, Tensor<T>>,
        prefix: &str,
        activation: Activation,
    ) -> Result<Option<DenseLayer<T>>> {
        let Some(weight) = map.remove(&format!("{prefix}.weight")) else {
            return Ok(None);
        };
        let bias = map
            .remove(&format!("{prefix}.bias"))
            .ok_or_else(|| Error::Parse(format!("{prefix}: missing bias")))?;
        let gain = map.remove(&format!("{prefix}.gain"));
        DenseLayer::from_parts(weight, gain, bias, activation)
            .map(Some)
            .map_err(|e| Error::Parse(format!("{prefix}: {e}")))
    }
}

const K_RANGE: &str = "head.k_range";

impl<T: Scalar> ActorNetwork<T> {
    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let mut ckpt = Checkpoint::new();
        for (name, t) in self.named_params() {
            let mut t = t.clone();
            t.set_requires_grad(false);
            ckpt.push(name, t).expect("layer names are unique");
        }
        if let Some((lo, hi)) = self.k_range() {
            let range = Tensor::from_vec(1, 2, vec![lo, hi]).expect("1x2");
            ckpt.push(K_RANGE, range).expect("unique");
        }
        ckpt
    }

    /// Rebuilds an actor; the head variant follows from the stored names.
    pub fn from_checkpoint(ckpt: &Checkpoint<T>) -> Result<Self> {
        let mut map: BTreeMap<String, Tensor<T>> = ckpt.entries().iter().cloned().collect();
        let missing = |what: &str| Error::Parse(format!("checkpoint has no {what} layer"));
        let observer =
            Checkpoint::take_layer(&mut map, "observer", Activation::Tanh)?.ok_or_else(|| missing("observer"))?;
        let mut policy = Vec::new();
        while let Some(l) = Checkpoint::take_layer(&mut map, &format!("policy.{}", policy.len()), Activation::Tanh)? {
            policy.push(l);
        }
        let projection = Checkpoint::take_layer(&mut map, "projection", Activation::Identity)?
            .ok_or_else(|| missing("projection"))?;
        let head = if let Some(k_branch) = Checkpoint::take_layer(&mut map, "head.k", Activation::Identity)? {
            let x0_branch = Checkpoint::take_layer(&mut map, "head.x0", Activation::Identity)?
                .ok_or_else(|| missing("head.x0"))?;
            let range = map.remove(K_RANGE).ok_or_else(|| missing(K_RANGE))?;
            if range.shape() != (1, 2) {
                return Err(Error::Parse(format!("{K_RANGE} must be 1x2")));
            }
            ActionHead::Parameterised { k_branch, x0_branch, k_min: range.data()[0], k_max: range.data()[1] }
        } else {
            let extra1 = Checkpoint::take_layer(&mut map, "head.extra1", Activation::Tanh)?
                .ok_or_else(|| missing("head.extra1 or head.k"))?;
            let extra2 = Checkpoint::take_layer(&mut map, "head.extra2", Activation::Identity)?
                .ok_or_else(|| missing("head.extra2"))?;
            ActionHead::Classic { extra1, extra2 }
        };
        if let Some(name) = map.keys().next() {
            return Err(Error::Parse(format!("unexpected entry {name}")));
        }
        ActorNetwork::from_parts(observer, policy, projection, head)
            .map_err(|e| Error::Parse(format!("inconsistent actor: {e}")))
    }
}

impl<T: Scalar> CriticNetwork<T> {
    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let mut ckpt = Checkpoint::new();
        for (name, t) in self.named_params() {
            let mut t = t.clone();
            t.set_requires_grad(false);
            ckpt.push(name, t).expect("layer names are unique");
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint<T>, obs_dim: usize, action_dim: usize) -> Result<Self> {
        let mut map: BTreeMap<String, Tensor<T>> = ckpt.entries().iter().cloned().collect();
        let mut layers = Vec::new();
        loop {
            let prefix = format!("critic.{}", layers.len());
            if !map.contains_key(&format!("{prefix}.weight")) {
                break;
            }
            let last = !map.contains_key(&format!("critic.{}.weight", layers.len() + 1));
            let act = if last { Activation::Identity } else { Activation::Tanh };
            let layer = Checkpoint::take_layer(&mut map, &prefix, act)?.expect("weight present");
            layers.push(layer);
        }
        if let Some(name) = map.keys().next() {
            return Err(Error::Parse(format!("unexpected entry {name}")));
        }
        CriticNetwork::from_layers(layers, obs_dim, action_dim)
            .map_err(|e| Error::Parse(format!("inconsistent critic: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::actor::{ActorConfig, HeadKind};
    use crate::nn::critic::CriticConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn actor_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for head in HeadKind::ALL {
            let net = ActorNetwork::<f64>::new(&ActorConfig::new(3, 2, head), &mut rng).unwrap();
            let mut buf = Vec::new();
            net.to_checkpoint().write_to(&mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("PADDPG v1\nobserver.weight 3 64\n"));
            let back = ActorNetwork::from_checkpoint(&Checkpoint::read_from(&buf[..]).unwrap()).unwrap();
            assert_eq!(back, net);
        }
    }

    #[test]
    fn critic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let critic = CriticNetwork::<f64>::new(&CriticConfig::new(4, 2), &mut rng).unwrap();
        let mut buf = Vec::new();
        critic.to_checkpoint().write_to(&mut buf).unwrap();
        let back = CriticNetwork::from_checkpoint(&Checkpoint::read_from(&buf[..]).unwrap(), 4, 2).unwrap();
        assert_eq!(back, critic);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(Checkpoint::<f64>::read_from(&b"PADDPG v2\n"[..]).is_err());
        assert!(Checkpoint::<f64>::read_from(&b"PADDPG v1\nw 2 2\n1 2 3\n"[..]).is_err());
        assert!(Checkpoint::<f64>::read_from(&b"PADDPG v1\nw 1 1\nabc\n"[..]).is_err());
        assert!(Checkpoint::<f64>::read_from(&b"PADDPG v1\nw 1 1\nNaN\n"[..]).is_err());
        let partial = Checkpoint::<f64>::read_from(&b"PADDPG v1\nobserver.weight 1 1\n1\n"[..]).unwrap();
        assert!(ActorNetwork::from_checkpoint(&partial).is_err());
    }
}
