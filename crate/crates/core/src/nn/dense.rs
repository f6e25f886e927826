use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Fully connected layer `y = act(x·W + b)` with `W: in×out`, `b: 1×out`.
///
/// With weight normalisation enabled the stored `weight` is a direction `v`
/// and each column of the effective matrix is `g_j · v_j / ‖v_j‖`, where the
/// per-column magnitudes `g` are learnable too.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    weight: Tensor<T>,
    gain: Option<Tensor<T>>,
    bias: Tensor<T>,
    activation: Activation,
}

fn column_norms<T: Scalar>(w: &Tensor<T>) -> Vec<T> {
    let (r, c) = w.shape();
    let mut norms = vec![T::zero(); c];
    for i in 0..r {
        for (n, &x) in norms.iter_mut().zip(w.row(i)) {
            *n += x * x;
        }
    }
    norms.iter_mut().for_each(|n| *n = n.sqrt());
    norms
}

impl<T: Scalar> DenseLayer<T> {
    /// Uniform initialisation in `±scale/√in` for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let bound = scale / (inputs as f64).sqrt();
        let mut sample = |n: usize| -> Vec<T> {
            (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect()
        };
        let weight = Tensor::from_vec(inputs, outputs, sample(inputs * outputs))
            .expect("positive layer dimensions");
        let bias = Tensor::from_vec(1, outputs, sample(outputs)).expect("positive layer dimensions");
        Self::from_parts(weight, None, bias, activation).expect("consistent shapes")
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self::from_parts(Tensor::zeros(inputs, outputs), None, Tensor::zeros(1, outputs), activation)
            .expect("consistent shapes")
    }

    /// Assembles a layer from explicit tensors; all become learnable.
    pub fn from_parts(
        weight: Tensor<T>,
        gain: Option<Tensor<T>>,
        bias: Tensor<T>,
        activation: Activation,
    ) -> Result<Self> {
        let out = weight.cols();
        if bias.shape() != (1, out) {
            return Err(Error::Shape(format!(
                "bias {:?} does not match {} outputs",
                bias.shape(),
                out
            )));
        }
        if let Some(g) = &gain {
            if g.shape() != (1, out) {
                return Err(Error::Shape(format!(
                    "gain {:?} does not match {} outputs",
                    g.shape(),
                    out
                )));
            }
        }
        Ok(Self {
            weight: weight.into_param(),
            gain: gain.map(Tensor::into_param),
            bias: bias.into_param(),
            activation,
        })
    }

    /// Switches to the magnitude/direction parameterisation without changing
    /// the function the layer computes.
    pub fn with_weight_norm(mut self) -> Result<Self> {
        if self.gain.is_none() {
            let norms = column_norms(&self.weight);
            let gain = Tensor::from_vec(1, norms.len(), norms)?;
            self.gain = Some(gain.into_param());
        }
        self.weight_normalise()?;
        Ok(self)
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn is_weight_normalised(&self) -> bool {
        self.gain.is_some()
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weight
    }

    pub fn gain(&self) -> Option<&Tensor<T>> {
        self.gain.as_ref()
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Tensor<T> {
        &mut self.bias
    }

    /// The matrix actually multiplied with the input.
    pub fn effective_weight(&self) -> Result<Tensor<T>> {
        let Some(gain) = &self.gain else {
            return Ok(self.weight.detached());
        };
        let norms = column_norms(&self.weight);
        if let Some(j) = norms.iter().position(|n| *n == T::zero()) {
            return Err(Error::ZeroNorm(format!("weight column {j} has zero norm")));
        }
        let (r, c) = self.weight.shape();
        let mut data = self.weight.data().to_vec();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] = data[i * c + j] * (gain.data()[j] / norms[j]);
            }
        }
        Tensor::from_vec(r, c, data)
    }

    /// Rescales every direction column to unit norm. The effective weight is
    /// unchanged up to rounding. Layers without weight normalisation are
    /// converted first.
    pub fn weight_normalise(&mut self) -> Result<()> {
        if self.gain.is_none() {
            let norms = column_norms(&self.weight);
            self.gain = Some(Tensor::from_vec(1, norms.len(), norms)?.into_param());
        }
        let norms = column_norms(&self.weight);
        if let Some(j) = norms.iter().position(|n| !(*n > T::zero()) || !n.is_finite()) {
            return Err(Error::ZeroNorm(format!(
                "cannot normalise weight column {j} with norm {}",
                norms[j]
            )));
        }
        let c = self.weight.cols();
        for (i, w) in self.weight.data_mut().iter_mut().enumerate() {
            *w = *w / norms[i % c];
        }
        Ok(())
    }

    /// Records the layer on `tape`. Parameters are registered as gradient
    /// leaves (and appended to `binding` in [`Self::params`] order) when a
    /// binding is given, otherwise as constants.
    pub fn forward(&self, tape: &mut Tape<T>, x: Var, binding: Option<&mut Vec<Var>>) -> Result<Var> {
        let in_width = tape.value(x).cols();
        if in_width != self.inputs() {
            return Err(Error::Shape(format!(
                "layer expects {} inputs, got {in_width}",
                self.inputs()
            )));
        }
        if binding.is_none() {
            let w = tape.constant(self.effective_weight()?)?;
            let b = tape.constant(self.bias.detached())?;
            let xw = tape.matmul(x, w)?;
            let y = tape.add(xw, b)?;
            return self.activation.apply(tape, y);
        }
        let register = |tape: &mut Tape<T>, t: &Tensor<T>, binding: &mut Option<&mut Vec<Var>>| {
            match binding {
                Some(b) => {
                    let v = tape.param(t)?;
                    b.push(v);
                    Ok::<Var, Error>(v)
                }
                None => tape.constant(t.detached()),
            }
        };
        let mut binding = binding;
        let v = register(tape, &self.weight, &mut binding)?;
        let w = match &self.gain {
            Some(g) => {
                let g = register(tape, g, &mut binding)?;
                let sq = tape.square(v)?;
                let ss = tape.sum_rows(sq)?;
                let norm = tape.sqrt(ss)?;
                let ratio = tape.div(g, norm)?;
                tape.mul(v, ratio)?
            }
            None => v,
        };
        let b = register(tape, &self.bias, &mut binding)?;
        let xw = tape.matmul(x, w)?;
        let y = tape.add(xw, b)?;
        self.activation.apply(tape, y)
    }

    /// Learnable tensors in registration order: weight, gain (if any), bias.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.weight];
        out.extend(self.gain.as_ref());
        out.push(&self.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.weight];
        out.extend(self.gain.as_mut());
        out.push(&mut self.bias);
        out
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![(format!("{prefix}.weight"), &self.weight)];
        if let Some(g) = &self.gain {
            out.push((format!("{prefix}.gain"), g));
        }
        out.push((format!("{prefix}.bias"), &self.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eval(layer: &DenseLayer<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone()).unwrap();
        let y = layer.forward(&mut tape, xv, None).unwrap();
        tape.value(y).clone()
    }

    fn random_input(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
        let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
        Tensor::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn forward_matches_definition() {
        let w = Tensor::from_rows(&[[1.0, -1.0], [0.5, 2.0]]).unwrap();
        let b = Tensor::from_rows(&[[0.1, 0.2]]).unwrap();
        let layer = DenseLayer::from_parts(w, None, b, Activation::Tanh).unwrap();
        let x = Tensor::from_rows(&[[1.0, 2.0]]).unwrap();
        let y = eval(&layer, &x);
        assert!((y.get(0, 0) - (1.0f64 + 1.0 + 0.1).tanh()).abs() < 1e-15);
        assert!((y.get(0, 1) - (-1.0f64 + 4.0 + 0.2).tanh()).abs() < 1e-15);
        assert_eq!(layer.parameter_count(), 2 * 2 + 2);
    }

    #[test]
    fn effective_weight_from_direction_and_gain() {
        let v = Tensor::from_rows(&[[3.0], [4.0]]).unwrap();
        let g = Tensor::scalar(5.0);
        let layer =
            DenseLayer::from_parts(v, Some(g), Tensor::zeros(1, 1), Activation::Identity).unwrap();
        assert_eq!(layer.effective_weight().unwrap().data(), &[3.0, 4.0]);
        assert_eq!(layer.parameter_count(), 2 + 1 + 1);
    }

    #[test]
    fn renormalisation_preserves_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let plain = DenseLayer::<f64>::new(5, 4, Activation::Tanh, 1.0, &mut rng);
        let mut wn = plain.clone().with_weight_norm().unwrap();
        for _ in 0..100 {
            let x = random_input(&mut rng, 3, 5);
            assert!(eval(&plain, &x).max_abs_diff(&eval(&wn, &x)) <= 1e-10);
        }
        // drift the direction away from unit norm, then renormalise twice
        wn.weight_mut().data_mut().iter_mut().for_each(|w| *w *= 3.7);
        let x = random_input(&mut rng, 8, 5);
        let before = eval(&wn, &x);
        wn.weight_normalise().unwrap();
        let once = eval(&wn, &x);
        wn.weight_normalise().unwrap();
        let twice = eval(&wn, &x);
        assert!(before.max_abs_diff(&once) <= 1e-10);
        assert!(once.max_abs_diff(&twice) <= 1e-12);
        for n in column_norms(wn.weight()) {
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_column_cannot_be_normalised() {
        let mut layer = DenseLayer::<f64>::zeros(3, 2, Activation::Identity);
        assert!(matches!(layer.weight_normalise(), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn input_width_is_checked() {
        let layer = DenseLayer::<f64>::zeros(3, 2, Activation::Identity);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(1, 4)).unwrap();
        assert!(matches!(layer.forward(&mut tape, x, None), Err(Error::Shape(_))));
    }

    #[test]
    fn binding_registers_params_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = DenseLayer::<f64>::new(2, 3, Activation::Sigmoid, 1.0, &mut rng)
            .with_weight_norm()
            .unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::filled(1, 2, 0.5)).unwrap();
        let mut binding = Vec::new();
        layer.forward(&mut tape, x, Some(&mut binding)).unwrap();
        assert_eq!(binding.len(), 3);
        for (v, p) in binding.iter().zip(layer.params()) {
            assert_eq!(tape.value(*v).data(), p.data());
            assert!(tape.requires_grad(*v));
        }
    }
}
