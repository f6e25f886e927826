//! ADAM with bias correction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_learning_rate(learning_rate: T) -> Self {
        Self { learning_rate, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let unit = |b: T| b > T::zero() && b < T::one();
        if !(self.learning_rate > T::zero()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config("ADAM moments must lie in (0, 1)".into()));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::Config("ADAM epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Moment estimates for one ordered list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    config: AdamConfig<T>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Creates zeroed moments shaped like `params`.
    pub fn new(config: AdamConfig<T>, params: &[&Tensor<T>]) -> Result<Self> {
        config.validate()?;
        let m: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        Ok(Self { config, v: m.clone(), m, t: 0 })
    }

    pub fn config(&self) -> &AdamConfig<T> {
        &self.config
    }

    /// Number of completed optimizer steps.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    /// Applies one bias-corrected update to every parameter, then zeroes the
    /// gradients. Fails before touching anything if a gradient is missing or
    /// shapes changed, and afterwards if any parameter became non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.grad().is_none() {
                return Err(Error::State(format!("parameter {i} has no gradient")));
            }
            if p.len() != self.m[i].len() {
                return Err(Error::State(format!(
                    "parameter {i} has {} elements, moments have {}",
                    p.len(),
                    self.m[i].len()
                )));
            }
        }

        self.t += 1;
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let one = T::one();

        for (i, p) in params.iter_mut().enumerate() {
            let (values, grad) = p.value_and_grad_mut();
            let grad = grad.expect("checked above");
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..values.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                values[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                grad[j] = T::zero();
            }
            p.check_finite(&format!("parameter {i} after ADAM step {}", self.t))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: f64, g: f64) -> Tensor<f64> {
        let mut p = Tensor::scalar(v).into_param();
        p.accumulate_grad(&[g]).unwrap();
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = param(1.0, 1.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]).unwrap();
        st.step(&mut [&mut p]).unwrap();
        let expected = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert_eq!(p.grad().unwrap(), &[0.0]);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn two_steps_against_hand_oracle() {
        // gradients 1 then -0.5 from p = 1, values from 30-digit arithmetic
        let mut p = param(1.0, 1.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]).unwrap();
        st.step(&mut [&mut p]).unwrap();
        assert!((p.data()[0] - 0.99900000000999999990).abs() < 1e-12);
        p.accumulate_grad(&[-0.5]).unwrap();
        st.step(&mut [&mut p]).unwrap();
        assert!((p.data()[0] - 0.99873366297370902967).abs() < 1e-12);
        assert!((st.first_moments()[0][0] - 0.04).abs() < 1e-15);
        assert!((st.second_moments()[0][0] - 0.001249).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut p = param(0.7, 0.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]).unwrap();
        st.step(&mut [&mut p]).unwrap();
        st.step(&mut [&mut p]).unwrap();
        assert_eq!(p.data()[0], 0.7);
        assert_eq!(st.steps(), 2);
    }

    #[test]
    fn missing_gradient_is_state_error() {
        let mut p = Tensor::<f64>::scalar(1.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]).unwrap();
        assert!(matches!(st.step(&mut [&mut p]), Err(Error::State(_))));
        assert_eq!(st.steps(), 0);
    }

    #[test]
    fn rejects_bad_config() {
        let p = Tensor::<f64>::scalar(1.0);
        let bad = AdamConfig { beta1: 1.0, ..AdamConfig::default() };
        assert!(AdamState::new(bad, &[&p]).is_err());
        assert!(AdamState::new(AdamConfig::with_learning_rate(0.0), &[&p]).is_err());
    }

    #[test]
    fn nan_gradient_fails_fast() {
        let mut p = param(1.0, f64::NAN);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]).unwrap();
        assert!(matches!(st.step(&mut [&mut p]), Err(Error::NonFinite(_))));
    }
}
