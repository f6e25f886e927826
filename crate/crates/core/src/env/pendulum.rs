//! Inverted pendulum swing-up with the constants, dynamics and reward of the
//! classic `Pendulum-v0` benchmark.
//!
//! `θ = 0` is upright. Observation `(cos θ, sin θ, θ̇)`, torque `u = 2·a` for
//! a normalised action `a`, step cost `wrap(θ)² + 0.1·θ̇² + 0.001·u²`
//! evaluated on the pre-step state. The episode only ends at the horizon.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_unit, Environment, StepResult};
use crate::error::Result;
use crate::scalar::Scalar;

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;

/// Maps an angle to `[-π, π)`.
pub fn wrap_angle<T: Scalar>(theta: T) -> T {
    let pi = T::lit(PI);
    let two_pi = pi + pi;
    let r = (theta + pi) % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    r - pi
}

#[derive(Debug, Clone)]
pub struct PendulumEnv<T> {
    theta: T,
    theta_dot: T,
    steps: usize,
    horizon: usize,
    substeps: usize,
    clipped: u64,
}

impl<T: Scalar> Default for PendulumEnv<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> PendulumEnv<T> {
    pub fn new() -> Self {
        Self {
            theta: T::zero(),
            theta_dot: T::zero(),
            steps: 0,
            horizon: 200,
            substeps: 1,
            clipped: 0,
        }
    }

    /// Splits each step into `n` integration substeps of `dt / n`. Only
    /// `n = 1` reproduces the reference dynamics; finer values exist for
    /// integrator checks.
    pub fn with_substeps(mut self, n: usize) -> Self {
        self.substeps = n.max(1);
        self
    }

    pub fn state(&self) -> (T, T) {
        (self.theta, self.theta_dot)
    }

    pub fn set_state(&mut self, theta: T, theta_dot: T) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
    }

    pub fn observation(&self) -> Vec<T> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    /// Mechanical energy of the uniform rod, zero potential at the pivot.
    pub fn energy(&self) -> T {
        let (m, l, g) = (T::lit(MASS), T::lit(LENGTH), T::lit(GRAVITY));
        let half = T::lit(0.5);
        let inertia = m * l * l / T::lit(3.0);
        half * inertia * self.theta_dot * self.theta_dot + m * g * half * l * self.theta.cos()
    }
}

impl<T: Scalar> Environment<T> for PendulumEnv<T> {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn set_horizon(&mut self, horizon: usize) {
        self.horizon = horizon;
    }

    fn reset(&mut self, seed: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = T::lit(rng.random_range(-PI..PI));
        self.theta_dot = T::lit(rng.random_range(-1.0..1.0));
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[T]) -> Result<StepResult<T>> {
        let (a, clipped) = clip_unit(action, 1)?;
        self.clipped += clipped;
        let u = a[0] * T::lit(MAX_TORQUE);

        let wrapped = wrap_angle(self.theta);
        let cost = wrapped * wrapped
            + T::lit(0.1) * self.theta_dot * self.theta_dot
            + T::lit(0.001) * u * u;

        let (g, m, l) = (T::lit(GRAVITY), T::lit(MASS), T::lit(LENGTH));
        let gravity_term = T::lit(3.0) * g / (T::lit(2.0) * l);
        let torque_term = T::lit(3.0) / (m * l * l);
        let dt = T::lit(DT) / T::from_usize(self.substeps).expect("small count");
        let max_speed = T::lit(MAX_SPEED);
        for _ in 0..self.substeps {
            let new_dot = self.theta_dot + (gravity_term * self.theta.sin() + torque_term * u) * dt;
            // position uses the unclipped velocity, as in the reference implementation
            self.theta = self.theta + new_dot * dt;
            self.theta_dot = new_dot.max(-max_speed).min(max_speed);
        }

        self.steps += 1;
        let done = self.steps >= self.horizon;
        Ok(StepResult {
            obs: self.observation(),
            reward: -cost,
            done,
            truncated: done,
            step_index: self.steps,
        })
    }

    fn clipped_actions(&self) -> u64 {
        self.clipped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_at(theta: f64, theta_dot: f64) -> PendulumEnv<f64> {
        let mut env = PendulumEnv::new();
        env.set_state(theta, theta_dot);
        env
    }

    #[test]
    fn upright_fixed_point() {
        let mut env = env_at(0.0, 0.0);
        let r = env.step(&[0.0]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(env.state(), (0.0, 0.0));
        assert_eq!(r.obs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn hanging_stays_hanging() {
        let mut env = env_at(PI, 0.0);
        let r = env.step(&[0.0]).unwrap();
        // sin(π) is 1.2e-16 in floating point
        let (th, thd) = env.state();
        assert!(thd.abs() < 1e-15);
        assert!((th - PI).abs() < 1e-15);
        assert!((r.reward + PI * PI).abs() < 1e-12);
    }

    #[test]
    fn horizontal_release() {
        let mut env = env_at(PI / 2.0, 0.0);
        env.step(&[0.0]).unwrap();
        let (th, thd) = env.state();
        assert!((thd - 0.75).abs() < 1e-15);
        assert!((th - (PI / 2.0 + 0.0375)).abs() < 1e-15);
    }

    #[test]
    fn speed_is_clipped_and_torque_scaled() {
        let mut env = env_at(PI / 2.0, 7.9);
        let r = env.step(&[1.0]).unwrap();
        assert_eq!(env.state().1, 8.0);
        let expected = (PI / 2.0f64).powi(2) + 0.1 * 7.9 * 7.9 + 0.001 * 4.0;
        assert!((r.reward + expected).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_actions_are_counted() {
        let mut env = env_at(0.0, 0.0);
        let r1 = env.step(&[3.0]).unwrap();
        let mut twin = env_at(0.0, 0.0);
        let r2 = twin.step(&[1.0]).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(env.clipped_actions(), 1);
        assert_eq!(twin.clipped_actions(), 0);
        assert!(env.step(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn done_only_at_horizon() {
        let mut env = PendulumEnv::<f64>::new();
        env.set_horizon(5);
        env.reset(3);
        for i in 1..=5 {
            let r = env.step(&[0.3]).unwrap();
            assert_eq!(r.step_index, i);
            assert_eq!(r.done, i == 5);
            assert!(!r.terminal());
        }
    }

    #[test]
    fn reset_is_seeded_and_on_circle() {
        let mut a = PendulumEnv::<f64>::new();
        let mut b = PendulumEnv::<f64>::new();
        for seed in 0..50 {
            let oa = a.reset(seed);
            assert_eq!(oa, b.reset(seed));
            assert!((oa[0] * oa[0] + oa[1] * oa[1] - 1.0).abs() <= 1e-12);
            assert!(oa[2].abs() <= 1.0);
        }
    }

    #[test]
    fn wrap_range() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5f64), 0.5);
    }
}
