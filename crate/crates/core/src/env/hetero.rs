//! Planar point mass driven by two actuators with different saturating
//! response curves `f_i = c_i · tanh(s_i · u_i)`.
//!
//! Actuator 1 (x axis) is strong and nearly linear over `[-1, 1]`; actuator 2
//! (y axis) is weak and saturates early, so no single output gain suits both.
//! The mass starts at rest at the origin and must reach a target on the unit
//! circle. Observation `(tx − x, ty − y, vx, vy)`, reward
//! `−‖target − pos‖ − 0.001·‖u‖²`; the episode terminates within 0.05 of the
//! target.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clip_unit, Environment, StepResult};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeteroParams {
    /// Output ceilings `c_i`.
    pub gains: [f64; 2],
    /// Input slopes `s_i`.
    pub slopes: [f64; 2],
    pub dt: f64,
    /// Linear velocity damping per unit mass.
    pub damping: f64,
    pub success_radius: f64,
    pub control_cost: f64,
}

impl Default for HeteroParams {
    fn default() -> Self {
        Self {
            gains: [1.0, 0.4],
            slopes: [1.0, 3.0],
            dt: 0.05,
            damping: 1.0,
            success_radius: 0.05,
            control_cost: 0.001,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeteroActuatorEnv<T> {
    params: HeteroParams,
    pos: [T; 2],
    vel: [T; 2],
    target: [T; 2],
    steps: usize,
    horizon: usize,
    clipped: u64,
}

impl<T: Scalar> Default for HeteroActuatorEnv<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> HeteroActuatorEnv<T> {
    pub fn new() -> Self {
        Self::with_params(HeteroParams::default())
    }

    pub fn with_params(params: HeteroParams) -> Self {
        Self {
            params,
            pos: [T::zero(); 2],
            vel: [T::zero(); 2],
            target: [T::one(), T::zero()],
            steps: 0,
            horizon: 200,
            clipped: 0,
        }
    }

    pub fn params(&self) -> &HeteroParams {
        &self.params
    }

    pub fn target(&self) -> [T; 2] {
        self.target
    }

    pub fn position(&self) -> [T; 2] {
        self.pos
    }

    pub fn set_state(&mut self, pos: [T; 2], vel: [T; 2], target: [T; 2]) {
        self.pos = pos;
        self.vel = vel;
        self.target = target;
        self.steps = 0;
    }

    /// Forces delivered for normalised commands `u`.
    pub fn actuator_response(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .zip(self.params.gains.iter().zip(&self.params.slopes))
            .map(|(&ui, (&c, &s))| T::lit(c) * (T::lit(s) * ui).tanh())
            .collect()
    }

    pub fn distance(&self) -> T {
        let dx = self.target[0] - self.pos[0];
        let dy = self.target[1] - self.pos[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn observation(&self) -> Vec<T> {
        vec![
            self.target[0] - self.pos[0],
            self.target[1] - self.pos[1],
            self.vel[0],
            self.vel[1],
        ]
    }
}

impl<T: Scalar> Environment<T> for HeteroActuatorEnv<T> {
    fn name(&self) -> &'static str {
        "hetero2"
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn set_horizon(&mut self, horizon: usize) {
        self.horizon = horizon;
    }

    fn reset(&mut self, seed: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle: f64 = rng.random_range(-PI..PI);
        self.target = [T::lit(angle.cos()), T::lit(angle.sin())];
        self.pos = [T::zero(); 2];
        self.vel = [T::zero(); 2];
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[T]) -> Result<StepResult<T>> {
        let (u, clipped) = clip_unit(action, 2)?;
        self.clipped += clipped;
        let force = self.actuator_response(&u);
        let dt = T::lit(self.params.dt);
        let damping = T::lit(self.params.damping);
        for i in 0..2 {
            self.vel[i] = self.vel[i] + (force[i] - damping * self.vel[i]) * dt;
            self.pos[i] = self.pos[i] + self.vel[i] * dt;
        }
        self.steps += 1;

        let dist = self.distance();
        let effort: T = u.iter().map(|&x| x * x).sum();
        let reward = -dist - T::lit(self.params.control_cost) * effort;
        let reached = dist < T::lit(self.params.success_radius);
        let out_of_time = self.steps >= self.horizon;
        Ok(StepResult {
            obs: self.observation(),
            reward,
            done: reached || out_of_time,
            truncated: out_of_time && !reached,
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

    #[test]
    fn response_curves() {
        let env = HeteroActuatorEnv::<f64>::new();
        assert_eq!(env.actuator_response(&[0.0, 0.0]), vec![0.0, 0.0]);
        let f = env.actuator_response(&[1.0, 1.0]);
        assert!((f[0] - 0.7616).abs() < 5e-5);
        assert!((f[1] - 0.3980).abs() < 5e-5);
        let u = [0.37, -0.81];
        let pos = env.actuator_response(&u);
        let neg = env.actuator_response(&[-u[0], -u[1]]);
        assert_eq!(pos[0], -neg[0]);
        assert_eq!(pos[1], -neg[1]);
    }

    #[test]
    fn asymmetric_on_unit_circle() {
        let env = HeteroActuatorEnv::<f64>::new();
        let found = (0..360).any(|deg| {
            let a = (deg as f64).to_radians();
            let f = env.actuator_response(&[a.cos(), a.sin()]);
            let (m1, m2) = (f[0].abs(), f[1].abs());
            m1 > 2.0 * m2 || m2 > 2.0 * m1
        });
        assert!(found);
    }

    #[test]
    fn reset_places_target_on_unit_circle() {
        let mut env = HeteroActuatorEnv::<f64>::new();
        for seed in 0..20 {
            let o = env.reset(seed);
            assert!(((o[0] * o[0] + o[1] * o[1]).sqrt() - 1.0).abs() < 1e-12);
            assert_eq!(&o[2..], &[0.0, 0.0]);
            assert_eq!(env.position(), [0.0, 0.0]);
        }
    }

    #[test]
    fn reward_and_termination() {
        let mut env = HeteroActuatorEnv::<f64>::new();
        env.set_state([0.0, 0.0], [0.0, 0.0], [0.03, 0.0]);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert!(r.done && r.terminal());
        assert!((r.reward + 0.03).abs() < 1e-12);

        env.set_state([0.0, 0.0], [0.0, 0.0], [1.0, 0.0]);
        let r = env.step(&[1.0, 0.0]).unwrap();
        let v = 0.05 * 1.0f64.tanh();
        let expected = -(1.0 - v * 0.05) - 0.001;
        assert!((r.reward - expected).abs() < 1e-12);
        assert!(!r.done);
    }

    #[test]
    fn horizon_truncates() {
        let mut env = HeteroActuatorEnv::<f64>::new();
        env.set_horizon(3);
        env.reset(1);
        let last = (0..3).map(|_| env.step(&[0.0, 0.0]).unwrap()).last().unwrap();
        assert!(last.done && last.truncated);
    }
}
