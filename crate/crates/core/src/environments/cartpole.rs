//! Infinite-horizon cart-pole.
//!
//! The cart is clamped to the track (velocity zeroed at the edges) and the
//! pole is reset upright when it falls past the angle threshold. There is no
//! terminal state.

use serde::{Deserialize, Serialize};

use super::{EnvError, ShiftSchedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length.
    pub pole_half_length: f64,
    /// Signed: a negative value inverts the push direction.
    pub force_mag: f64,
    pub position_bound: f64,
    pub tau: f64,
    pub drop_angle_deg: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            pole_half_length: 0.5,
            force_mag: 10.0,
            position_bound: 2.4,
            tau: 0.02,
            drop_angle_deg: 12.0,
        }
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.gravity > 0.0 && self.mass_cart > 0.0 && self.mass_pole > 0.0) {
            return Err(EnvError::Config("gravity and masses must be positive".into()));
        }
        if self.force_mag == 0.0 || !self.force_mag.is_finite() {
            return Err(EnvError::Config("force magnitude must be non-zero".into()));
        }
        if !(self.position_bound > 0.0 && self.tau > 0.0 && self.pole_half_length > 0.0) {
            return Err(EnvError::Config("bound, timestep and pole length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    /// Radians.
    pub theta: f64,
    pub theta_dot: f64,
    pub t: u64,
}

impl CartPoleState {
    pub fn observation(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    fn is_finite(&self) -> bool {
        self.observation().iter().all(|v| v.is_finite())
    }
}

/// `1 - 11.52 x^2 - theta^2 / 288` with `theta` in degrees.
pub fn cartpole_reward(x: f64, theta_deg: f64) -> f64 {
    1.0 - 11.52 * x * x - theta_deg * theta_deg / 288.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Push {
    Left,
    Right,
}

impl Push {
    pub fn from_index(a: usize) -> Option<Push> {
        match a {
            0 => Some(Push::Left),
            1 => Some(Push::Right),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CartPoleStep {
    pub observation: [f64; 4],
    pub reward: f64,
    pub pole_dropped: bool,
}

/// One Euler step under the parameters the schedule prescribes at `state.t`.
pub fn cartpole_step(
    state: &mut CartPoleState,
    action: Push,
    base: &CartPoleParams,
    schedule: &ShiftSchedule,
) -> Result<CartPoleStep, EnvError> {
    if !state.is_finite() {
        return Err(EnvError::NonFinite);
    }
    let p = schedule.dynamics(state.t, base);
    let force = match action {
        Push::Right => p.force_mag,
        Push::Left => -p.force_mag,
    };
    let total_mass = p.mass_cart + p.mass_pole;
    let pole_mass_length = p.mass_pole * p.pole_half_length;
    let (sin, cos) = state.theta.sin_cos();
    let temp = (force + pole_mass_length * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc = (p.gravity * sin - cos * temp)
        / (p.pole_half_length * (4.0 / 3.0 - p.mass_pole * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

    state.x += p.tau * state.x_dot;
    state.x_dot += p.tau * x_acc;
    state.theta += p.tau * state.theta_dot;
    state.theta_dot += p.tau * theta_acc;

    if state.x > p.position_bound {
        state.x = p.position_bound;
        state.x_dot = 0.0;
    } else if state.x < -p.position_bound {
        state.x = -p.position_bound;
        state.x_dot = 0.0;
    }

    let theta_deg = state.theta.to_degrees();
    let reward = cartpole_reward(state.x, theta_deg);
    let pole_dropped = theta_deg.abs() > p.drop_angle_deg;
    if pole_dropped {
        state.theta = 0.0;
        state.theta_dot = 0.0;
    }
    state.t += 1;
    if !state.is_finite() {
        return Err(EnvError::NonFinite);
    }
    Ok(CartPoleStep {
        observation: state.observation(),
        reward,
        pole_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{DynamicsPreset, ShiftComponent, ShiftKind};

    fn state(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> CartPoleState {
        CartPoleState {
            x,
            x_dot,
            theta,
            theta_dot,
            t: 0,
        }
    }

    #[test]
    fn reward_formula_points() {
        assert_eq!(cartpole_reward(0.0, 0.0), 1.0);
        assert_eq!(cartpole_reward(0.0, 12.0), 0.5);
        let x = (0.5f64 / 11.52).sqrt();
        assert!(cartpole_reward(x, 12.0).abs() < 1e-12);
    }

    #[test]
    fn edge_clamps_velocity() {
        let p = CartPoleParams::default();
        let mut s = state(p.position_bound, 1.0, 0.0, 0.0);
        cartpole_step(&mut s, Push::Right, &p, &ShiftSchedule::stationary()).unwrap();
        assert_eq!(s.x, p.position_bound);
        assert_eq!(s.x_dot, 0.0);
    }

    #[test]
    fn mirror_symmetry() {
        let p = CartPoleParams::default();
        let sched = ShiftSchedule::stationary();
        let mut a = state(0.1, -0.2, 0.03, 0.4);
        let mut b = state(-0.1, 0.2, -0.03, -0.4);
        cartpole_step(&mut a, Push::Left, &p, &sched).unwrap();
        cartpole_step(&mut b, Push::Right, &p, &sched).unwrap();
        for (u, v) in a.observation().iter().zip(b.observation()) {
            assert!((u + v).abs() < 1e-15);
        }
    }

    #[test]
    fn inverted_force_reverses_push() {
        let p = CartPoleParams::default();
        let sched = ShiftSchedule::new(vec![
            ShiftComponent::new(ShiftKind::DynamicsAbrupt, 10).with_dynamics(DynamicsPreset::Break)
        ]);
        let mut before = state(0.0, 0.0, 0.0, 0.0);
        let mut after = state(0.0, 0.0, 0.0, 0.0);
        after.t = 10;
        for _ in 0..2 {
            cartpole_step(&mut before, Push::Right, &p, &sched).unwrap();
            cartpole_step(&mut after, Push::Right, &p, &sched).unwrap();
        }
        assert!(before.x > 0.0);
        assert!(after.x < 0.0);
    }

    #[test]
    fn dropped_pole_resets_but_cart_persists() {
        let p = CartPoleParams::default();
        let mut s = state(0.2, 0.3, 0.25, 2.0);
        let out = cartpole_step(&mut s, Push::Left, &p, &ShiftSchedule::stationary()).unwrap();
        assert!(out.pole_dropped);
        assert!(out.reward < 0.0);
        assert_eq!((s.theta, s.theta_dot), (0.0, 0.0));
        assert!(s.x != 0.0);
    }

    #[test]
    fn non_finite_state_errors() {
        let p = CartPoleParams::default();
        let mut s = state(f64::NAN, 0.0, 0.0, 0.0);
        assert!(cartpole_step(&mut s, Push::Left, &p, &ShiftSchedule::stationary()).is_err());
    }
}
