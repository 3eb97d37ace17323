//! Non-stationary infinite-horizon environments.

pub mod cartpole;
pub mod grid;
mod schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approximator::{NetError, Tensor};

pub use cartpole::{cartpole_reward, cartpole_step, CartPoleParams, CartPoleState, Push};
pub use grid::{grid_reset, grid_step, GridConfig, GridState, Item, Move};
pub use schedule::{
    reward_multiplier, rotate90, schedule_dynamics, DynamicsPreset, ShiftComponent, ShiftKind,
    ShiftSchedule,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("observation must be square [H, H, C], got {0:?}")]
    NonSquare(Vec<usize>),
    #[error("invalid action {0}")]
    InvalidAction(usize),
    #[error("environment state became non-finite")]
    NonFinite,
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] NetError),
}

/// Background and item colors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Palette {
    pub background: [f64; 3],
    pub green: [f64; 3],
    pub red: [f64; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [1.0, 1.0, 1.0],
            green: [0.0, 1.0, 0.0],
            red: [1.0, 0.0, 0.0],
        }
    }
}

impl Palette {
    /// Replacement colors used by the color-swap shift.
    pub fn swapped() -> Self {
        Self {
            background: [0.0, 0.0, 0.0],
            green: [1.0, 0.0, 1.0],
            red: [0.0, 1.0, 1.0],
        }
    }

    pub fn is_distinct(&self) -> bool {
        self.background != self.green && self.background != self.red && self.green != self.red
    }
}

#[derive(Clone, Debug)]
pub struct EnvStep {
    pub observation: Tensor,
    pub reward: f64,
    pub item: Option<Item>,
}

/// A single infinite-horizon environment instance.
pub trait Environment {
    /// Per-sample observation shape.
    fn observation_shape(&self) -> Vec<usize>;
    fn num_actions(&self) -> usize;
    fn observation(&self) -> &Tensor;
    fn step(&mut self, action: usize) -> Result<EnvStep, EnvError>;
    /// Steps taken so far.
    fn t(&self) -> u64;
}

pub struct GridEnv {
    config: GridConfig,
    schedule: ShiftSchedule,
    state: GridState,
    current: Tensor,
}

impl GridEnv {
    pub fn new(config: GridConfig, schedule: ShiftSchedule, seed: u64) -> Result<Self, EnvError> {
        config.validate()?;
        let (state, current) = grid_reset(&config, seed, &schedule)?;
        Ok(Self {
            config,
            schedule,
            state,
            current,
        })
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }
}

impl Environment for GridEnv {
    fn observation_shape(&self) -> Vec<usize> {
        let s = self.config.side();
        vec![s, s, 3]
    }

    fn num_actions(&self) -> usize {
        Move::ALL.len()
    }

    fn observation(&self) -> &Tensor {
        &self.current
    }

    fn step(&mut self, action: usize) -> Result<EnvStep, EnvError> {
        let m = Move::from_index(action).ok_or(EnvError::InvalidAction(action))?;
        let out = grid_step(&mut self.state, m, &self.config, &self.schedule)?;
        self.current = out.observation.clone();
        Ok(EnvStep {
            observation: out.observation,
            reward: out.reward,
            item: out.collected,
        })
    }

    fn t(&self) -> u64 {
        self.state.t
    }
}

pub struct CartPoleEnv {
    params: CartPoleParams,
    schedule: ShiftSchedule,
    state: CartPoleState,
    current: Tensor,
}

impl CartPoleEnv {
    /// Starts from a small uniform perturbation of the upright rest state.
    pub fn new(params: CartPoleParams, schedule: ShiftSchedule, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.gen_range(-0.05..0.05);
        let state = CartPoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
            t: 0,
        };
        let current = Tensor::new(vec![4], state.observation().to_vec())?;
        Ok(Self {
            params,
            schedule,
            state,
            current,
        })
    }

    pub fn state(&self) -> &CartPoleState {
        &self.state
    }
}

impl Environment for CartPoleEnv {
    fn observation_shape(&self) -> Vec<usize> {
        vec![4]
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn observation(&self) -> &Tensor {
        &self.current
    }

    fn step(&mut self, action: usize) -> Result<EnvStep, EnvError> {
        let push = Push::from_index(action).ok_or(EnvError::InvalidAction(action))?;
        let out = cartpole_step(&mut self.state, push, &self.params, &self.schedule)?;
        self.current = Tensor::new(vec![4], out.observation.to_vec())?;
        Ok(EnvStep {
            observation: self.current.clone(),
            reward: out.reward,
            item: None,
        })
    }

    fn t(&self) -> u64 {
        self.state.t
    }
}
