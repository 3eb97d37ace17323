//! Declarative non-stationarity: reward inversions, observation transforms
//! and dynamics changes, each a pure function of the global step.

use serde::{Deserialize, Serialize};

use super::cartpole::CartPoleParams;
use super::{EnvError, Palette};
use crate::approximator::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    RewardAbrupt,
    RewardGradual,
    Rotation,
    ColorSwap,
    GwSwap,
    DynamicsAbrupt,
    DynamicsGradual,
}

impl ShiftKind {
    pub fn is_reward(self) -> bool {
        matches!(self, ShiftKind::RewardAbrupt | ShiftKind::RewardGradual)
    }

    pub fn is_observation(self) -> bool {
        matches!(self, ShiftKind::Rotation | ShiftKind::ColorSwap | ShiftKind::GwSwap)
    }

    pub fn is_dynamics(self) -> bool {
        matches!(self, ShiftKind::DynamicsAbrupt | ShiftKind::DynamicsGradual)
    }
}

/// What a dynamics shift changes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsPreset {
    /// Force magnitude moves between `force_from` and `force_to`.
    Force,
    /// Toggles to pole length 1.0, cart mass 2.0 and a sign-inverted force.
    Break,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftComponent {
    pub kind: ShiftKind,
    /// Steps per phase.
    pub interval: u64,
    /// Shift once at `interval` and stay shifted instead of alternating.
    #[serde(default)]
    pub single: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsPreset>,
    #[serde(default = "default_force_from")]
    pub force_from: f64,
    #[serde(default = "default_force_to")]
    pub force_to: f64,
}

fn default_force_from() -> f64 {
    20.0
}

fn default_force_to() -> f64 {
    5.0
}

impl ShiftComponent {
    pub fn new(kind: ShiftKind, interval: u64) -> Self {
        Self {
            kind,
            interval,
            single: false,
            dynamics: None,
            force_from: default_force_from(),
            force_to: default_force_to(),
        }
    }

    pub fn single(mut self) -> Self {
        self.single = true;
        self
    }

    pub fn with_dynamics(mut self, preset: DynamicsPreset) -> Self {
        self.dynamics = Some(preset);
        self
    }

    /// Whether the shifted regime is in effect at step `t`.
    pub fn shifted(&self, t: u64) -> bool {
        let phase = t / self.interval;
        if self.single {
            phase >= 1
        } else {
            phase % 2 == 1
        }
    }

    /// Position on the gradual ramp: 0 at the start, 1 at full shift.
    fn ramp(&self, t: u64) -> f64 {
        let n = self.interval as f64;
        if self.single {
            return (t as f64 / n).min(1.0);
        }
        let pos = (t % (2 * self.interval)) as f64 / n;
        if pos <= 1.0 {
            pos
        } else {
            2.0 - pos
        }
    }
}

/// Reward multiplier of one reward component: a square wave for abrupt
/// shifts, a triangle wave of period `2n` for gradual ones. Non-reward
/// components return 1.
pub fn reward_multiplier(t: u64, component: &ShiftComponent) -> f64 {
    match component.kind {
        ShiftKind::RewardAbrupt => {
            if component.shifted(t) {
                -1.0
            } else {
                1.0
            }
        }
        ShiftKind::RewardGradual => 1.0 - 2.0 * component.ramp(t),
        _ => 1.0,
    }
}

/// Effective cart-pole parameters under one dynamics component.
pub fn schedule_dynamics(t: u64, component: &ShiftComponent, base: &CartPoleParams) -> CartPoleParams {
    let mut p = base.clone();
    let preset = component.dynamics.unwrap_or(DynamicsPreset::Force);
    match (component.kind, preset) {
        (ShiftKind::DynamicsAbrupt, DynamicsPreset::Break) => {
            if component.shifted(t) {
                p.pole_half_length = 1.0;
                p.mass_cart = 2.0;
                p.force_mag = -base.force_mag.abs();
            }
        }
        (ShiftKind::DynamicsAbrupt, DynamicsPreset::Force) => {
            p.force_mag = if component.shifted(t) {
                component.force_to
            } else {
                component.force_from
            };
        }
        (ShiftKind::DynamicsGradual, DynamicsPreset::Force) => {
            let r = component.ramp(t);
            p.force_mag = component.force_from + (component.force_to - component.force_from) * r;
        }
        (ShiftKind::DynamicsGradual, DynamicsPreset::Break) => {
            let r = component.ramp(t);
            let alt_force = -base.force_mag.abs();
            p.pole_half_length = base.pole_half_length + (1.0 - base.pole_half_length) * r;
            p.mass_cart = base.mass_cart + (2.0 - base.mass_cart) * r;
            p.force_mag = base.force_mag + (alt_force - base.force_mag) * r;
        }
        _ => {}
    }
    p
}

/// 90 degree rotation of a square `[H, H, C]` image: pixel `(i, j)` moves to `(j, H-1-i)`.
pub fn rotate90(obs: &Tensor) -> Result<Tensor, EnvError> {
    let (h, c) = square_dims(obs)?;
    let src = obs.data();
    let mut out = vec![0.0; src.len()];
    for i in 0..h {
        for j in 0..h {
            let from = (i * h + j) * c;
            let to = (j * h + (h - 1 - i)) * c;
            out[to..to + c].copy_from_slice(&src[from..from + c]);
        }
    }
    Ok(Tensor::new(obs.shape().to_vec(), out)?)
}

fn square_dims(obs: &Tensor) -> Result<(usize, usize), EnvError> {
    match obs.shape() {
        [h, w, c] if h == w => Ok((*h, *c)),
        s => Err(EnvError::NonSquare(s.to_vec())),
    }
}

fn recolor(obs: &Tensor, pairs: &[([f64; 3], [f64; 3])]) -> Result<Tensor, EnvError> {
    let (_, c) = square_dims(obs)?;
    if c != 3 {
        return Err(EnvError::NonSquare(obs.shape().to_vec()));
    }
    let mut out = obs.clone();
    for px in out.data_mut().chunks_mut(3) {
        if let Some((_, to)) = pairs.iter().find(|(from, _)| px == from) {
            px.copy_from_slice(to);
        }
    }
    Ok(out)
}

/// Ordered collection of shift components.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftSchedule {
    pub components: Vec<ShiftComponent>,
}

impl ShiftSchedule {
    pub fn stationary() -> Self {
        Self::default()
    }

    pub fn new(components: Vec<ShiftComponent>) -> Self {
        Self { components }
    }

    /// Product of all reward components' multipliers.
    pub fn reward_multiplier(&self, t: u64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.kind.is_reward())
            .map(|c| reward_multiplier(t, c))
            .product()
    }

    pub fn dynamics(&self, t: u64, base: &CartPoleParams) -> CartPoleParams {
        self.components
            .iter()
            .filter(|c| c.kind.is_dynamics())
            .fold(base.clone(), |p, c| schedule_dynamics(t, c, &p))
    }

    /// Applies every active observation component in declaration order.
    pub fn transform_observation(
        &self,
        obs: &Tensor,
        t: u64,
        palette: &Palette,
        swap_palette: &Palette,
    ) -> Result<Tensor, EnvError> {
        square_dims(obs)?;
        let mut out = obs.clone();
        for c in self.components.iter().filter(|c| c.kind.is_observation()) {
            if !c.shifted(t) {
                continue;
            }
            out = match c.kind {
                ShiftKind::Rotation => rotate90(&out)?,
                ShiftKind::ColorSwap => recolor(
                    &out,
                    &[
                        (palette.background, swap_palette.background),
                        (palette.green, swap_palette.green),
                        (palette.red, swap_palette.red),
                    ],
                )?,
                ShiftKind::GwSwap => recolor(
                    &out,
                    &[
                        (palette.green, palette.background),
                        (palette.background, palette.green),
                    ],
                )?,
                _ => unreachable!("filtered to observation shifts"),
            };
        }
        Ok(out)
    }

    /// First step at which any component leaves its initial regime.
    pub fn first_shift_step(&self) -> Option<u64> {
        self.components.iter().map(|c| c.interval).min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abrupt(n: u64) -> ShiftComponent {
        ShiftComponent::new(ShiftKind::RewardAbrupt, n)
    }

    fn gradual(n: u64) -> ShiftComponent {
        ShiftComponent::new(ShiftKind::RewardGradual, n)
    }

    #[test]
    fn abrupt_square_wave() {
        let c = abrupt(1_000_000);
        assert_eq!(reward_multiplier(0, &c), 1.0);
        assert_eq!(reward_multiplier(500_000, &c), 1.0);
        assert_eq!(reward_multiplier(1_500_000, &c), -1.0);
        assert_eq!(reward_multiplier(2_000_000, &c), 1.0);
    }

    #[test]
    fn gradual_triangle_wave() {
        for n in [10, 1000, 100_000] {
            let c = gradual(n);
            assert_eq!(reward_multiplier(0, &c), 1.0);
            assert!(reward_multiplier(n / 2, &c).abs() < 1e-12);
            assert_eq!(reward_multiplier(n, &c), -1.0);
            assert_eq!(reward_multiplier(2 * n, &c), 1.0);
        }
    }

    #[test]
    fn single_shift_stays() {
        let c = abrupt(100).single();
        assert_eq!(reward_multiplier(99, &c), 1.0);
        assert_eq!(reward_multiplier(100, &c), -1.0);
        assert_eq!(reward_multiplier(250, &c), -1.0);
    }

    #[test]
    fn dynamics_force_schedules() {
        let base = CartPoleParams::default();
        let g = ShiftComponent::new(ShiftKind::DynamicsGradual, 1_000_000);
        assert_eq!(schedule_dynamics(0, &g, &base).force_mag, 20.0);
        assert_eq!(schedule_dynamics(500_000, &g, &base).force_mag, 12.5);
        assert_eq!(schedule_dynamics(1_000_000, &g, &base).force_mag, 5.0);
        assert_eq!(schedule_dynamics(2_000_000, &g, &base), schedule_dynamics(0, &g, &base));
        let a = ShiftComponent::new(ShiftKind::DynamicsAbrupt, 1_000_000);
        assert_eq!(schedule_dynamics(0, &a, &base).force_mag, 20.0);
        assert_eq!(schedule_dynamics(1_000_000, &a, &base).force_mag, 5.0);
        assert_eq!(schedule_dynamics(2_000_000, &a, &base).force_mag, 20.0);
    }

    #[test]
    fn break_preset_toggles() {
        let base = CartPoleParams::default();
        let b = ShiftComponent::new(ShiftKind::DynamicsAbrupt, 500_000).with_dynamics(DynamicsPreset::Break);
        assert_eq!(schedule_dynamics(0, &b, &base), base);
        let alt = schedule_dynamics(500_000, &b, &base);
        assert_eq!(alt.pole_half_length, 1.0);
        assert_eq!(alt.mass_cart, 2.0);
        assert_eq!(alt.force_mag, -10.0);
        assert_eq!(schedule_dynamics(1_000_000, &b, &base), base);
    }

    #[test]
    fn rotation_moves_corner() {
        let h = 11;
        let mut obs = Tensor::zeros(vec![h, h, 3]);
        obs.data_mut()[0] = 1.0;
        let r = rotate90(&obs).unwrap();
        assert_eq!(r.data()[(h - 1) * 3], 1.0);
        assert_eq!(r.data().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn non_square_rejected() {
        let obs = Tensor::zeros(vec![3, 4, 3]);
        let s = ShiftSchedule::stationary();
        let p = Palette::default();
        assert!(s.transform_observation(&obs, 0, &p, &Palette::swapped()).is_err());
    }
}
