//! Curiosity models whose prediction errors serve as intrinsic rewards and
//! change signals, and the mixing of intrinsic with extrinsic reward.

mod icm;
mod models;
mod novelty;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approximator::{NetError, Tensor};

pub use icm::{inverse_cross_entropy, latent_prediction_error, Icm, IcmLosses, IcmScores};
pub use models::{reward_intrinsic, RewardModel, RndPair};
pub use novelty::{observation_key, rollout_novelty_bonus, NoveltySignal, RolloutVisitTable};

#[derive(Debug, Error)]
pub enum ExplorationError {
    #[error("exploration.alpha + exploration.beta must not exceed 1 (alpha = {alpha}, beta = {beta})")]
    WeightSum { alpha: f64, beta: f64 },
    #[error("invalid exploration config: {0}")]
    Config(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Mixing weights `(alpha, beta)`; the extrinsic weight is `1 - alpha - beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntrinsicWeights {
    alpha: f64,
    beta: f64,
    observation_scale: f64,
    reward_scale: f64,
}

impl IntrinsicWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ExplorationError> {
        for (key, v) in [("alpha", alpha), ("beta", beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ExplorationError::Config(format!("exploration.{key} must lie in [0, 1], got {v}")));
            }
        }
        if alpha + beta > 1.0 {
            return Err(ExplorationError::WeightSum { alpha, beta });
        }
        Ok(Self {
            alpha,
            beta,
            observation_scale: 1.0,
            reward_scale: 1.0,
        })
    }

    pub fn extrinsic_only() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            observation_scale: 1.0,
            reward_scale: 1.0,
        }
    }

    /// Multiplier applied to the observation-model error before mixing.
    pub fn with_observation_scale(mut self, scale: f64) -> Result<Self, ExplorationError> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(ExplorationError::Config(format!(
                "exploration.observation_scale must be non-negative, got {scale}"
            )));
        }
        self.observation_scale = scale;
        Ok(self)
    }

    /// Multiplier applied to the reward-model error before mixing.
    pub fn with_reward_scale(mut self, scale: f64) -> Result<Self, ExplorationError> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(ExplorationError::Config(format!("exploration.reward_scale must be non-negative, got {scale}")));
        }
        self.reward_scale = scale;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        1.0 - self.alpha - self.beta
    }

    pub fn observation_scale(&self) -> f64 {
        self.observation_scale
    }

    pub fn reward_scale(&self) -> f64 {
        self.reward_scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedReward {
    pub observation: f64,
    pub reward_model: f64,
    pub extrinsic: f64,
    pub combined: f64,
}

/// `alpha r_s + beta r_r + lambda r_e`. Zero-weight terms are skipped so that
/// `alpha = beta = 0` returns the extrinsic reward bit for bit.
pub fn mix(w: &IntrinsicWeights, r_s: f64, r_r: f64, r_e: f64) -> MixedReward {
    let mut combined = w.lambda() * r_e;
    if w.alpha != 0.0 {
        combined += w.alpha * r_s;
    }
    if w.beta != 0.0 {
        combined += w.beta * r_r;
    }
    MixedReward {
        observation: r_s,
        reward_model: r_r,
        extrinsic: r_e,
        combined,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationKind {
    #[default]
    None,
    Icm,
    Rnd,
    Ride,
    Noveld,
}

impl ExplorationKind {
    /// Whether the bonus depends on the per-rollout visit table.
    pub fn is_rollout_scoped(self) -> bool {
        matches!(self, ExplorationKind::Ride | ExplorationKind::Noveld)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    pub kind: ExplorationKind,
    pub alpha: f64,
    pub beta: f64,
    /// Calibrates the observation-model error against the extrinsic reward range.
    pub observation_scale: f64,
    pub reward_scale: f64,
    pub learning_rate: f64,
    /// Passes over each rollout per update phase (on-policy agents).
    pub epochs: usize,
    pub minibatch_size: usize,
    /// NovelD discount on the novelty of the departing state.
    pub noveld_scale: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            kind: ExplorationKind::None,
            alpha: 0.0,
            beta: 0.0,
            observation_scale: 1.0,
            reward_scale: 1.0,
            learning_rate: 1e-3,
            epochs: 1,
            minibatch_size: 64,
            noveld_scale: 0.5,
        }
    }
}

impl ExplorationConfig {
    pub fn weights(&self) -> Result<IntrinsicWeights, ExplorationError> {
        IntrinsicWeights::new(self.alpha, self.beta)?
            .with_observation_scale(self.observation_scale)?
            .with_reward_scale(self.reward_scale)
    }

    pub fn validate(&self) -> Result<(), ExplorationError> {
        self.weights()?;
        if self.kind == ExplorationKind::None && (self.alpha != 0.0 || self.beta != 0.0) {
            return Err(ExplorationError::Config(
                "exploration.alpha/beta require an exploration kind other than none".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.minibatch_size == 0 {
            return Err(ExplorationError::Config(
                "exploration.learning_rate, epochs and minibatch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-transition intrinsic rewards and model losses, evaluated with the
/// models as they were before the update that consumes the transitions.
/// Columns a configuration does not produce are `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransitionScores {
    pub observation_intrinsic: Vec<f64>,
    pub reward_intrinsic: Vec<f64>,
    pub forward_loss: Option<Vec<f64>>,
    pub inverse_loss: Option<Vec<f64>>,
    pub reward_model_loss: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExplorationLosses {
    pub forward: f64,
    pub inverse: f64,
    pub reward_model: f64,
    pub skipped: usize,
}

/// The exploration models of one run.
pub struct Exploration {
    config: ExplorationConfig,
    weights: IntrinsicWeights,
    icm: Option<Icm>,
    rnd: Option<RndPair>,
    reward_model: Option<RewardModel>,
    table: RolloutVisitTable,
}

impl Exploration {
    pub fn new(
        config: ExplorationConfig,
        obs_shape: &[usize],
        num_actions: usize,
        seed: u64,
    ) -> Result<Self, ExplorationError> {
        config.validate()?;
        let weights = config.weights()?;
        let kind = config.kind;
        let icm = match kind {
            ExplorationKind::Icm | ExplorationKind::Ride => Some(Icm::new(obs_shape, num_actions, seed)?),
            _ => None,
        };
        let rnd = match kind {
            ExplorationKind::Rnd | ExplorationKind::Noveld => Some(RndPair::new(obs_shape, seed.wrapping_add(10))?),
            _ => None,
        };
        let reward_model = match kind {
            ExplorationKind::None => None,
            _ => Some(RewardModel::new(obs_shape, num_actions, seed.wrapping_add(20))?),
        };
        Ok(Self {
            config,
            weights,
            icm,
            rnd,
            reward_model,
            table: RolloutVisitTable::new(),
        })
    }

    pub fn kind(&self) -> ExplorationKind {
        self.config.kind
    }

    pub fn weights(&self) -> &IntrinsicWeights {
        &self.weights
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.config
    }

    pub fn visit_table(&self) -> &RolloutVisitTable {
        &self.table
    }

    /// Scores transitions. With `rollout = true` they are taken as one
    /// consecutive rollout: the visit table is cleared and then filled in
    /// order. Rollout-scoped bonuses are unavailable otherwise.
    pub fn score(
        &mut self,
        obs: &Tensor,
        actions: &[usize],
        next_obs: &Tensor,
        extrinsic: &[f64],
        rollout: bool,
    ) -> Result<TransitionScores, ExplorationError> {
        let n = actions.len();
        let kind = self.config.kind;
        if kind == ExplorationKind::None {
            return Ok(TransitionScores {
                observation_intrinsic: vec![0.0; n],
                reward_intrinsic: vec![0.0; n],
                ..Default::default()
            });
        }
        if kind.is_rollout_scoped() && !rollout {
            return Err(ExplorationError::Config(format!(
                "{kind:?} bonuses are defined per on-policy rollout"
            )));
        }
        let mut scores = TransitionScores::default();
        let mut signals: Option<Vec<NoveltySignal>> = None;
        if let Some(icm) = &self.icm {
            let s = icm.score(obs, actions, next_obs)?;
            if kind == ExplorationKind::Ride {
                signals = Some(s.impact.iter().map(|&impact| NoveltySignal::Ride { impact }).collect());
            } else {
                scores.observation_intrinsic = s.forward.clone();
            }
            scores.forward_loss = Some(s.forward);
            scores.inverse_loss = Some(s.inverse);
        }
        if let Some(rnd) = &self.rnd {
            let next_err = rnd.intrinsic(next_obs)?;
            if kind == ExplorationKind::Noveld {
                let cur_err = rnd.intrinsic(obs)?;
                let scale = self.config.noveld_scale;
                signals = Some(
                    cur_err
                        .iter()
                        .zip(&next_err)
                        .map(|(&a, &b)| NoveltySignal::NovelD {
                            novelty_t: a,
                            novelty_next: b,
                            scale,
                        })
                        .collect(),
                );
            } else {
                scores.observation_intrinsic = next_err.clone();
            }
            scores.forward_loss = Some(next_err);
        }
        if let Some(signals) = signals {
            self.table.clear();
            let w = next_obs.row_len();
            scores.observation_intrinsic = signals
                .into_iter()
                .enumerate()
                .map(|(i, s)| {
                    let key = observation_key(&next_obs.data()[i * w..(i + 1) * w]);
                    rollout_novelty_bonus(&mut self.table, s, key)
                })
                .collect();
        }
        if self.weights.observation_scale != 1.0 {
            for v in &mut scores.observation_intrinsic {
                *v *= self.weights.observation_scale;
            }
        }
        if let Some(rm) = &self.reward_model {
            let pred = rm.predict(obs, actions)?;
            let loss: Vec<f64> = pred.iter().zip(extrinsic).map(|(p, r)| reward_intrinsic(*p, *r, 1.0)).collect();
            scores.reward_intrinsic = loss.iter().map(|l| l * self.weights.reward_scale).collect();
            scores.reward_model_loss = Some(loss);
        }
        Ok(scores)
    }

    /// Mixed rewards for scored transitions.
    pub fn mix_scores(&self, scores: &TransitionScores, extrinsic: &[f64]) -> Vec<MixedReward> {
        extrinsic
            .iter()
            .enumerate()
            .map(|(i, &r_e)| {
                mix(
                    &self.weights,
                    scores.observation_intrinsic.get(i).copied().unwrap_or(0.0),
                    scores.reward_intrinsic.get(i).copied().unwrap_or(0.0),
                    r_e,
                )
            })
            .collect()
    }

    /// One step of every trainable model on the given minibatch.
    pub fn update(
        &mut self,
        obs: &Tensor,
        actions: &[usize],
        next_obs: &Tensor,
        extrinsic: &[f64],
    ) -> Result<ExplorationLosses, ExplorationError> {
        let lr = self.config.learning_rate;
        let mut out = ExplorationLosses::default();
        if let Some(icm) = &mut self.icm {
            match icm.update(obs, actions, next_obs, lr) {
                Ok(l) => {
                    out.forward = l.forward;
                    out.inverse = l.inverse;
                }
                Err(ExplorationError::NonFinite(_)) => out.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if let Some(rnd) = &mut self.rnd {
            match rnd.update(next_obs, lr) {
                Ok(l) => out.forward = l,
                Err(ExplorationError::NonFinite(_)) => out.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if let Some(rm) = &mut self.reward_model {
            match rm.update(obs, actions, extrinsic, lr) {
                Ok(l) => out.reward_model = l,
                Err(ExplorationError::NonFinite(_)) => out.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Shuffled minibatch passes over a whole rollout; returns mean losses.
    pub fn train_rollout<R: Rng>(
        &mut self,
        obs: &Tensor,
        actions: &[usize],
        next_obs: &Tensor,
        extrinsic: &[f64],
        rng: &mut R,
    ) -> Result<ExplorationLosses, ExplorationError> {
        let mut total = ExplorationLosses::default();
        if self.config.kind == ExplorationKind::None || actions.is_empty() {
            return Ok(total);
        }
        let mut order: Vec<usize> = (0..actions.len()).collect();
        let mut steps = 0usize;
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            for idx in order.chunks(self.config.minibatch_size) {
                let a: Vec<usize> = idx.iter().map(|&i| actions[i]).collect();
                let r: Vec<f64> = idx.iter().map(|&i| extrinsic[i]).collect();
                let l = self.update(&obs.select_rows(idx), &a, &next_obs.select_rows(idx), &r)?;
                total.forward += l.forward;
                total.inverse += l.inverse;
                total.reward_model += l.reward_model;
                total.skipped += l.skipped;
                steps += 1;
            }
        }
        let s = steps.max(1) as f64;
        total.forward /= s;
        total.inverse /= s;
        total.reward_model /= s;
        Ok(total)
    }
}
