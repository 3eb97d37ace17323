//! Clipped-surrogate PPO with a shared-trunk actor-critic.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{batch_of_one, compute_gae, AgentError};
use crate::approximator::architectures::{cnn_extractor, tanh_mlp, LATENT};
use crate::approximator::{
    clip_global_norm, log_softmax, AdamState, LayerSpec, Network, Tensor,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyperparams {
    pub learning_rate: f64,
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantage: bool,
}

impl Default for PpoHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            rollout_steps: 2048,
            minibatch_size: 64,
            epochs: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.0,
            max_grad_norm: 0.5,
            normalize_advantage: true,
        }
    }
}

impl PpoHyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |key: &str, why: &str| Err(AgentError::Config(format!("ppo.{key}: {why}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if self.rollout_steps == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return bad("rollout_steps/minibatch_size/epochs", "must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", "must lie in [0, 1]");
        }
        if !(self.clip_range > 0.0) {
            return bad("clip_range", "must be positive");
        }
        if self.vf_coef < 0.0 || self.ent_coef < 0.0 || !(self.max_grad_norm > 0.0) {
            return bad("vf_coef/ent_coef/max_grad_norm", "must be non-negative (norm positive)");
        }
        Ok(())
    }
}

/// Shared feature trunk with separate policy-logit and value heads.
///
/// Image observations use the CNN extractor as trunk and linear heads;
/// vector observations use an identity trunk and two 64-64 tanh MLPs.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub trunk: Network,
    pub policy: Network,
    pub value: Network,
    adam: [AdamState; 3],
    num_actions: usize,
}

impl ActorCritic {
    pub fn new(obs_shape: &[usize], num_actions: usize, seed: u64) -> Result<Self, AgentError> {
        let (trunk_spec, pi_spec, vf_spec, feat) = match obs_shape {
            [side, w, c] if side == w => (
                cnn_extractor(*side, *c),
                vec![LayerSpec::linear(LATENT, num_actions)],
                vec![LayerSpec::linear(LATENT, 1)],
                LATENT,
            ),
            [n] => (Vec::new(), tanh_mlp(*n, num_actions), tanh_mlp(*n, 1), *n),
            other => {
                return Err(AgentError::Config(format!(
                    "unsupported observation shape {other:?}"
                )))
            }
        };
        let trunk = Network::build(&trunk_spec, obs_shape, seed)?;
        let mut policy = Network::build(&pi_spec, &[feat], seed.wrapping_add(1))?;
        let value = Network::build(&vf_spec, &[feat], seed.wrapping_add(2))?;
        // Near-uniform initial policy.
        policy.scale_output_layer(0.01);
        let adam = [
            AdamState::new(&trunk),
            AdamState::new(&policy),
            AdamState::new(&value),
        ];
        Ok(Self {
            trunk,
            policy,
            value,
            adam,
            num_actions,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Policy logits `[B, A]` and state values for a batch.
    pub fn evaluate(&self, obs: &Tensor) -> Result<(Tensor, Vec<f64>), AgentError> {
        let features = self.trunk.predict(obs)?;
        let logits = self.policy.predict(&features)?;
        let values = self.value.predict(&features)?.into_data();
        Ok((logits, values))
    }

    pub fn value_of(&self, obs: &Tensor) -> Result<f64, AgentError> {
        Ok(self.evaluate(&batch_of_one(obs)?)?.1[0])
    }

    /// Samples an action for one observation; returns `(action, value, log_prob)`.
    pub fn act<R: Rng>(&self, obs: &Tensor, rng: &mut R) -> Result<(usize, f64, f64), AgentError> {
        let (logits, values) = self.evaluate(&batch_of_one(obs)?)?;
        let logp = log_softmax(logits.row(0));
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let dist = WeightedIndex::new(&probs).map_err(|_| AgentError::NonFinite("policy"))?;
        let a = dist.sample(rng);
        Ok((a, values[0], logp[a]))
    }
}

/// On-policy storage for one rollout. Consecutive transitions share frames,
/// so `len + 1` observations are kept.
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    obs_shape: Vec<usize>,
    capacity: usize,
    frames: Vec<f64>,
    actions: Vec<usize>,
    extrinsic: Vec<f64>,
    rewards: Option<Vec<f64>>,
    values: Vec<f64>,
    log_probs: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_shape: &[usize], capacity: usize) -> Self {
        let frame: usize = obs_shape.iter().product();
        Self {
            obs_shape: obs_shape.to_vec(),
            capacity,
            frames: Vec::with_capacity((capacity + 1) * frame),
            actions: Vec::with_capacity(capacity),
            extrinsic: Vec::with_capacity(capacity),
            rewards: None,
            values: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.frames.clear();
        self.actions.clear();
        self.extrinsic.clear();
        self.rewards = None;
        self.values.clear();
        self.log_probs.clear();
    }

    pub fn push(
        &mut self,
        obs: &Tensor,
        action: usize,
        extrinsic_reward: f64,
        value: f64,
        log_prob: f64,
        next_obs: &Tensor,
    ) -> Result<(), AgentError> {
        if self.is_full() {
            return Err(AgentError::Config("rollout buffer is full".into()));
        }
        if self.frames.is_empty() {
            self.frames.extend_from_slice(obs.data());
        }
        self.frames.extend_from_slice(next_obs.data());
        self.actions.push(action);
        self.extrinsic.push(extrinsic_reward);
        self.values.push(value);
        self.log_probs.push(log_prob);
        self.rewards = None;
        Ok(())
    }

    fn frame_tensor(&self, from: usize) -> Tensor {
        let w: usize = self.obs_shape.iter().product();
        let n = self.len();
        let mut shape = vec![n];
        shape.extend_from_slice(&self.obs_shape);
        Tensor::new(shape, self.frames[from * w..(from + n) * w].to_vec())
            .expect("frame storage is consistent")
    }

    /// `[len, ..obs_shape]` observations `o_t`.
    pub fn observations(&self) -> Tensor {
        self.frame_tensor(0)
    }

    /// `[len, ..obs_shape]` successor observations `o_{t+1}`.
    pub fn next_observations(&self) -> Tensor {
        self.frame_tensor(1)
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn extrinsic_rewards(&self) -> &[f64] {
        &self.extrinsic
    }

    /// Installs the mixed rewards the policy is trained on.
    pub fn set_rewards(&mut self, rewards: Vec<f64>) -> Result<(), AgentError> {
        if rewards.len() != self.len() {
            return Err(AgentError::Config(format!(
                "{} mixed rewards for {} transitions",
                rewards.len(),
                self.len()
            )));
        }
        self.rewards = Some(rewards);
        Ok(())
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    /// Computes advantages and returns; mixed rewards must have been installed.
    pub fn finish(&self, bootstrap_value: f64, gamma: f64, lambda: f64) -> Result<PpoBatch, AgentError> {
        let rewards = self
            .rewards
            .as_ref()
            .ok_or_else(|| AgentError::Config("mixed rewards not set".into()))?;
        let (advantages, returns) = compute_gae(rewards, &self.values, bootstrap_value, gamma, lambda)?;
        Ok(PpoBatch {
            observations: self.observations(),
            actions: self.actions.clone(),
            old_log_probs: self.log_probs.clone(),
            advantages,
            returns,
        })
    }
}

#[derive(Clone, Debug)]
pub struct PpoBatch {
    pub observations: Tensor,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Standardizes to zero mean and unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
}

/// `min(r A, clip(r, 1-c, 1+c) A)` and its derivative in `r`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoLoss {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Minibatch loss `-surrogate + vf * MSE - ent * H` and its gradients with
/// respect to the logits `[B, A]` and the values `[B, 1]`.
pub fn ppo_minibatch_loss(
    logits: &Tensor,
    values: &[f64],
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    returns: &[f64],
    hp: &PpoHyperparams,
) -> (PpoLoss, Tensor, Tensor) {
    let b = actions.len();
    let a_n = logits.row_len();
    let inv = 1.0 / b as f64;
    let mut loss = PpoLoss::default();
    let mut dlogits = Tensor::zeros(vec![b, a_n]);
    let mut dvalues = Tensor::zeros(vec![b, 1]);
    let mut clipped = 0usize;
    for i in 0..b {
        let logp = log_softmax(logits.row(i));
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let a = actions[i];
        let ratio = (logp[a] - old_log_probs[i]).exp();
        if (ratio - 1.0).abs() > hp.clip_range {
            clipped += 1;
        }
        let (surr, dsurr_dratio) = clipped_surrogate(ratio, advantages[i], hp.clip_range);
        loss.policy -= surr * inv;
        let dlogp = -dsurr_dratio * ratio * inv;

        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        loss.entropy += entropy * inv;

        let row = &mut dlogits.data_mut()[i * a_n..(i + 1) * a_n];
        for j in 0..a_n {
            let indicator = if j == a { 1.0 } else { 0.0 };
            let mut g = dlogp * (indicator - probs[j]);
            if hp.ent_coef != 0.0 {
                // dH/dz_j = -p_j (log p_j + H)
                g += hp.ent_coef * inv * probs[j] * (logp[j] + entropy);
            }
            row[j] = g;
        }

        let err = values[i] - returns[i];
        loss.value += err * err * inv;
        dvalues.data_mut()[i] = hp.vf_coef * 2.0 * err * inv;
    }
    loss.clip_fraction = clipped as f64 * inv;
    (loss, dlogits, dvalues)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
    pub skipped: usize,
}

/// Runs `epochs` passes of shuffled minibatch updates over `batch`.
/// Minibatches that produce non-finite losses or gradients are skipped.
pub fn ppo_update<R: Rng>(
    model: &mut ActorCritic,
    batch: &PpoBatch,
    hp: &PpoHyperparams,
    rng: &mut R,
) -> Result<PpoStats, AgentError> {
    let n = batch.actions.len();
    if n == 0 {
        return Err(AgentError::Empty("rollout"));
    }
    let mut stats = PpoStats::default();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..hp.epochs {
        order.shuffle(rng);
        for idx in order.chunks(hp.minibatch_size) {
            let obs = batch.observations.select_rows(idx);
            let actions: Vec<usize> = idx.iter().map(|&i| batch.actions[i]).collect();
            let old_lp: Vec<f64> = idx.iter().map(|&i| batch.old_log_probs[i]).collect();
            let returns: Vec<f64> = idx.iter().map(|&i| batch.returns[i]).collect();
            let mut adv: Vec<f64> = idx.iter().map(|&i| batch.advantages[i]).collect();
            if hp.normalize_advantage {
                normalize_advantages(&mut adv);
            }

            let (features, trunk_tape) = model.trunk.forward(&obs)?;
            let (logits, pi_tape) = model.policy.forward(&features)?;
            let (values, vf_tape) = model.value.forward(&features)?;
            let (loss, dlogits, dvalues) =
                ppo_minibatch_loss(&logits, values.data(), &actions, &old_lp, &adv, &returns, hp);
            let total = loss.policy + hp.vf_coef * loss.value - hp.ent_coef * loss.entropy;
            if !total.is_finite() || !dlogits.is_finite() {
                stats.skipped += 1;
                continue;
            }
            let pi_back = model.policy.backward(&pi_tape, &dlogits)?;
            let vf_back = model.value.backward(&vf_tape, &dvalues)?;
            let mut dfeat = pi_back.input;
            dfeat.add_assign(&vf_back.input);
            let trunk_back = model.trunk.backward(&trunk_tape, &dfeat)?;
            let (mut gt, mut gp, mut gv) = (trunk_back.params, pi_back.params, vf_back.params);
            if !(gt.is_finite() && gp.is_finite() && gv.is_finite()) {
                stats.skipped += 1;
                continue;
            }
            clip_global_norm(&mut [&mut gt, &mut gp, &mut gv], hp.max_grad_norm);
            let [at, ap, av] = &mut model.adam;
            at.step(&mut model.trunk, &gt, hp.learning_rate)?;
            ap.step(&mut model.policy, &gp, hp.learning_rate)?;
            av.step(&mut model.value, &gv, hp.learning_rate)?;

            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.clip_fraction += loss.clip_fraction;
            stats.minibatches += 1;
        }
    }
    if stats.minibatches > 0 {
        let m = stats.minibatches as f64;
        stats.policy_loss /= m;
        stats.value_loss /= m;
        stats.entropy /= m;
        stats.clip_fraction /= m;
    }
    Ok(stats)
}
