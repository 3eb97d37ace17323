//! DQN and its variants: informed epsilon restarts, prioritized replay,
//! Boltzmann action selection and soft Q-learning targets.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{batch_of_one, AgentError, ReplayBatch, ReplayBuffer};
use crate::approximator::architectures::{cnn_extractor, relu_mlp, LATENT};
use crate::approximator::{clip_global_norm, softmax_in_place, AdamState, LayerSpec, Network, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSelection {
    EpsilonGreedy,
    /// Sample from `softmax(Q / temperature)`.
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnHyperparams {
    pub learning_rate: f64,
    pub buffer_size: usize,
    pub learning_starts: u64,
    pub batch_size: usize,
    pub tau: f64,
    pub gamma: f64,
    pub train_freq: u64,
    pub gradient_steps: usize,
    pub target_update_interval: u64,
    pub exploration_fraction: f64,
    pub exploration_initial_eps: f64,
    pub exploration_final_eps: f64,
    pub max_grad_norm: f64,
    /// Restart the epsilon decay every this many steps.
    pub informed_interval: Option<u64>,
    pub prioritized: bool,
    pub per_alpha: f64,
    pub per_beta: f64,
    pub action_selection: ActionSelection,
    pub temperature: f64,
    /// Soft Q-learning temperature; `None` uses hard max targets.
    pub soft_q_temperature: Option<f64>,
}

impl Default for DqnHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            buffer_size: 1_000_000,
            learning_starts: 50_000,
            batch_size: 32,
            tau: 1.0,
            gamma: 0.99,
            train_freq: 4,
            gradient_steps: 1,
            target_update_interval: 10_000,
            exploration_fraction: 0.1,
            exploration_initial_eps: 1.0,
            exploration_final_eps: 0.05,
            max_grad_norm: 10.0,
            informed_interval: None,
            prioritized: false,
            per_alpha: 0.6,
            per_beta: 0.0,
            action_selection: ActionSelection::EpsilonGreedy,
            temperature: 1.0,
            soft_q_temperature: None,
        }
    }
}

impl DqnHyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |key: &str, why: &str| Err(AgentError::Config(format!("dqn.{key}: {why}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if self.batch_size == 0 || self.buffer_size < self.batch_size {
            return bad("buffer_size", "must be at least batch_size (> 0)");
        }
        if self.train_freq == 0 || self.target_update_interval == 0 || self.gradient_steps == 0 {
            return bad("train_freq/target_update_interval/gradient_steps", "must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        for (k, v) in [
            ("exploration_initial_eps", self.exploration_initial_eps),
            ("exploration_final_eps", self.exploration_final_eps),
            ("exploration_fraction", self.exploration_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(k, "must lie in [0, 1]");
            }
        }
        if self.informed_interval == Some(0) {
            return bad("informed_interval", "must be positive");
        }
        if self.per_alpha < 0.0 {
            return bad("per_alpha", "must be non-negative");
        }
        if self.per_beta != 0.0 {
            return bad("per_beta", "importance-sampling correction is not supported; use 0");
        }
        if !(self.temperature > 0.0) || self.soft_q_temperature.is_some_and(|t| !(t > 0.0)) {
            return bad("temperature", "must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm", "must be positive");
        }
        Ok(())
    }

    pub fn epsilon_schedule(&self, horizon: u64) -> EpsilonSchedule {
        EpsilonSchedule {
            initial: self.exploration_initial_eps,
            final_eps: self.exploration_final_eps,
            fraction: self.exploration_fraction,
            horizon,
            restart_interval: self.informed_interval,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_eps: f64,
    pub fraction: f64,
    /// Total training steps `T`; the decay spans `fraction * T` steps.
    pub horizon: u64,
    pub restart_interval: Option<u64>,
}

pub fn epsilon_at(t: u64, s: &EpsilonSchedule) -> f64 {
    let local = match s.restart_interval {
        Some(n) => t % n,
        None => t,
    };
    let span = s.fraction * s.horizon as f64;
    if span <= 0.0 {
        return s.final_eps;
    }
    let progress = local as f64 / span;
    if progress >= 1.0 {
        return s.final_eps;
    }
    s.initial + (s.final_eps - s.initial) * progress
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionMode {
    EpsilonGreedy(f64),
    Stochastic { temperature: f64 },
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn select_action<R: Rng>(q: &[f64], mode: ActionMode, rng: &mut R) -> usize {
    match mode {
        ActionMode::EpsilonGreedy(eps) => {
            if eps > 0.0 && rng.gen::<f64>() < eps {
                rng.gen_range(0..q.len())
            } else {
                argmax(q)
            }
        }
        ActionMode::Stochastic { temperature } => {
            let mut p: Vec<f64> = q.iter().map(|v| v / temperature).collect();
            softmax_in_place(&mut p);
            WeightedIndex::new(&p).map_or_else(|_| argmax(q), |d| d.sample(rng))
        }
    }
}

/// Bootstrapped targets `r + gamma * max_a Q'(o', a)`, or with a soft-Q
/// temperature, `r + gamma * tau * log sum_a exp(Q'(o', a) / tau)`.
/// Nothing is masked: the horizon is unbounded.
pub fn dqn_targets(rewards: &[f64], next_q: &Tensor, gamma: f64, soft_q_temperature: Option<f64>) -> Vec<f64> {
    rewards
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = next_q.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bootstrap = match soft_q_temperature {
                None => max,
                Some(tau) => {
                    let s: f64 = row.iter().map(|q| ((q - max) / tau).exp()).sum();
                    max + tau * s.ln()
                }
            };
            r + gamma * bootstrap
        })
        .collect()
}

fn q_network(obs_shape: &[usize], num_actions: usize, seed: u64) -> Result<Network, AgentError> {
    let spec = match obs_shape {
        [side, w, c] if side == w => {
            let mut s = cnn_extractor(*side, *c);
            s.push(LayerSpec::linear(LATENT, num_actions));
            s
        }
        [n] => relu_mlp(*n, num_actions),
        other => {
            return Err(AgentError::Config(format!(
                "unsupported observation shape {other:?}"
            )))
        }
    };
    Ok(Network::build(&spec, obs_shape, seed)?)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DqnLoss {
    pub loss: f64,
    pub mean_q: f64,
}

pub struct DqnAgent {
    pub qnet: Network,
    pub target: Network,
    pub buffer: ReplayBuffer,
    adam: AdamState,
    hp: DqnHyperparams,
    schedule: EpsilonSchedule,
    num_actions: usize,
    gradient_updates: u64,
}

impl DqnAgent {
    pub fn new(
        obs_shape: &[usize],
        num_actions: usize,
        hp: DqnHyperparams,
        total_steps: u64,
        seed: u64,
    ) -> Result<Self, AgentError> {
        hp.validate()?;
        let qnet = q_network(obs_shape, num_actions, seed)?;
        let target = qnet.clone();
        let mut buffer = ReplayBuffer::new(obs_shape, hp.buffer_size)?;
        if hp.prioritized {
            buffer = buffer.prioritized(hp.per_alpha);
        }
        Ok(Self {
            adam: AdamState::new(&qnet),
            qnet,
            target,
            buffer,
            schedule: hp.epsilon_schedule(total_steps),
            hp,
            num_actions,
            gradient_updates: 0,
        })
    }

    pub fn hyperparams(&self) -> &DqnHyperparams {
        &self.hp
    }

    pub fn gradient_updates(&self) -> u64 {
        self.gradient_updates
    }

    /// Exploration rate at step `t`; zero in Boltzmann mode.
    pub fn epsilon(&self, t: u64) -> f64 {
        match self.hp.action_selection {
            ActionSelection::EpsilonGreedy => epsilon_at(t, &self.schedule),
            ActionSelection::Stochastic => 0.0,
        }
    }

    /// Chooses the action for step `t`; uniform before learning starts.
    pub fn act<R: Rng>(&self, obs: &Tensor, t: u64, rng: &mut R) -> Result<usize, AgentError> {
        if t < self.hp.learning_starts {
            return Ok(rng.gen_range(0..self.num_actions));
        }
        let q = self.qnet.predict(&batch_of_one(obs)?)?;
        let mode = match self.hp.action_selection {
            ActionSelection::EpsilonGreedy => ActionMode::EpsilonGreedy(self.epsilon(t)),
            ActionSelection::Stochastic => ActionMode::Stochastic {
                temperature: self.hp.temperature,
            },
        };
        Ok(select_action(q.row(0), mode, rng))
    }

    pub fn observe(&mut self, obs: &Tensor, action: usize, extrinsic_reward: f64, next_obs: &Tensor, t: u64) {
        self.buffer.push(obs, action, extrinsic_reward, next_obs, t);
    }

    /// Whether a learning phase follows after `steps_done` environment steps.
    pub fn wants_update(&self, steps_done: u64) -> bool {
        steps_done > self.hp.learning_starts
            && steps_done % self.hp.train_freq == 0
            && self.buffer.len() >= self.hp.batch_size
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<ReplayBatch, AgentError> {
        self.buffer.sample(self.hp.batch_size, rng)
    }

    /// One Huber-loss gradient step on `batch`, trained towards `rewards`
    /// (the mixed rewards for the batch). Non-finite updates are rejected.
    pub fn learn(&mut self, batch: &ReplayBatch, rewards: &[f64]) -> Result<DqnLoss, AgentError> {
        let next_q = self.target.predict(&batch.next_observations)?;
        let targets = dqn_targets(rewards, &next_q, self.hp.gamma, self.hp.soft_q_temperature);
        let (q, tape) = self.qnet.forward(&batch.observations)?;
        let b = batch.actions.len();
        let a_n = self.num_actions;
        let mut grad = Tensor::zeros(vec![b, a_n]);
        let mut td = Vec::with_capacity(b);
        let mut loss = 0.0;
        let mut mean_q = 0.0;
        for i in 0..b {
            let a = batch.actions[i];
            let qa = q.row(i)[a];
            let err = qa - targets[i];
            td.push(err);
            loss += if err.abs() <= 1.0 { 0.5 * err * err } else { err.abs() - 0.5 };
            grad.data_mut()[i * a_n + a] = err.clamp(-1.0, 1.0) / b as f64;
            mean_q += qa / b as f64;
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite("dqn loss"));
        }
        let mut g = self.qnet.backward(&tape, &grad)?.params;
        clip_global_norm(&mut [&mut g], self.hp.max_grad_norm);
        self.adam.step(&mut self.qnet, &g, self.hp.learning_rate)?;
        self.buffer.update_priorities(&batch.slots, &td);
        self.gradient_updates += 1;
        Ok(DqnLoss { loss, mean_q })
    }

    /// Target refresh after `steps_done` environment steps.
    pub fn maybe_update_target(&mut self, steps_done: u64) -> bool {
        if steps_done % self.hp.target_update_interval != 0 {
            return false;
        }
        if self.hp.tau >= 1.0 {
            self.target.copy_params_from(&self.qnet);
        } else {
            let tau = self.hp.tau;
            for (dst, src) in self.target.params_mut().into_iter().zip(self.qnet.params()) {
                for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                    *d = (1.0 - tau) * *d + tau * s;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn schedule(restart: Option<u64>) -> EpsilonSchedule {
        DqnHyperparams {
            informed_interval: restart,
            ..Default::default()
        }
        .epsilon_schedule(2_000_000)
    }

    #[test]
    fn defaults_match_table() {
        let hp = DqnHyperparams::default();
        assert_eq!(hp.learning_rate, 1e-4);
        assert_eq!((hp.buffer_size, hp.learning_starts, hp.batch_size), (1_000_000, 50_000, 32));
        assert_eq!((hp.tau, hp.gamma, hp.train_freq), (1.0, 0.99, 4));
        assert_eq!(hp.target_update_interval, 10_000);
        assert_eq!((hp.exploration_fraction, hp.exploration_initial_eps, hp.exploration_final_eps), (0.1, 1.0, 0.05));
        assert_eq!(hp.max_grad_norm, 10.0);
        assert_eq!((hp.per_alpha, hp.per_beta), (0.6, 0.0));
        hp.validate().unwrap();
    }

    #[test]
    fn epsilon_default_and_informed() {
        let s = schedule(None);
        assert_eq!(epsilon_at(0, &s), 1.0);
        assert_eq!(epsilon_at(200_000, &s), 0.05);
        assert_eq!(epsilon_at(1_500_000, &s), 0.05);
        assert!((epsilon_at(100_000, &s) - 0.525).abs() < 1e-12);
        let s = schedule(Some(1_000_000));
        assert_eq!(epsilon_at(1_000_000, &s), 1.0);
        assert_eq!(epsilon_at(999_999, &s), 0.05);
    }

    #[test]
    fn targets_arithmetic() {
        let q = Tensor::new(vec![1, 3], vec![2.0, -1.0, 0.5]).unwrap();
        assert!((dqn_targets(&[1.0], &q, 0.99, None)[0] - 2.98).abs() < 1e-12);
        assert_eq!(dqn_targets(&[1.0], &q, 0.0, None)[0], 1.0);
        let single = Tensor::new(vec![1, 1], vec![3.0]).unwrap();
        assert!((dqn_targets(&[0.0], &single, 1.0 - 1e-9, Some(0.1))[0] - 3.0).abs() < 1e-8);
        // Soft targets upper-bound the hard ones.
        assert!(dqn_targets(&[0.0], &q, 0.9, Some(0.1))[0] >= dqn_targets(&[0.0], &q, 0.9, None)[0]);
    }

    #[test]
    fn greedy_and_boltzmann_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = [0.1, 0.7, 0.3, 0.7];
        for _ in 0..50 {
            assert_eq!(select_action(&q, ActionMode::EpsilonGreedy(0.0), &mut rng), 1);
        }
        let mut hits = 0;
        for _ in 0..10_000 {
            let q = [0.0, 20.0, 0.0, 0.0];
            if select_action(&q, ActionMode::Stochastic { temperature: 1.0 }, &mut rng) == 1 {
                hits += 1;
            }
        }
        assert!(hits >= 9_990);
    }

    #[test]
    fn per_beta_must_be_zero() {
        let hp = DqnHyperparams {
            per_beta: 0.4,
            ..Default::default()
        };
        assert!(hp.validate().is_err());
    }

    #[test]
    fn no_updates_before_learning_starts_and_hard_target_copy() {
        let hp = DqnHyperparams {
            buffer_size: 64,
            learning_starts: 20,
            batch_size: 8,
            target_update_interval: 10,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let mut agent = DqnAgent::new(&[2], 2, hp, 100, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obs = |t: u64| Tensor::new(vec![2], vec![(t as f64).sin(), (t as f64).cos()]).unwrap();
        for t in 0..60u64 {
            let a = agent.act(&obs(t), t, &mut rng).unwrap();
            agent.observe(&obs(t), a, a as f64, &obs(t + 1), t);
            let done = t + 1;
            if agent.wants_update(done) {
                let batch = agent.sample(&mut rng).unwrap();
                let rewards = batch.rewards.clone();
                agent.learn(&batch, &rewards).unwrap();
            }
            if done <= 20 {
                assert_eq!(agent.gradient_updates(), 0);
            }
            if agent.maybe_update_target(done) {
                let same = agent
                    .target
                    .params()
                    .iter()
                    .zip(agent.qnet.params())
                    .all(|(a, b)| a.data() == b.data());
                assert!(same);
            }
        }
        assert_eq!(agent.gradient_updates(), 10);
    }
}
