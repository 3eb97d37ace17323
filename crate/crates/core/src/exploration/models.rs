use super::ExplorationError;
use crate::approximator::architectures::{reward_model_image, reward_model_vector, rnd_image, rnd_vector};
use crate::approximator::{AdamState, Network, Tensor};

/// `1/2 * (prediction - extrinsic)^2 * scale`.
pub fn reward_intrinsic(prediction: f64, extrinsic: f64, scale: f64) -> f64 {
    0.5 * (prediction - extrinsic).powi(2) * scale
}

/// Extrinsic reward predictor `g(o_t, a_t)`.
#[derive(Clone, Debug)]
pub struct RewardModel {
    pub net: Network,
    adam: AdamState,
    num_actions: usize,
}

impl RewardModel {
    pub fn new(obs_shape: &[usize], num_actions: usize, seed: u64) -> Result<Self, ExplorationError> {
        let spec = match obs_shape {
            [side, w, c] if side == w => reward_model_image(*side, *c, num_actions),
            [n] => reward_model_vector(*n, num_actions),
            other => return Err(ExplorationError::Config(format!("unsupported observation shape {other:?}"))),
        };
        let net = Network::build(&spec, obs_shape, seed)?;
        Ok(Self {
            adam: AdamState::new(&net),
            net,
            num_actions,
        })
    }

    pub fn predict(&self, obs: &Tensor, actions: &[usize]) -> Result<Vec<f64>, ExplorationError> {
        let onehot = Tensor::one_hot(actions, self.num_actions);
        Ok(self.net.predict_with(obs, &[&onehot])?.into_data())
    }

    /// One Adam step on `mean 1/2 (g - r)^2`; returns the pre-step loss.
    pub fn update(
        &mut self,
        obs: &Tensor,
        actions: &[usize],
        targets: &[f64],
        learning_rate: f64,
    ) -> Result<f64, ExplorationError> {
        let onehot = Tensor::one_hot(actions, self.num_actions);
        let (pred, tape) = self.net.forward_with(obs, &[&onehot])?;
        let inv_b = 1.0 / targets.len() as f64;
        let mut loss = 0.0;
        let mut grad = Tensor::zeros(pred.shape().to_vec());
        for (i, (p, r)) in pred.data().iter().zip(targets).enumerate() {
            loss += reward_intrinsic(*p, *r, 1.0) * inv_b;
            grad.data_mut()[i] = (p - r) * inv_b;
        }
        if !loss.is_finite() {
            return Err(ExplorationError::NonFinite("reward-model loss"));
        }
        let back = self.net.backward(&tape, &grad)?;
        self.adam.step(&mut self.net, &back.params, learning_rate)?;
        Ok(loss)
    }
}

/// Frozen random target and trainable predictor.
#[derive(Clone, Debug)]
pub struct RndPair {
    target: Network,
    pub predictor: Network,
    adam: AdamState,
}

impl RndPair {
    pub fn new(obs_shape: &[usize], seed: u64) -> Result<Self, ExplorationError> {
        let spec = match obs_shape {
            [side, w, c] if side == w => rnd_image(*side, *c),
            [n] => rnd_vector(*n),
            other => return Err(ExplorationError::Config(format!("unsupported observation shape {other:?}"))),
        };
        let target = Network::build(&spec, obs_shape, seed)?;
        let predictor = Network::build(&spec, obs_shape, seed.wrapping_add(1))?;
        Ok(Self {
            adam: AdamState::new(&predictor),
            target,
            predictor,
        })
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    /// Mean-square predictor error per observation.
    pub fn intrinsic(&self, obs: &Tensor) -> Result<Vec<f64>, ExplorationError> {
        let t = self.target.predict(obs)?;
        let p = self.predictor.predict(obs)?;
        Ok((0..t.rows())
            .map(|i| {
                let w = t.row_len() as f64;
                t.row(i).iter().zip(p.row(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / w
            })
            .collect())
    }

    /// One Adam step on the batch-mean error; returns the pre-step loss.
    pub fn update(&mut self, obs: &Tensor, learning_rate: f64) -> Result<f64, ExplorationError> {
        let t = self.target.predict(obs)?;
        let (p, tape) = self.predictor.forward(obs)?;
        let scale = 1.0 / (t.rows() * t.row_len()) as f64;
        let mut grad = Tensor::zeros(p.shape().to_vec());
        let mut loss = 0.0;
        for (k, (pv, tv)) in p.data().iter().zip(t.data()).enumerate() {
            loss += (pv - tv).powi(2) * scale;
            grad.data_mut()[k] = 2.0 * (pv - tv) * scale;
        }
        if !loss.is_finite() {
            return Err(ExplorationError::NonFinite("rnd loss"));
        }
        let back = self.predictor.backward(&tape, &grad)?;
        self.adam.step(&mut self.predictor, &back.params, learning_rate)?;
        Ok(loss)
    }
}
