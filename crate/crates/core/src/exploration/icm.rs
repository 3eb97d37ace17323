use super::ExplorationError;
use crate::approximator::architectures::{
    icm_encoder_image, icm_encoder_vector, icm_forward, icm_inverse, LATENT,
};
use crate::approximator::{log_softmax, AdamState, Network, Tensor};

/// `1/2 * mean_k (prediction_k - target_k)^2`.
pub fn latent_prediction_error(prediction: &[f64], target: &[f64]) -> f64 {
    let d = prediction.len() as f64;
    0.5 * prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / d
}

/// Cross-entropy of the action distribution given by `logits` against `action`.
pub fn inverse_cross_entropy(logits: &[f64], action: usize) -> f64 {
    -log_softmax(logits)[action]
}

/// Stacks two equally shaped batches along the leading axis.
pub(crate) fn stack_batches(a: &Tensor, b: &Tensor) -> Tensor {
    let mut shape = a.shape().to_vec();
    shape[0] += b.shape()[0];
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::new(shape, data).expect("stacked batch")
}

/// Per-transition diagnostics of the curiosity module.
#[derive(Clone, Debug, Default)]
pub struct IcmScores {
    /// Forward-model error, which is also the observation intrinsic reward.
    pub forward: Vec<f64>,
    pub inverse: Vec<f64>,
    /// `||e(o_{t+1}) - e(o_t)||`, the impact signal used by RIDE.
    pub impact: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IcmLosses {
    pub forward: f64,
    pub inverse: f64,
}

/// Curiosity module: shared encoder, forward and inverse dynamics models.
#[derive(Clone, Debug)]
pub struct Icm {
    pub encoder: Network,
    pub forward_model: Network,
    pub inverse_model: Network,
    adam: [AdamState; 3],
    num_actions: usize,
}

impl Icm {
    pub fn new(obs_shape: &[usize], num_actions: usize, seed: u64) -> Result<Self, ExplorationError> {
        let encoder_spec = match obs_shape {
            [side, w, c] if side == w => icm_encoder_image(*side, *c),
            [n] => icm_encoder_vector(*n),
            other => return Err(ExplorationError::Config(format!("unsupported observation shape {other:?}"))),
        };
        let encoder = Network::build(&encoder_spec, obs_shape, seed)?;
        let forward_model = Network::build(&icm_forward(LATENT, num_actions), &[LATENT], seed.wrapping_add(1))?;
        let inverse_model = Network::build(&icm_inverse(LATENT, num_actions), &[2 * LATENT], seed.wrapping_add(2))?;
        let adam = [
            AdamState::new(&encoder),
            AdamState::new(&forward_model),
            AdamState::new(&inverse_model),
        ];
        Ok(Self {
            encoder,
            forward_model,
            inverse_model,
            adam,
            num_actions,
        })
    }

    pub fn latents(&self, obs: &Tensor) -> Result<Tensor, ExplorationError> {
        Ok(self.encoder.predict(obs)?)
    }

    pub fn score(&self, obs: &Tensor, actions: &[usize], next_obs: &Tensor) -> Result<IcmScores, ExplorationError> {
        let b = actions.len();
        let latents = self.encoder.predict(&stack_batches(obs, next_obs))?;
        let rows: Vec<usize> = (0..b).collect();
        let next_rows: Vec<usize> = (b..2 * b).collect();
        let (e, e_next) = (latents.select_rows(&rows), latents.select_rows(&next_rows));
        let onehot = Tensor::one_hot(actions, self.num_actions);
        let pred = self.forward_model.predict_with(&e, &[&onehot])?;
        let logits = self.inverse_model.predict(&Tensor::concat_columns(&e, &e_next))?;
        let mut scores = IcmScores::default();
        for i in 0..b {
            scores.forward.push(latent_prediction_error(pred.row(i), e_next.row(i)));
            scores.inverse.push(inverse_cross_entropy(logits.row(i), actions[i]));
            let impact = e
                .row(i)
                .iter()
                .zip(e_next.row(i))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            scores.impact.push(impact);
        }
        Ok(scores)
    }

    /// One Adam step on each component. The forward loss trains the forward
    /// model towards detached next-state latents; the inverse loss trains the
    /// inverse model and the encoder.
    pub fn update(
        &mut self,
        obs: &Tensor,
        actions: &[usize],
        next_obs: &Tensor,
        learning_rate: f64,
    ) -> Result<IcmLosses, ExplorationError> {
        let b = actions.len();
        let inv_b = 1.0 / b as f64;
        let (latents, enc_tape) = self.encoder.forward(&stack_batches(obs, next_obs))?;
        let rows: Vec<usize> = (0..b).collect();
        let next_rows: Vec<usize> = (b..2 * b).collect();
        let (e, e_next) = (latents.select_rows(&rows), latents.select_rows(&next_rows));
        let onehot = Tensor::one_hot(actions, self.num_actions);

        let (pred, fwd_tape) = self.forward_model.forward_with(&e, &[&onehot])?;
        let d = pred.row_len() as f64;
        let mut forward_loss = 0.0;
        let mut dpred = Tensor::zeros(pred.shape().to_vec());
        for i in 0..b {
            forward_loss += latent_prediction_error(pred.row(i), e_next.row(i)) * inv_b;
            let w = pred.row_len();
            for k in 0..w {
                dpred.data_mut()[i * w + k] = (pred.row(i)[k] - e_next.row(i)[k]) / d * inv_b;
            }
        }

        let (logits, inv_tape) = self.inverse_model.forward(&Tensor::concat_columns(&e, &e_next))?;
        let a_n = self.num_actions;
        let mut inverse_loss = 0.0;
        let mut dlogits = Tensor::zeros(vec![b, a_n]);
        for i in 0..b {
            let logp = log_softmax(logits.row(i));
            inverse_loss -= logp[actions[i]] * inv_b;
            for j in 0..a_n {
                let ind = if j == actions[i] { 1.0 } else { 0.0 };
                dlogits.data_mut()[i * a_n + j] = (logp[j].exp() - ind) * inv_b;
            }
        }
        if !(forward_loss.is_finite() && inverse_loss.is_finite()) {
            return Err(ExplorationError::NonFinite("curiosity loss"));
        }

        let fwd_back = self.forward_model.backward(&fwd_tape, &dpred)?;
        let inv_back = self.inverse_model.backward(&inv_tape, &dlogits)?;
        let (de, de_next) = inv_back.input.split_columns(LATENT);
        let enc_back = self.encoder.backward(&enc_tape, &stack_batches(&de, &de_next))?;

        let [a_enc, a_fwd, a_inv] = &mut self.adam;
        a_enc.step(&mut self.encoder, &enc_back.params, learning_rate)?;
        a_fwd.step(&mut self.forward_model, &fwd_back.params, learning_rate)?;
        a_inv.step(&mut self.inverse_model, &inv_back.params, learning_rate)?;
        Ok(IcmLosses {
            forward: forward_loss,
            inverse: inverse_loss,
        })
    }
}
