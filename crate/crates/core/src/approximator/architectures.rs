//! Layer recipes for every network used by the agents and curiosity modules.

use super::LayerSpec;

/// Latent width of the image feature extractor and curiosity encoders.
pub const LATENT: usize = 128;

fn conv_trunk(obs_channels: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv(obs_channels, 32, 3, 2),
        LayerSpec::Relu,
        LayerSpec::conv(32, 64, 3, 2),
        LayerSpec::Relu,
        LayerSpec::Flatten,
    ]
}

/// Flattened size of the conv trunk for a square `side x side` input.
pub fn conv_trunk_len(side: usize) -> usize {
    let s1 = (side - 3) / 2 + 1;
    let s2 = (s1 - 3) / 2 + 1;
    s2 * s2 * 64
}

/// Image feature extractor shared by the PPO and DQN agents on the gridworld.
pub fn cnn_extractor(side: usize, obs_channels: usize) -> Vec<LayerSpec> {
    let mut layers = conv_trunk(obs_channels);
    layers.push(LayerSpec::linear(conv_trunk_len(side), LATENT));
    layers.push(LayerSpec::Relu);
    layers
}

/// Observation encoder of the image curiosity module (same trunk as the extractor).
pub fn icm_encoder_image(side: usize, obs_channels: usize) -> Vec<LayerSpec> {
    cnn_extractor(side, obs_channels)
}

/// Observation encoder of the curiosity module for vector observations.
pub fn icm_encoder_vector(obs_len: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::linear(obs_len, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, LATENT),
    ]
}

/// Forward dynamics model: latent input, one-hot action as side input.
pub fn icm_forward(latent: usize, actions: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Concat { width: actions },
        LayerSpec::linear(latent + actions, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, latent),
    ]
}

/// Inverse dynamics model over concatenated `[e(o_t), e(o_t+1)]`, emitting action logits.
pub fn icm_inverse(latent: usize, actions: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::linear(2 * latent, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, actions),
    ]
}

/// Reward model for image observations; the one-hot action enters after the trunk.
pub fn reward_model_image(side: usize, obs_channels: usize, actions: usize) -> Vec<LayerSpec> {
    let mut layers = conv_trunk(obs_channels);
    layers.extend([
        LayerSpec::Concat { width: actions },
        LayerSpec::linear(conv_trunk_len(side) + actions, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 1),
    ]);
    layers
}

/// Reward model for vector observations.
pub fn reward_model_vector(obs_len: usize, actions: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Concat { width: actions },
        LayerSpec::linear(obs_len + actions, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 128),
        LayerSpec::Relu,
        LayerSpec::linear(128, 1),
    ]
}

/// Two hidden tanh layers of 64 units, the usual MLP policy/value body.
pub fn tanh_mlp(input: usize, output: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::linear(input, 64),
        LayerSpec::Tanh,
        LayerSpec::linear(64, 64),
        LayerSpec::Tanh,
        LayerSpec::linear(64, output),
    ]
}

/// Two hidden ReLU layers of 64 units, the usual MLP Q-network body.
pub fn relu_mlp(input: usize, output: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::linear(input, 64),
        LayerSpec::Relu,
        LayerSpec::linear(64, 64),
        LayerSpec::Relu,
        LayerSpec::linear(64, output),
    ]
}

/// Random network distillation target/predictor: image extractor plus a linear projection.
pub fn rnd_image(side: usize, obs_channels: usize) -> Vec<LayerSpec> {
    let mut layers = cnn_extractor(side, obs_channels);
    layers.push(LayerSpec::linear(LATENT, LATENT));
    layers
}

pub fn rnd_vector(obs_len: usize) -> Vec<LayerSpec> {
    icm_encoder_vector(obs_len)
}
