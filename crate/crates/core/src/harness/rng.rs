//! Per-component random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::fnv1a;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    World,
    EnvInit,
    PolicyInit,
    ExplorationInit,
    ActionSampling,
    Minibatch,
    ExplorationMinibatch,
    Replay,
}

impl Stream {
    pub const ALL: [Stream; 8] = [
        Stream::World,
        Stream::EnvInit,
        Stream::PolicyInit,
        Stream::ExplorationInit,
        Stream::ActionSampling,
        Stream::Minibatch,
        Stream::ExplorationMinibatch,
        Stream::Replay,
    ];

    fn key(self) -> &'static str {
        match self {
            Stream::World => "world",
            Stream::EnvInit => "env-init",
            Stream::PolicyInit => "policy-init",
            Stream::ExplorationInit => "exploration-init",
            Stream::ActionSampling => "action-sampling",
            Stream::Minibatch => "minibatch",
            Stream::ExplorationMinibatch => "exploration-minibatch",
            Stream::Replay => "replay",
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngContract {
    pub master: u64,
}

impl RngContract {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn seed(&self, stream: Stream) -> u64 {
        splitmix(splitmix(self.master) ^ fnv1a(stream.key().as_bytes()))
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(stream))
    }
}
