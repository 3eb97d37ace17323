use std::collections::HashMap;

/// Visit counts over discretized observations, scoped to one PPO rollout.
#[derive(Clone, Debug, Default)]
pub struct RolloutVisitTable {
    counts: HashMap<u64, u32>,
    total: u64,
}

impl RolloutVisitTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.counts.clear();
        self.total = 0;
    }

    /// Records a visit and returns the updated count.
    pub fn visit(&mut self, key: u64) -> u32 {
        self.total += 1;
        let c = self.counts.entry(key).or_insert(0);
        *c += 1;
        *c
    }

    pub fn count(&self, key: u64) -> u32 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Hash of the observation quantized to steps of 1/8.
pub fn observation_key(obs: &[f64]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    obs.iter().fold(FNV_OFFSET, |h, v| {
        let level = (v * 8.0).floor().clamp(i32::MIN as f64, i32::MAX as f64) as i32;
        level
            .to_le_bytes()
            .iter()
            .fold(h, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoveltySignal {
    /// Latent-space distance between consecutive observations.
    Ride { impact: f64 },
    /// Consecutive RND novelties; `scale` is the discount on `novelty_t`.
    NovelD { novelty_t: f64, novelty_next: f64, scale: f64 },
}

/// Count-adjusted bonus for arriving at `key_next`. The visit is recorded
/// before the bonus is evaluated.
pub fn rollout_novelty_bonus(table: &mut RolloutVisitTable, signal: NoveltySignal, key_next: u64) -> f64 {
    let count = table.visit(key_next);
    match signal {
        NoveltySignal::Ride { impact } => impact / (count as f64).sqrt(),
        NoveltySignal::NovelD {
            novelty_t,
            novelty_next,
            scale,
        } => {
            if count == 1 {
                (novelty_next - scale * novelty_t).max(0.0)
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noveld_pays_first_visit_only() {
        let mut t = RolloutVisitTable::new();
        let s = NoveltySignal::NovelD {
            novelty_t: 0.2,
            novelty_next: 1.0,
            scale: 0.5,
        };
        assert!((rollout_novelty_bonus(&mut t, s, 7) - 0.9).abs() < 1e-12);
        assert_eq!(rollout_novelty_bonus(&mut t, s, 7), 0.0);
        t.clear();
        assert!(t.is_empty());
        assert!(rollout_novelty_bonus(&mut t, s, 7) > 0.0);
    }

    #[test]
    fn ride_divides_by_root_count() {
        let mut t = RolloutVisitTable::new();
        let s = NoveltySignal::Ride { impact: 2.0 };
        let first = rollout_novelty_bonus(&mut t, s, 1);
        for _ in 0..2 {
            rollout_novelty_bonus(&mut t, s, 1);
        }
        let fourth = rollout_novelty_bonus(&mut t, s, 1);
        assert_eq!(fourth, first / 2.0);
        assert_eq!(t.total(), 4);
    }

    #[test]
    fn keys_quantize() {
        assert_eq!(observation_key(&[0.0, 1.0, 0.5]), observation_key(&[0.1, 1.05, 0.55]));
        assert_ne!(observation_key(&[0.0, 1.0, 0.5]), observation_key(&[0.0, 0.0, 0.5]));
    }
}
