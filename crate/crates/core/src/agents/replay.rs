//! Ring-buffer experience replay with optional proportional prioritization.

use std::collections::HashMap;

use rand::Rng;

use super::AgentError;
use crate::approximator::Tensor;

/// Binary sum tree over `capacity` leaves.
#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two().max(1);
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut node = self.leaves + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass` (`0 <= mass < total`).
    pub fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = self.nodes[2 * node];
            if mass < left || self.nodes[2 * node + 1] <= 0.0 {
                node *= 2;
            } else {
                mass -= left;
                node = 2 * node + 1;
            }
        }
        node - self.leaves
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    /// Environment step at which the transition was recorded.
    pub step: u64,
}

/// Sampled minibatch with the buffer slots it came from.
#[derive(Clone, Debug)]
pub struct ReplayBatch {
    pub observations: Tensor,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_observations: Tensor,
    pub slots: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Priorities {
    alpha: f64,
    tree: SumTree,
    max_priority: f64,
}

/// Fixed-capacity replay memory, oldest transitions evicted first.
///
/// Transition `n` (in insertion order) reads frames `n` and `n + 1` from a
/// ring of `capacity + 1` frames stored as `f32`, so along one trajectory each
/// observation is kept once. A transition that starts a new trajectory keeps
/// its own first observation.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    obs_shape: Vec<usize>,
    frame_len: usize,
    capacity: usize,
    frames: Vec<f32>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    steps: Vec<u64>,
    inserted: u64,
    last_next: Option<Vec<f32>>,
    /// Observations of transitions that start a new trajectory, by slot.
    starts: HashMap<usize, Vec<f32>>,
    priorities: Option<Priorities>,
}

impl ReplayBuffer {
    pub fn new(obs_shape: &[usize], capacity: usize) -> Result<Self, AgentError> {
        if capacity == 0 {
            return Err(AgentError::Config("replay capacity must be positive".into()));
        }
        let frame_len = obs_shape.iter().product();
        Ok(Self {
            obs_shape: obs_shape.to_vec(),
            frame_len,
            capacity,
            frames: Vec::new(),
            actions: vec![0; capacity],
            rewards: vec![0.0; capacity],
            steps: vec![0; capacity],
            inserted: 0,
            last_next: None,
            starts: HashMap::new(),
            priorities: None,
        })
    }

    /// Enables proportional prioritization with exponent `alpha`.
    pub fn prioritized(mut self, alpha: f64) -> Self {
        self.priorities = Some(Priorities {
            alpha,
            tree: SumTree::new(self.capacity),
            max_priority: 1.0,
        });
        self
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        (self.inserted as usize).min(self.capacity)
    }

    pub fn is_empty(&self) -> bool {
        self.inserted == 0
    }

    fn frame_slot(&self, n: u64) -> usize {
        (n % (self.capacity as u64 + 1)) as usize
    }

    fn write_frame(&mut self, slot: usize, data: &[f64]) {
        let w = self.frame_len;
        let needed = (slot + 1) * w;
        if self.frames.len() < needed {
            self.frames.resize(needed, 0.0);
        }
        for (dst, src) in self.frames[slot * w..needed].iter_mut().zip(data) {
            *dst = *src as f32;
        }
    }

    /// Observation of insertion `n`, which lives in transition slot `slot`.
    fn read_observation(&self, n: u64, slot: usize, out: &mut Vec<f64>) {
        match self.starts.get(&slot) {
            Some(f) => out.extend(f.iter().map(|&v| v as f64)),
            None => self.read_frame(self.frame_slot(n), out),
        }
    }

    fn read_frame(&self, slot: usize, out: &mut Vec<f64>) {
        let w = self.frame_len;
        out.extend(self.frames[slot * w..(slot + 1) * w].iter().map(|&v| v as f64));
    }

    /// Appends `(o, a, r, o')`. When `o` is not the previous `o'` (a new
    /// trajectory), `o` is kept separately so the previous transition's
    /// successor frame stays intact.
    pub fn push(&mut self, obs: &Tensor, action: usize, reward: f64, next_obs: &Tensor, step: u64) {
        let n = self.inserted;
        let slot = (n % self.capacity as u64) as usize;
        let contiguous = self.last_next.as_ref().is_some_and(|prev| {
            prev.iter().zip(obs.data()).all(|(a, b)| *a == *b as f32)
        });
        if n == 0 {
            self.write_frame(self.frame_slot(0), obs.data());
        }
        if contiguous || n == 0 {
            self.starts.remove(&slot);
        } else {
            self.starts.insert(slot, obs.data().iter().map(|&v| v as f32).collect());
        }
        self.write_frame(self.frame_slot(n + 1), next_obs.data());
        self.last_next = Some(next_obs.data().iter().map(|&v| v as f32).collect());
        self.actions[slot] = action;
        self.rewards[slot] = reward;
        self.steps[slot] = step;
        if let Some(p) = &mut self.priorities {
            p.tree.set(slot, p.max_priority.powf(p.alpha));
        }
        self.inserted += 1;
    }

    fn oldest(&self) -> u64 {
        self.inserted - self.len() as u64
    }

    /// Insertion index of the transition currently in `slot`.
    fn insertion_of(&self, slot: usize) -> u64 {
        let cap = self.capacity as u64;
        let oldest = self.oldest();
        let offset = (slot as u64 + cap - oldest % cap) % cap;
        oldest + offset
    }

    /// Transition at position `i` in age order (0 = oldest).
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len() {
            return None;
        }
        let n = self.oldest() + i as u64;
        Some(self.transition(n))
    }

    fn transition(&self, n: u64) -> Transition {
        let slot = (n % self.capacity as u64) as usize;
        let mut observation = Vec::with_capacity(self.frame_len);
        let mut next_observation = Vec::with_capacity(self.frame_len);
        self.read_observation(n, slot, &mut observation);
        self.read_frame(self.frame_slot(n + 1), &mut next_observation);
        Transition {
            observation,
            action: self.actions[slot],
            reward: self.rewards[slot],
            next_observation,
            step: self.steps[slot],
        }
    }

    /// Draws `k` transitions: uniformly, or proportionally to `p_i^alpha`
    /// when prioritized. Sampling is with replacement.
    pub fn sample<R: Rng>(&self, k: usize, rng: &mut R) -> Result<ReplayBatch, AgentError> {
        if self.is_empty() {
            return Err(AgentError::Empty("replay buffer"));
        }
        let len = self.len();
        let slots: Vec<usize> = match &self.priorities {
            Some(p) if p.tree.total() > 0.0 => (0..k)
                .map(|_| {
                    let mass = rng.gen::<f64>() * p.tree.total();
                    p.tree.find(mass).min(self.capacity - 1)
                })
                .collect(),
            _ => {
                let oldest = self.oldest();
                (0..k)
                    .map(|_| ((oldest + rng.gen_range(0..len) as u64) % self.capacity as u64) as usize)
                    .collect()
            }
        };
        let mut obs = Vec::with_capacity(k * self.frame_len);
        let mut next = Vec::with_capacity(k * self.frame_len);
        let mut actions = Vec::with_capacity(k);
        let mut rewards = Vec::with_capacity(k);
        for &slot in &slots {
            let n = self.insertion_of(slot);
            self.read_observation(n, slot, &mut obs);
            self.read_frame(self.frame_slot(n + 1), &mut next);
            actions.push(self.actions[slot]);
            rewards.push(self.rewards[slot]);
        }
        let mut shape = vec![k];
        shape.extend_from_slice(&self.obs_shape);
        Ok(ReplayBatch {
            observations: Tensor::new(shape.clone(), obs)?,
            actions,
            rewards,
            next_observations: Tensor::new(shape, next)?,
            slots,
        })
    }

    /// Sets sampled priorities to `|td| + 1e-6`. No-op when not prioritized.
    pub fn update_priorities(&mut self, slots: &[usize], td_errors: &[f64]) {
        if let Some(p) = &mut self.priorities {
            for (&slot, td) in slots.iter().zip(td_errors) {
                let priority = td.abs() + 1e-6;
                if priority.is_finite() {
                    p.max_priority = p.max_priority.max(priority);
                    p.tree.set(slot, priority.powf(p.alpha));
                }
            }
        }
    }

    /// Current sampling probability of the transition in `slot`.
    pub fn sampling_probability(&self, slot: usize) -> f64 {
        match &self.priorities {
            Some(p) => p.tree.get(slot) / p.tree.total(),
            None => 1.0 / self.len() as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(v: f64) -> Tensor {
        Tensor::new(vec![2], vec![v, v + 0.5]).unwrap()
    }

    fn fill(buf: &mut ReplayBuffer, n: u64) {
        for t in 0..n {
            buf.push(&obs(t as f64), (t % 4) as usize, t as f64, &obs(t as f64 + 1.0), t);
        }
    }

    #[test]
    fn eviction_keeps_latest() {
        let mut buf = ReplayBuffer::new(&[2], 5).unwrap();
        fill(&mut buf, 8);
        assert_eq!(buf.len(), 5);
        let steps: Vec<u64> = (0..5).map(|i| buf.get(i).unwrap().step).collect();
        assert_eq!(steps, vec![3, 4, 5, 6, 7]);
        let t = buf.get(4).unwrap();
        assert_eq!(t.observation, vec![7.0, 7.5]);
        assert_eq!(t.next_observation, vec![8.0, 8.5]);
        assert_eq!(buf.get(0).unwrap().observation, vec![3.0, 3.5]);
    }

    #[test]
    fn discontiguous_push_keeps_both_transitions() {
        let mut buf = ReplayBuffer::new(&[2], 2).unwrap();
        buf.push(&obs(0.0), 0, 0.0, &obs(1.0), 0);
        buf.push(&obs(9.0), 0, 0.0, &obs(10.0), 1);
        assert_eq!(buf.get(1).unwrap().observation, vec![9.0, 9.5]);
        assert_eq!(buf.get(0).unwrap().observation, vec![0.0, 0.5]);
        assert_eq!(buf.get(0).unwrap().next_observation, vec![1.0, 1.5]);
        // Overwriting the slot with a contiguous transition drops the stored start.
        buf.push(&obs(10.0), 0, 0.0, &obs(11.0), 2);
        buf.push(&obs(11.0), 0, 0.0, &obs(12.0), 3);
        assert_eq!(buf.get(1).unwrap().observation, vec![11.0, 11.5]);
        assert!(buf.starts.is_empty());
    }

    #[test]
    fn sampled_batch_is_consistent() {
        let mut buf = ReplayBuffer::new(&[2], 16).unwrap();
        fill(&mut buf, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = buf.sample(64, &mut rng).unwrap();
        for i in 0..64 {
            let r = b.rewards[i];
            assert!(r >= 24.0);
            assert_eq!(b.observations.row(i), &[r, r + 0.5]);
            assert_eq!(b.next_observations.row(i), &[r + 1.0, r + 1.5]);
            assert_eq!(b.actions[i], (r as usize) % 4);
        }
    }

    #[test]
    fn empty_buffer_cannot_sample() {
        let buf = ReplayBuffer::new(&[2], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample(1, &mut rng).is_err());
    }

    #[test]
    fn sum_tree_finds_intervals() {
        let mut t = SumTree::new(5);
        for (i, v) in [1.0, 2.0, 0.0, 3.0, 4.0].iter().enumerate() {
            t.set(i, *v);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 1);
        assert_eq!(t.find(2.99), 1);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(9.99), 4);
    }

    fn dominant_probability(alpha: f64) -> (f64, f64) {
        let mut buf = ReplayBuffer::new(&[2], 100).unwrap().prioritized(alpha);
        fill(&mut buf, 100);
        let slots: Vec<usize> = (0..100).collect();
        let mut td = vec![1.0 - 1e-6; 100];
        td[37] = 1e6 - 1e-6;
        buf.update_priorities(&slots, &td);
        let w = 1e6f64.powf(alpha);
        (buf.sampling_probability(37), w / (w + 99.0))
    }

    #[test]
    fn dominant_priority_matches_direct_probability() {
        let (p, expected) = dominant_probability(0.6);
        assert!((p - expected).abs() < 1e-9);
        assert!((p - 0.97570).abs() < 1e-4);
        let (p, expected) = dominant_probability(1.0);
        assert!((p - expected).abs() < 1e-9);
        assert!(p >= 0.99);
    }

    #[test]
    fn equal_or_zero_alpha_priorities_are_uniform() {
        let mut buf = ReplayBuffer::new(&[2], 10).unwrap().prioritized(0.0);
        fill(&mut buf, 10);
        buf.update_priorities(&[0, 1], &[100.0, 0.1]);
        for s in 0..10 {
            assert!((buf.sampling_probability(s) - 0.1).abs() < 1e-12);
        }
    }
}
