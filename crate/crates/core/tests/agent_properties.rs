use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rex_core::agents::{
    clipped_surrogate, compute_gae, epsilon_at, normalize_advantages, EpsilonSchedule, ReplayBuffer,
};
use rex_core::approximator::Tensor;

/// Advantages by the defining sum of discounted TD errors.
fn gae_brute(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let v = |t: usize| if t < n { values[t] } else { bootstrap };
    (0..n)
        .map(|t| {
            (t..n)
                .map(|k| (gamma * lambda).powi((k - t) as i32) * (rewards[k] + gamma * v(k + 1) - v(k)))
                .sum()
        })
        .collect()
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    len.prop_flat_map(|n| (prop::collection::vec(-2.0..2.0f64, n), prop::collection::vec(-2.0..2.0f64, n)))
}

proptest! {
    #[test]
    fn gae_matches_brute_force(
        (rewards, values) in series(1..60),
        bootstrap in -2.0..2.0f64,
        gamma in 0.0..0.999f64,
        lambda in 0.0..=1.0f64,
    ) {
        let (adv, ret) = compute_gae(&rewards, &values, bootstrap, gamma, lambda).unwrap();
        let want = gae_brute(&rewards, &values, bootstrap, gamma, lambda);
        for t in 0..rewards.len() {
            prop_assert!((adv[t] - want[t]).abs() < 1e-9);
            prop_assert!((ret[t] - (adv[t] + values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_lambda_one_returns_are_discounted_sums((rewards, values) in series(1..100), bootstrap in -2.0..2.0f64) {
        let gamma = 0.99;
        let (_, ret) = compute_gae(&rewards, &values, bootstrap, gamma, 1.0).unwrap();
        let n = rewards.len();
        for t in 0..n {
            let g: f64 = (t..n).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum::<f64>()
                + gamma.powi((n - t) as i32) * bootstrap;
            prop_assert!((ret[t] - g).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_advantages_are_standard(adv in prop::collection::vec(-100.0..100.0f64, 2..200)) {
        let mean0 = adv.iter().sum::<f64>() / adv.len() as f64;
        prop_assume!(adv.iter().any(|a| (a - mean0).abs() > 1e-3));
        let mut a = adv.clone();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn surrogate_clip_semantics(ratio in 0.0..3.0f64, adv in -5.0..5.0f64, clip in 0.05..0.5f64) {
        let (value, grad) = clipped_surrogate(ratio, adv, clip);
        let expected = (ratio * adv).min(ratio.clamp(1.0 - clip, 1.0 + clip) * adv);
        prop_assert!((value - expected).abs() < 1e-12);
        if (1.0 - clip..=1.0 + clip).contains(&ratio) {
            // Inside the trust region the objective is exactly r * A.
            prop_assert_eq!(value, ratio * adv);
            prop_assert_eq!(grad, adv);
        }
        let pushing_out = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
        if pushing_out {
            prop_assert_eq!(grad, 0.0);
        }
    }

    #[test]
    fn informed_epsilon_is_periodic(t in 0u64..5_000_000, n in 1_000u64..1_000_000) {
        let s = EpsilonSchedule {
            initial: 1.0,
            final_eps: 0.05,
            fraction: 0.1,
            horizon: 2_000_000,
            restart_interval: Some(n),
        };
        prop_assert_eq!(epsilon_at(t, &s), epsilon_at(t + n, &s));
        prop_assert_eq!(epsilon_at(t - t % n, &s), 1.0);
        let e = epsilon_at(t, &s);
        prop_assert!((0.05..=1.0).contains(&e));
    }

    #[test]
    fn replay_keeps_newest_in_order(cap in 1usize..40, pushes in 1usize..120, broken in prop::collection::vec(any::<bool>(), 120)) {
        let mut buf = ReplayBuffer::new(&[2], cap).unwrap();
        let frame = |k: usize| Tensor::new(vec![2], vec![k as f64, -(k as f64)]).unwrap();
        let mut prev_next = 0usize;
        for i in 0..pushes {
            // Occasionally start a new trajectory so the stored frame must be replaced.
            let start = if broken[i] { 1000 + i } else { prev_next };
            let next = 2000 + i;
            buf.push(&frame(start), i % 3, i as f64, &frame(next), i as u64);
            prev_next = next;
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        let first = pushes - buf.len();
        let mut prev_next = if first == 0 { 0 } else { 2000 + first - 1 };
        for j in 0..buf.len() {
            let i = first + j;
            let tr = buf.get(j).unwrap();
            let start = if broken[i] { 1000 + i } else { prev_next };
            prop_assert_eq!(tr.reward, i as f64);
            prop_assert_eq!(tr.step, i as u64);
            prop_assert_eq!(tr.action, i % 3);
            prop_assert_eq!(tr.next_observation[0], (2000 + i) as f64);
            prop_assert_eq!(tr.observation[0], start as f64);
            prev_next = 2000 + i;
        }
        prop_assert!(buf.get(buf.len()).is_none());
    }
}

#[test]
fn prioritized_sampling_frequencies() {
    let cap = 8;
    let mut buf = ReplayBuffer::new(&[1], cap).unwrap().prioritized(0.6);
    let frame = |k: usize| Tensor::new(vec![1], vec![k as f64]).unwrap();
    for i in 0..cap {
        buf.push(&frame(i), 0, 0.0, &frame(i + 1), i as u64);
    }
    let td: Vec<f64> = (0..cap).map(|i| 0.25 * i as f64).collect();
    let slots: Vec<usize> = (0..cap).collect();
    buf.update_priorities(&slots, &td);
    let weights: Vec<f64> = td.iter().map(|d| (d.abs() + 1e-6).powf(0.6)).collect();
    let total: f64 = weights.iter().sum();

    let draws = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut counts = vec![0usize; cap];
    let mut left = draws;
    while left > 0 {
        let k = left.min(1000);
        for s in buf.sample(k, &mut rng).unwrap().slots {
            counts[s] += 1;
        }
        left -= k;
    }
    for i in 0..cap {
        let p = weights[i] / total;
        assert!((buf.sampling_probability(i) - p).abs() < 1e-12);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = counts[i] as f64 / draws as f64;
        assert!((freq - p).abs() <= 3.0 * se + 1e-9, "slot {i}: {freq} vs {p}");
    }
}
