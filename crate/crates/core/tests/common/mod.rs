#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rex_core::approximator::{architectures as arch, LayerSpec, Network, Tensor};

pub struct Architecture {
    pub name: &'static str,
    pub specs: Vec<LayerSpec>,
    pub input: Vec<usize>,
    /// Widths of concat side inputs.
    pub side: Vec<usize>,
}

/// Every network recipe used by agents and curiosity modules.
pub fn all_architectures() -> Vec<Architecture> {
    let a = |name, specs, input: &[usize], side: &[usize]| Architecture {
        name,
        specs,
        input: input.to_vec(),
        side: side.to_vec(),
    };
    vec![
        a("cnn-extractor", arch::cnn_extractor(11, 3), &[11, 11, 3], &[]),
        a("icm-encoder-image", arch::icm_encoder_image(11, 3), &[11, 11, 3], &[]),
        a("icm-forward", arch::icm_forward(128, 4), &[128], &[4]),
        a("icm-inverse", arch::icm_inverse(128, 4), &[256], &[]),
        a("icm-encoder-vector", arch::icm_encoder_vector(4), &[4], &[]),
        a("reward-model-image", arch::reward_model_image(11, 3, 4), &[11, 11, 3], &[4]),
        a("reward-model-vector", arch::reward_model_vector(4, 2), &[4], &[2]),
    ]
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares backprop against central differences (step 1e-4) of the scalar
/// loss `sum(output * probe)`. Perturbations that flip any ReLU are skipped
/// since the loss is not differentiable across the kink.
pub fn finite_difference_check(arch: &Architecture, seed: u64, per_tensor: usize) -> GradCheck {
    const EPS: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let mut net = Network::build(&arch.specs, &arch.input, seed).unwrap();
    let batch = 2;
    let mut in_shape = vec![batch];
    in_shape.extend(&arch.input);
    let n: usize = in_shape.iter().product();
    let input = Tensor::new(in_shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let sides: Vec<Tensor> = arch
        .side
        .iter()
        .map(|&w| {
            let hot: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..w)).collect();
            Tensor::one_hot(&hot, w)
        })
        .collect();
    let side_refs: Vec<&Tensor> = sides.iter().collect();
    let (out, tape) = net.forward_with(&input, &side_refs).unwrap();
    let probe = Tensor::new(
        out.shape().to_vec(),
        (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let analytic = net.backward(&tape, &probe).unwrap().params;
    let base_masks = tape.relu_masks();

    let loss_at = |net: &Network| -> (f64, bool) {
        let (o, t) = net.forward_with(&input, &side_refs).unwrap();
        let l = o.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum();
        (l, t.relu_masks() == base_masks)
    };

    let mut result = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    let tensor_count = net.params().len();
    for ti in 0..tensor_count {
        let len = net.params()[ti].len();
        let picks: Vec<usize> = if len <= per_tensor {
            (0..len).collect()
        } else {
            (0..per_tensor).map(|_| rng.gen_range(0..len)).collect()
        };
        for i in picks {
            let orig = net.params()[ti].data()[i];
            net.params_mut()[ti].data_mut()[i] = orig + EPS;
            let (lp, okp) = loss_at(&net);
            net.params_mut()[ti].data_mut()[i] = orig - EPS;
            let (lm, okm) = loss_at(&net);
            net.params_mut()[ti].data_mut()[i] = orig;
            if !(okp && okm) {
                result.skipped_kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * EPS);
            let err = rel_error(analytic.0[ti].data()[i], numeric);
            result.max_rel_error = result.max_rel_error.max(err);
            result.checked += 1;
        }
    }
    result
}

/// Two-sided rank-sum p-value by enumerating every relabelling of the pooled
/// sample (ties get mid-ranks).
pub fn rank_sum_by_enumeration(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n_all = pooled.len();
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|x| {
            let below = pooled.iter().filter(|y| *y < x).count() as f64;
            let equal = pooled.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let n = a.len();
    let mean = n as f64 * (n_all as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..n].iter().sum();
    let dev = (observed - mean).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n_all) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let s: f64 = (0..n_all).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (s - mean).abs() >= dev - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}
