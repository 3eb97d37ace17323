mod common;

use common::{all_architectures, finite_difference_check};
use rex_core::approximator::{LayerSpec, Network, Tensor};

#[test]
fn backprop_matches_finite_differences() {
    for arch in all_architectures() {
        for seed in [1, 2, 3] {
            let r = finite_difference_check(&arch, seed, 150);
            assert!(r.checked > 0);
            assert!(
                r.skipped_kinks * 20 < r.checked,
                "{}: too many kinks ({} of {})",
                arch.name,
                r.skipped_kinks,
                r.checked
            );
            assert!(
                r.max_rel_error < 1e-4,
                "{} seed {seed}: max rel error {}",
                arch.name,
                r.max_rel_error
            );
        }
    }
}

#[test]
fn softmax_and_tanh_layers_backprop() {
    let specs = [
        LayerSpec::linear(5, 6),
        LayerSpec::Tanh,
        LayerSpec::linear(6, 4),
        LayerSpec::Softmax,
    ];
    let net = Network::build(&specs, &[5], 9).unwrap();
    let x = Tensor::new(vec![3, 5], (0..15).map(|i| (i as f64 * 0.71).cos()).collect()).unwrap();
    let probe = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f64 * 1.3).sin()).collect()).unwrap();
    let (_, tape) = net.forward(&x).unwrap();
    let back = net.backward(&tape, &probe).unwrap();
    let loss = |x: &Tensor| -> f64 {
        let y = net.predict(x).unwrap();
        y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
    };
    for i in 0..15 {
        let mut xp = x.clone();
        xp.data_mut()[i] += 1e-5;
        let mut xm = x.clone();
        xm.data_mut()[i] -= 1e-5;
        let numeric = (loss(&xp) - loss(&xm)) / 2e-5;
        assert!((numeric - back.input.data()[i]).abs() < 1e-8);
    }
}

#[test]
fn softmax_outputs_positive_and_normalized() {
    let net = Network::build(&[LayerSpec::Softmax], &[6], 0).unwrap();
    let x = Tensor::new(vec![2, 6], vec![-30.0, 0.0, 5.0, 2.0, 40.0, -1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let y = net.predict(&x).unwrap();
    for r in 0..2 {
        let row = y.row(r);
        assert!(row.iter().all(|&p| p > 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
