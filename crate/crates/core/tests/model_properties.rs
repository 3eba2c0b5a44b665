mod common;

use common::{impulse_support, positive_params};
use proptest::prelude::*;
use tcn_impedance::nn::{InitScheme, PaddingMode};
use tcn_impedance::tcn::{predict_trace, receptive_field, ModelParams, TcnConfig};
use tcn_impedance::{Rng, Tensor};

#[test]
fn impulse_response_of_default_config_spans_505_samples() {
    let c = TcnConfig::default();
    assert_eq!(receptive_field(&c), 505);
    assert_eq!(impulse_support(&c, 1), 505);
    // Dilations start at 1, so here the support has no holes either.
    let rf = 505;
    let mut x = Tensor::zeros(&[1, 3 * rf]).unwrap();
    x.data_mut()[rf] = 1.0;
    let y = predict_trace(&x, &positive_params(&c, 1), &c).unwrap();
    assert_eq!(y.data().iter().filter(|v| **v != 0.0).count(), rf);
    let causal = TcnConfig {
        padding: PaddingMode::Causal,
        ..TcnConfig::default()
    };
    assert_eq!(impulse_support(&causal, 2), 505);
}

#[test]
fn impulse_response_matches_formula_for_random_configs() {
    let mut rng = Rng::new(2024);
    for case in 0..5 {
        let n_blocks = 1 + rng.below(4);
        let c = TcnConfig {
            kernel: 1 + rng.below(6),
            dropout_p: 0.2,
            channels: (0..n_blocks).map(|_| 1 + rng.below(5)).collect(),
            dilations: (0..n_blocks).map(|_| 1 + rng.below(8)).collect(),
            padding: if case % 2 == 0 { PaddingMode::Symmetric } else { PaddingMode::Causal },
            init: InitScheme::He,
        };
        assert_eq!(impulse_support(&c, case), receptive_field(&c), "{c:?}");
    }
}

#[test]
fn zeroed_main_paths_reduce_to_relu_of_input() {
    let c = TcnConfig::new(4, 1, 5, 0.2);
    let mut p = ModelParams::init(&c, &mut Rng::new(3)).unwrap();
    for b in &mut p.blocks {
        assert!(b.skip.is_none());
        for conv in [&mut b.conv1, &mut b.conv2] {
            conv.g = conv.g.zeros_like();
            conv.bias = conv.bias.zeros_like();
        }
    }
    // Head passes the block features through and ignores the raw trace.
    p.head.v = Tensor::new(&[1, 2, 1], vec![1.0, 0.0]).unwrap();
    p.head.g = Tensor::new(&[1], vec![1.0]).unwrap();
    p.head.bias = Tensor::zeros(&[1]).unwrap();

    let x = Tensor::randn(&[1, 64], &mut Rng::new(4), 0.0, 1.0).unwrap();
    let y = predict_trace(&x, &p, &c).unwrap();
    let expect: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
    assert_eq!(y.data(), &expect[..]);
}

#[test]
fn rescaling_directions_leaves_outputs_unchanged() {
    let c = TcnConfig::default();
    let p = ModelParams::init(&c, &mut Rng::new(5)).unwrap();
    let x = Tensor::randn(&[1, 400], &mut Rng::new(6), 0.0, 1.0).unwrap();
    let base = predict_trace(&x, &p, &c).unwrap();
    for scale in [0.1, 10.0] {
        for which in 0..p.convs().len() {
            let mut q = p.clone();
            if let Some(conv) = q.convs_mut().into_iter().nth(which) {
                conv.v = conv.v.scale(scale);
            }
            let y = predict_trace(&x, &q, &c).unwrap();
            let worst = y
                .data()
                .iter()
                .zip(base.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-10, "conv {which}, scale {scale}: {worst:e}");
        }
    }
}

#[test]
fn samples_outside_receptive_field_have_no_influence() {
    let c = TcnConfig::new(2, 3, 3, 0.2);
    let half = (receptive_field(&c) - 1) / 2;
    let p = ModelParams::init(&c, &mut Rng::new(8)).unwrap();
    let x = Tensor::randn(&[1, 80], &mut Rng::new(9), 0.0, 1.0).unwrap();
    let base = predict_trace(&x, &p, &c).unwrap();
    let k: usize = 40;
    let mut doubled = x.clone();
    doubled.data_mut()[k] *= 2.0;
    let y = predict_trace(&doubled, &p, &c).unwrap();
    for t in 0..80usize {
        if t.abs_diff(k) > half {
            assert_eq!(y.data()[t], base.data()[t], "output {t}");
        }
    }
}

#[test]
fn inference_is_bit_identical_across_calls() {
    let c = TcnConfig::default();
    let p = ModelParams::init(&c, &mut Rng::new(10)).unwrap();
    let x = Tensor::randn(&[1, 200], &mut Rng::new(11), 0.0, 1.0).unwrap();
    assert_eq!(predict_trace(&x, &p, &c).unwrap(), predict_trace(&x, &p, &c).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn output_length_equals_input_length(len in 16usize..=512, seed in any::<u64>()) {
        let c = TcnConfig::default();
        let p = ModelParams::init(&c, &mut Rng::new(seed)).unwrap();
        let x = Tensor::randn(&[1, len], &mut Rng::new(seed ^ 1), 0.0, 1.0).unwrap();
        let y = predict_trace(&x, &p, &c).unwrap();
        prop_assert_eq!(y.shape(), &[1, len]);
    }

    #[test]
    fn parameter_count_is_a_function_of_config(
        blocks in 1usize..5,
        width in 1usize..10,
        kernel in 1usize..7,
        seed in any::<u64>(),
    ) {
        let c = TcnConfig::new(blocks, width, kernel, 0.1);
        let p = ModelParams::init(&c, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(p.parameter_count(), c.parameter_count());
    }
}
