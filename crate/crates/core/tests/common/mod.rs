#![allow(dead_code)]

use tcn_impedance::data::{GeneratorConfig, TraceDataset};
use tcn_impedance::tcn::{predict_trace, receptive_field, ModelParams, TcnConfig};
use tcn_impedance::{Rng, Tensor};

pub fn dataset(n_traces: usize, n_samples: usize, step: usize, noise_std: f64, seed: u64) -> TraceDataset {
    let (ai, seis) = GeneratorConfig {
        n_traces,
        n_samples,
        noise_std,
        seed,
        ..Default::default()
    }
    .generate()
    .unwrap();
    TraceDataset::with_step(seis, ai, step).unwrap()
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Parameters whose every effective weight is strictly positive and whose
/// biases are zero, so a nonnegative input produces a strictly positive
/// output exactly on the support of the impulse response.
pub fn positive_params(config: &TcnConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(config, &mut Rng::new(seed)).unwrap();
    for conv in p.convs_mut() {
        conv.v = conv.v.map(|x| x.abs() + 0.1).unwrap();
        conv.g = conv.g.map(|x| x.abs() + 0.1).unwrap();
        conv.bias = conv.bias.zeros_like();
    }
    p
}

/// Extent (first to last nonzero sample) of the response to a unit impulse.
/// Dilated taps can leave holes inside it, so this is not a count.
pub fn impulse_support(config: &TcnConfig, seed: u64) -> usize {
    let rf = receptive_field(config);
    let len = 3 * rf + 4;
    let mut x = Tensor::zeros(&[1, len]).unwrap();
    x.data_mut()[rf + 2] = 1.0;
    let y = predict_trace(&x, &positive_params(config, seed), config).unwrap();
    let nonzero: Vec<usize> = (0..len).filter(|&i| y.data()[i] != 0.0).collect();
    nonzero.last().unwrap() - nonzero[0] + 1
}

