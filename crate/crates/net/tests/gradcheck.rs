mod common;

use brahmi_net::zoo::{self, Architecture, ZooConfig};
use brahmi_net::{backprop, Activation, LayerSpec, ModelGraph, PoolMode, Tensor};
use common::fd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inputs(shape: [usize; 4], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&shape, |_| rng.random_range(0.0..1.0))
}

// Random biases so no activation sits exactly on a kink.
fn jitter_biases(mut m: ModelGraph, seed: u64) -> ModelGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for group in m.params_mut() {
        if let Some(b) = group.get_mut(1) {
            b.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    }
    m
}

fn assert_all_params(model: ModelGraph, batch: usize, seed: u64) {
    let model = jitter_biases(model, seed);
    let [c, h, w] = model.input_shape();
    let x = inputs([batch, c, h, w], seed + 1);
    let labels: Vec<usize> = (0..batch).map(|i| i % model.num_classes()).collect();
    let (checked, bad) = fd::check_model(&model, &x, &labels, usize::MAX);
    assert!(checked > 0);
    assert!(bad.is_empty(), "{} of {checked} mismatched: {:?}", bad.len(), &bad[..bad.len().min(5)]);
}

#[test]
fn conv_with_stride_and_padding() {
    let m = ModelGraph::new(
        [2, 7, 6],
        vec![
            LayerSpec::conv(2, 3, 3, 2, 1),
            LayerSpec::act(Activation::Elu),
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 3 * 4 * 3, units: 3 },
            LayerSpec::act(Activation::Softmax),
        ],
        1,
    )
    .unwrap();
    assert_all_params(m, 3, 10);
}

#[test]
fn depthwise_separable_block() {
    let m = ModelGraph::new(
        [3, 8, 8],
        vec![
            LayerSpec::DepthwiseConv2d { channels: 3, kernel: 3, stride: 2, padding: 1, bias: true },
            LayerSpec::act(Activation::Sigmoid),
            LayerSpec::PointwiseConv2d { in_channels: 3, out_channels: 4, bias: true },
            LayerSpec::act(Activation::Elu),
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 4 * 4 * 4, units: 2 },
            LayerSpec::act(Activation::Softmax),
        ],
        2,
    )
    .unwrap();
    assert_all_params(m, 2, 20);
}

#[test]
fn pooling_layers() {
    for mode in [PoolMode::Max, PoolMode::Avg] {
        let m = ModelGraph::new(
            [1, 9, 9],
            vec![
                LayerSpec::conv(1, 2, 3, 1, 1),
                LayerSpec::act(Activation::Sigmoid),
                LayerSpec::pool(mode, 3, 2),
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 2 * 4 * 4, units: 3 },
                LayerSpec::act(Activation::Softmax),
            ],
            3,
        )
        .unwrap();
        assert_all_params(m, 2, 30);
    }
}

#[test]
fn dense_stack_with_every_activation() {
    let m = ModelGraph::new(
        [1, 2, 3],
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 6, units: 5 },
            LayerSpec::act(Activation::Sigmoid),
            LayerSpec::Dense { inputs: 5, units: 4 },
            LayerSpec::act(Activation::Elu),
            LayerSpec::Dense { inputs: 4, units: 3 },
            LayerSpec::act(Activation::Softmax),
        ],
        4,
    )
    .unwrap();
    assert_all_params(m, 4, 40);
}

#[test]
fn three_layer_conv_pool_dense_every_parameter() {
    let m = ModelGraph::new(
        [1, 6, 6],
        vec![
            LayerSpec::conv(1, 2, 3, 1, 0),
            LayerSpec::pool(PoolMode::Max, 2, 2),
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 8, units: 2 },
            LayerSpec::act(Activation::Softmax),
        ],
        5,
    )
    .unwrap();
    assert_all_params(m, 2, 50);
}

#[test]
fn miniature_architectures() {
    let cfg = ZooConfig { width: 0.125, seed: 6 };
    for arch in Architecture::ALL {
        let m = zoo::build(arch, [1, 32, 32], 2, &cfg).unwrap();
        let m = jitter_biases(m, 60);
        let x = inputs([2, 1, 32, 32], 61);
        let (checked, bad) = fd::check_model(&m, &x, &[0, 1], 12);
        assert!(checked > 50, "{arch}: only {checked} entries checked");
        assert!(bad.is_empty(), "{arch}: {:?}", &bad[..bad.len().min(5)]);
    }
}

#[test]
fn zero_weight_softmax_bias_gradient() {
    // zero weights: every row of the softmax is uniform, so the bias gradient
    // is 1/K minus the empirical label frequency
    let mut m = ModelGraph::new(
        [1, 2, 2],
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 4, units: 3 },
            LayerSpec::act(Activation::Softmax),
        ],
        0,
    )
    .unwrap();
    m.params_mut()[1][0].data_mut().fill(0.0);
    let x = inputs([6, 1, 2, 2], 7);
    let balanced = [0, 1, 2, 2, 1, 0];
    let g = backprop(&m, &x, &balanced).unwrap();
    assert!(g[1][1].data().iter().all(|v| v.abs() < 1e-15));
    let skewed = [0, 0, 0, 0, 1, 2];
    let g = backprop(&m, &x, &skewed).unwrap();
    let expected = [1.0 / 3.0 - 4.0 / 6.0, 1.0 / 3.0 - 1.0 / 6.0, 1.0 / 3.0 - 1.0 / 6.0];
    for (a, e) in g[1][1].data().iter().zip(expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn disconnected_channel_has_zero_gradient() {
    // pointwise weights reading channel 1 are zero, so nothing downstream
    // depends on the depthwise filter of channel 1
    let mut m = ModelGraph::new(
        [2, 5, 5],
        vec![
            LayerSpec::DepthwiseConv2d { channels: 2, kernel: 3, stride: 1, padding: 1, bias: true },
            LayerSpec::PointwiseConv2d { in_channels: 2, out_channels: 2, bias: true },
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 50, units: 2 },
            LayerSpec::act(Activation::Softmax),
        ],
        8,
    )
    .unwrap();
    let pw = m.params_mut()[1][0].data_mut();
    pw[1] = 0.0; // out 0, in 1
    pw[3] = 0.0; // out 1, in 1
    let x = inputs([2, 2, 5, 5], 9);
    let g = backprop(&m, &x, &[0, 1]).unwrap();
    assert!(g[0][0].data()[9..18].iter().all(|&v| v == 0.0));
    assert_eq!(g[0][1].data()[1], 0.0);
    assert!(g[0][0].data()[..9].iter().any(|&v| v != 0.0));
}
