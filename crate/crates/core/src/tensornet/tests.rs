use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

const TOL: f64 = 1e-4;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Builds input → op (one input) and randomizes biases so that they are
/// exercised too.
fn single(op: Op, sample: &[usize], seed: u64) -> Model<f64> {
    let mut b = ModelBuilder::<f64>::new(seed);
    b.segment("all");
    let x = b
        .add("input", Op::Input { shape: sample.to_vec() }, &[], Init::Zeros)
        .unwrap();
    b.add("op", op, &[x], Init::GlorotUniform).unwrap();
    let mut m = b.finish().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for p in &mut m.layers[1].params {
        p.data.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    m
}

#[test]
fn gradcheck_every_layer_family() {
    let suite = gradcheck::layer_suite(10, 11).unwrap();
    let families: Vec<&str> = suite.iter().map(|f| f.family).collect();
    assert_eq!(
        families,
        [
            "conv2d",
            "maxpool",
            "relu",
            "sigmoid",
            "global_avg_pool",
            "dense",
            "gru",
            "residual_concat"
        ]
    );
    for f in &suite {
        assert!(f.cases >= 10, "{f:?}");
        assert!(f.max_rel_error < TOL, "{f:?}");
    }
}

#[test]
fn identity_kernel_is_identity() {
    let mut m = single(
        Op::Conv2d {
            kernel: 1,
            stride: 1,
            padding: Padding::Same,
            in_channels: 3,
            filters: 3,
        },
        &[4, 4, 3],
        0,
    );
    let k = &mut m.layers[1].params;
    k[0].data = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    k[1].data = vec![0.0; 3];
    let x = random_tensor(&mut ChaCha8Rng::seed_from_u64(1), &[2, 4, 4, 3]);
    assert_eq!(m.predict(&x).unwrap(), x);
}

#[test]
fn global_pool_of_constant() {
    let m = single(Op::GlobalAvgPool, &[5, 3, 2], 0);
    let y = m.predict(&Tensor::filled(&[1, 5, 3, 2], 0.25)).unwrap();
    assert_eq!(y.data, vec![0.25, 0.25]);
}

#[test]
fn zero_gradient_gives_zero_param_grads() {
    let m = single(Op::Dense { inputs: 6, units: 3 }, &[6], 4);
    let x = random_tensor(&mut ChaCha8Rng::seed_from_u64(2), &[4, 6]);
    let trace = m.forward(&x).unwrap();
    let g = m.backward(&trace, &Tensor::zeros(&[4, 3])).unwrap();
    assert!(g.params[1].iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn shape_mismatch_detected() {
    let m = single(Op::Dense { inputs: 6, units: 3 }, &[6], 4);
    let e = m.predict(&Tensor::zeros(&[2, 5])).unwrap_err();
    assert_eq!(e.kind(), "ShapeMismatch");
}

#[test]
fn nan_is_an_error() {
    let m = single(Op::Relu, &[2], 0);
    let x = Tensor::from_vec(&[1, 2], vec![f64::NAN, 1.0]).unwrap();
    assert_eq!(m.predict(&x).unwrap_err().kind(), "NonFinite");
}

fn two_segment(seed: u64) -> Model<f64> {
    let mut b = ModelBuilder::<f64>::new(seed);
    b.segment("body");
    let x = b.add("input", Op::Input { shape: vec![3] }, &[], Init::Zeros).unwrap();
    let d = b
        .add("hidden", Op::Dense { inputs: 3, units: 4 }, &[x], Init::HeNormal)
        .unwrap();
    let r = b.add("relu", Op::Relu, &[d], Init::Zeros).unwrap();
    b.segment("head");
    let o = b
        .add("out", Op::Dense { inputs: 4, units: 1 }, &[r], Init::GlorotUniform)
        .unwrap();
    b.add("sig", Op::Sigmoid, &[o], Init::Zeros).unwrap();
    b.finish().unwrap()
}

#[test]
fn rmsprop_first_step() {
    let mut m = single(Op::Dense { inputs: 1, units: 1 }, &[1], 0);
    let w0 = m.layers[1].params[0].data[0];
    let grads = Gradients {
        params: vec![vec![], vec![vec![1.0], vec![0.0]]],
        input: None,
    };
    let b0 = m.layers[1].params[1].data[0];
    rmsprop_step(&mut m, &grads, &TrainConfig::default()).unwrap();
    let dw = m.layers[1].params[0].data[0] - w0;
    let expected = -1e-3 / (0.1f64.sqrt() + 1e-8);
    assert!((dw - expected).abs() < 1e-12, "{dw}");
    assert!((dw + 3.1623e-3).abs() < 1e-7);
    assert_eq!(m.layers[1].params[1].data[0], b0);
}

fn toy_batch(rng: &mut ChaCha8Rng, n: usize) -> (Tensor<f64>, Tensor<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..n {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        ys.push(if v[0] + 0.5 * v[1] - v[2] > 0.0 { 1.0 } else { 0.0 });
        xs.extend_from_slice(&v);
    }
    (
        Tensor::from_vec(&[n, 3], xs).unwrap(),
        Tensor::from_vec(&[n, 1], ys).unwrap(),
    )
}

fn train(m: &mut Model<f64>, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let mut losses = Vec::new();
    for _ in 0..steps {
        let (x, y) = toy_batch(&mut rng, 32);
        let trace = m.forward(&x).unwrap();
        let loss = loss_bce_masked(trace.output(), &y, &[true; 32]).unwrap();
        let g = m.backward_trainable(&trace, &loss.grad).unwrap();
        rmsprop_step(m, &g, &cfg).unwrap();
        losses.push(loss.value);
    }
    losses
}

#[test]
fn loss_decreases_on_separable_data() {
    let mut m = two_segment(5);
    let losses = train(&mut m, 200, 6);
    let smooth = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    let windows: Vec<f64> = losses.chunks(40).map(smooth).collect();
    for pair in windows.windows(2) {
        assert!(pair[1] < pair[0], "{windows:?}");
    }
}

#[test]
fn frozen_segment_is_bit_identical() {
    let mut m = two_segment(7);
    m.set_segment_trainable(0, false).unwrap();
    let before = m.layers[1].params.clone();
    let head_before = m.layers[3].params.clone();
    train(&mut m, 100, 8);
    assert_eq!(m.layers[1].params, before);
    assert_ne!(m.layers[3].params, head_before);
    assert_eq!(m.set_segment_trainable(2, true).unwrap_err().kind(), "IndexOutOfRange");
}

#[test]
fn freezing_does_not_change_gradients() {
    let mut frozen = two_segment(3);
    let open = frozen.clone();
    frozen.set_segment_trainable(0, false).unwrap();
    let (x, _) = toy_batch(&mut ChaCha8Rng::seed_from_u64(1), 8);
    let g = Tensor::filled(&[8, 1], 0.3);
    let a = frozen.backward(&frozen.forward(&x).unwrap(), &g).unwrap();
    let b = open.backward(&open.forward(&x).unwrap(), &g).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unfreezing_everything_matches_never_frozen() {
    let mut a = two_segment(21);
    let mut b = a.clone();
    b.train_top_segments(0).unwrap();
    b.train_top_segments(2).unwrap();
    let la = train(&mut a, 50, 4);
    let lb = train(&mut b, 50, 4);
    assert_eq!(
        la.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        lb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(a, b);
}

#[test]
fn trainable_count_monotone_in_k() {
    let mut m: Model<f32> = crate::models::build_chemception(
        &crate::models::ChemceptionSpec {
            depth: 2,
            filters: 4,
            input: [16, 16, 1],
            head: HeadSpec {
                n_outputs: 2,
                kind: HeadKind::Linear,
            },
        },
        0,
    )
    .unwrap();
    let mut last = 0;
    for k in 0..=m.segments.len() {
        m.train_top_segments(k).unwrap();
        let n = m.trainable_parameter_count();
        assert!(n >= last);
        last = n;
    }
    assert_eq!(last, m.parameter_count());
}

#[test]
fn replace_head_keeps_body() {
    let mut m = two_segment(2);
    m.replace_head(
        HeadSpec {
            n_outputs: 3,
            kind: HeadKind::Linear,
        },
        9,
    )
    .unwrap();
    let body = m.layers[1].params.clone();
    m.replace_head(
        HeadSpec {
            n_outputs: 1,
            kind: HeadKind::Sigmoid,
        },
        10,
    )
    .unwrap();
    assert_eq!(m.layers[1].params, body);
    assert_eq!(m.segments.len(), 2);
    assert_eq!(m.layers.len(), 5);
    assert_eq!(m.output_width(), 1);
    let y = m.predict(&Tensor::filled(&[2, 3], 0.5)).unwrap();
    assert!(y.data.iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn save_load_round_trip() {
    let mut m = two_segment(12);
    m.meta
        .insert("norm".into(), serde_json::json!({"min": [0.0, 1.5], "max": [2.0, 3.0]}));
    m.set_segment_trainable(0, false).unwrap();
    let bytes = model_to_bytes(&m);
    let back: Model<f64> = model_from_bytes(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(model_to_bytes(&back), bytes);
    let x = Tensor::filled(&[2, 3], 0.7);
    let (ya, yb) = (m.predict(&x).unwrap(), back.predict(&x).unwrap());
    assert_eq!(
        ya.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        yb.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );

    let dir = std::env::temp_dir().join(format!("weakchem-core-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.bin");
    save_model(&m, &path).unwrap();
    assert_eq!(load_model::<f64>(&path).unwrap(), m);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn truncated_and_versioned_files() {
    let m = two_segment(1);
    let bytes = model_to_bytes(&m);
    for cut in [3, 12, 40, bytes.len() - 1] {
        let e = model_from_bytes::<f64>(&bytes[..cut]).unwrap_err();
        assert_eq!(e.kind(), "FormatError", "cut at {cut}");
    }
    let mut v = bytes.clone();
    v[8..12].copy_from_slice(&7u32.to_le_bytes());
    assert_eq!(model_from_bytes::<f64>(&v).unwrap_err().kind(), "VersionError");
}

#[test]
fn precision_conversion_on_load() {
    let m = two_segment(1);
    let narrow: Model<f32> = model_from_bytes(&model_to_bytes(&m)).unwrap();
    assert_eq!(narrow.parameter_count(), m.parameter_count());
    let back: Model<f64> = model_from_bytes(&model_to_bytes(&narrow)).unwrap();
    assert!((back.layers[1].params[0].data[0] - m.layers[1].params[0].data[0]).abs() < 1e-6);
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    let long_patience = TrainConfig {
        patience: 60,
        ..TrainConfig::default()
    };
    assert!(long_patience.validate().is_ok());
    for bad in [
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            rho: 1.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: -1e-3,
            ..TrainConfig::default()
        },
    ] {
        assert!(bad.validate().is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn concat_backward_splits_exactly(c1 in 1usize..4, c2 in 1usize..4, seed in 0u64..1000) {
        let mut b = ModelBuilder::<f64>::new(seed);
        b.segment("all");
        let x = b.add("input", Op::Input { shape: vec![2, 2, c1 + c2] }, &[], Init::Zeros).unwrap();
        let conv = |ci, co| Op::Conv2d { kernel: 1, stride: 1, padding: Padding::Same, in_channels: ci, filters: co };
        let a = b.add("a", conv(c1 + c2, c1), &[x], Init::GlorotUniform).unwrap();
        let bb = b.add("b", conv(c1 + c2, c2), &[x], Init::GlorotUniform).unwrap();
        b.add("cat", Op::Concat, &[a, bb], Init::Zeros).unwrap();
        let m = b.finish().unwrap();
        let input = random_tensor(&mut ChaCha8Rng::seed_from_u64(seed), &[1, 2, 2, c1 + c2]);
        let y = m.predict(&input).unwrap();
        prop_assert_eq!(y.shape.clone(), vec![1, 2, 2, c1 + c2]);
        let r = gradient_check(&m, &input, seed).unwrap();
        prop_assert!(r.max_rel_error < TOL);
    }
}
