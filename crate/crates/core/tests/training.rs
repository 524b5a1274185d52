use weakchem_core::models::{build_chemception, build_smiles2vec, ChemceptionSpec, HeadKind, HeadSpec, Smiles2VecSpec};
use weakchem_core::tensornet::{
    loss_bce_masked, loss_mse, model_from_bytes, model_to_bytes, rmsprop_step, TrainConfig,
};
use weakchem_core::{Model, Tensor};

fn step(m: &mut Model<f32>, x: &Tensor<f32>, y: &Tensor<f32>, cfg: &TrainConfig) -> f32 {
    let trace = m.forward(x).unwrap();
    let loss = loss_mse(trace.output(), y).unwrap();
    let grads = m.backward_trainable(&trace, &loss.grad).unwrap();
    rmsprop_step(m, &grads, cfg).unwrap();
    loss.value
}

fn pattern(shape: &[usize], period: usize) -> Tensor<f32> {
    let mut x = Tensor::zeros(shape);
    for (i, v) in x.data.iter_mut().enumerate() {
        if i % period == 0 {
            *v = 1.0;
        }
    }
    x
}

#[test]
fn image_model_fits_a_fixed_batch_and_survives_serialization() {
    let spec = ChemceptionSpec {
        depth: 1,
        filters: 4,
        input: [16, 16, 4],
        head: HeadSpec {
            n_outputs: 3,
            kind: HeadKind::MultitaskLinear,
        },
    };
    let mut m: Model<f32> = build_chemception(&spec, 5).unwrap();
    let x = pattern(&[4, 16, 16, 4], 13);
    let y = Tensor::from_vec(
        &[4, 3],
        vec![0.1, 0.5, 0.9, 0.2, 0.4, 0.6, 0.3, 0.3, 0.3, 0.0, 1.0, 0.5],
    )
    .unwrap();
    let cfg = TrainConfig::default();
    let first = step(&mut m, &x, &y, &cfg);
    let mut last = first;
    for _ in 0..60 {
        last = step(&mut m, &x, &y, &cfg);
    }
    assert!(last < first * 0.5, "{first} -> {last}");

    let restored: Model<f32> = model_from_bytes(&model_to_bytes(&m)).unwrap();
    assert_eq!(restored.predict(&x).unwrap(), m.predict(&x).unwrap());
    assert_eq!(restored.meta, m.meta);
}

#[test]
fn transplanted_text_body_keeps_its_features() {
    let spec = Smiles2VecSpec {
        vocab: 6,
        length: 8,
        units: 5,
        head: HeadSpec {
            n_outputs: 4,
            kind: HeadKind::MultitaskLinear,
        },
    };
    let pretrained: Model<f32> = build_smiles2vec(&spec, 1).unwrap();
    let mut tuned = pretrained.clone();
    tuned
        .replace_head(
            HeadSpec {
                n_outputs: 1,
                kind: HeadKind::Sigmoid,
            },
            2,
        )
        .unwrap();
    let n = tuned.segments.len();
    tuned.train_top_segments(1).unwrap();
    assert_eq!(tuned.trainable_parameter_count(), tuned.segment_parameter_count(n - 1));

    let x = pattern(&[3, 8, 6], 7);
    let y = Tensor::from_vec(&[3, 1], vec![1.0, 0.0, 1.0]).unwrap();
    let cfg = TrainConfig::default();
    for _ in 0..5 {
        let trace = tuned.forward(&x).unwrap();
        let loss = loss_bce_masked(trace.output(), &y, &[true; 3]).unwrap();
        let grads = tuned.backward_trainable(&trace, &loss.grad).unwrap();
        rmsprop_step(&mut tuned, &grads, &cfg).unwrap();
    }
    let body_end = tuned.segments[n - 1].start;
    for i in 0..body_end {
        assert_eq!(tuned.layers[i].params, pretrained.layers[i].params, "layer {i}");
    }
}
