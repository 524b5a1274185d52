use serde::{Deserialize, Serialize};

use super::{add_head, SPEC_KEY};
use crate::tensornet::{HeadSpec, Init, Model, ModelBuilder, NetError, Op, Padding, Result, Scalar};

/// Image model: 4×4 stride-2 stem, `depth` pairs of residual inception and
/// reduction segments, global average pooling and a dense head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChemceptionSpec {
    /// Number of (inception, reduction) segment pairs.
    pub depth: usize,
    /// Base filter count.
    pub filters: usize,
    /// Height, width, channels.
    pub input: [usize; 3],
    pub head: HeadSpec,
}

impl ChemceptionSpec {
    pub fn validate(&self) -> Result<()> {
        let [h, w, c] = self.input;
        if self.depth < 1 || self.filters < 4 {
            return Err(NetError::Spec(format!(
                "need depth >= 1 and filters >= 4, got {} and {}",
                self.depth, self.filters
            )));
        }
        if h != w || c == 0 {
            return Err(NetError::Spec(format!(
                "input must be square with channels, got {h}×{w}×{c}"
            )));
        }
        if h < 1 << (self.depth + 1) {
            return Err(NetError::Spec(format!(
                "image extent {h} is below 2^(depth+1) = {}",
                1 << (self.depth + 1)
            )));
        }
        if self.head.n_outputs == 0 {
            return Err(NetError::Spec("head needs at least one output".into()));
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        2 * self.depth + 2
    }
}

fn conv(kernel: usize, stride: usize, cin: usize, cout: usize) -> Op {
    Op::Conv2d {
        kernel,
        stride,
        padding: Padding::Same,
        in_channels: cin,
        filters: cout,
    }
}

fn conv_params(k: usize, cin: usize, cout: usize) -> usize {
    k * k * cin * cout + cout
}

/// Closed-form parameter count of [`build_chemception`].
pub fn chemception_parameter_count(spec: &ChemceptionSpec) -> usize {
    let f = spec.filters;
    let mut total = conv_params(4, spec.input[2], f);
    let mut c = f;
    for _ in 0..spec.depth {
        total += conv_params(1, c, f) * 2 + conv_params(3, f, f) + conv_params(1, 2 * f, c);
        total += conv_params(3, c, f) + conv_params(1, c, f) + conv_params(3, f, 2 * f);
        c += 3 * f;
    }
    total + c * spec.head.n_outputs + spec.head.n_outputs
}

pub fn build_chemception<S: Scalar>(spec: &ChemceptionSpec, seed: u64) -> Result<Model<S>> {
    spec.validate()?;
    let f = spec.filters;
    let mut b = ModelBuilder::<S>::new(seed);
    b.segment("stem");
    let input = b.add(
        "input",
        Op::Input {
            shape: spec.input.to_vec(),
        },
        &[],
        Init::Zeros,
    )?;
    let stem = b.add("stem_conv", conv(4, 2, spec.input[2], f), &[input], Init::HeNormal)?;
    let mut x = b.add("stem_relu", Op::Relu, &[stem], Init::Zeros)?;
    let mut c = f;
    for t in 1..=spec.depth {
        let p = format!("inception_resnet_{t}");
        b.segment(p.clone());
        let a = b.add(format!("{p}_a_conv"), conv(1, 1, c, f), &[x], Init::HeNormal)?;
        let a = b.add(format!("{p}_a_relu"), Op::Relu, &[a], Init::Zeros)?;
        let m = b.add(format!("{p}_b1_conv"), conv(1, 1, c, f), &[x], Init::HeNormal)?;
        let m = b.add(format!("{p}_b1_relu"), Op::Relu, &[m], Init::Zeros)?;
        let m = b.add(format!("{p}_b2_conv"), conv(3, 1, f, f), &[m], Init::HeNormal)?;
        let m = b.add(format!("{p}_b2_relu"), Op::Relu, &[m], Init::Zeros)?;
        let cat = b.add(format!("{p}_concat"), Op::Concat, &[a, m], Init::Zeros)?;
        let proj = b.add(
            format!("{p}_projection"),
            conv(1, 1, 2 * f, c),
            &[cat],
            Init::GlorotUniform,
        )?;
        let sum = b.add(format!("{p}_residual"), Op::Add, &[x, proj], Init::Zeros)?;
        x = b.add(format!("{p}_relu"), Op::Relu, &[sum], Init::Zeros)?;

        let p = format!("reduction_{t}");
        b.segment(p.clone());
        let a = b.add(format!("{p}_a_conv"), conv(3, 2, c, f), &[x], Init::HeNormal)?;
        let a = b.add(format!("{p}_a_relu"), Op::Relu, &[a], Init::Zeros)?;
        let m = b.add(format!("{p}_b1_conv"), conv(1, 1, c, f), &[x], Init::HeNormal)?;
        let m = b.add(format!("{p}_b1_relu"), Op::Relu, &[m], Init::Zeros)?;
        let m = b.add(format!("{p}_b2_conv"), conv(3, 2, f, 2 * f), &[m], Init::HeNormal)?;
        let m = b.add(format!("{p}_b2_relu"), Op::Relu, &[m], Init::Zeros)?;
        let pool = b.add(
            format!("{p}_pool"),
            Op::MaxPool {
                size: 3,
                stride: 2,
                padding: Padding::Same,
            },
            &[x],
            Init::Zeros,
        )?;
        x = b.add(format!("{p}_concat"), Op::Concat, &[a, m, pool], Init::Zeros)?;
        c += 3 * f;
        if t == spec.depth {
            x = b.add("global_pool", Op::GlobalAvgPool, &[x], Init::Zeros)?;
        }
    }
    add_head(&mut b, x, spec.head)?;
    let mut model = b.finish()?;
    model.meta.insert(
        SPEC_KEY.into(),
        serde_json::json!({ "family": "chemception", "spec": spec }),
    );
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::{HeadKind, Tensor};

    fn spec(depth: usize, filters: usize, size: usize, ch: usize, n: usize) -> ChemceptionSpec {
        ChemceptionSpec {
            depth,
            filters,
            input: [size, size, ch],
            head: HeadSpec {
                n_outputs: n,
                kind: HeadKind::Sigmoid,
            },
        }
    }

    #[test]
    fn segment_counts() {
        let m: Model<f32> = build_chemception(&spec(3, 16, 80, 1, 10), 0).unwrap();
        assert_eq!(m.segments.len(), 8);
        let names: Vec<&str> = m.segments.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names[0], "stem");
        assert_eq!(names[7], "head");
        // conv layers per body segment: 4 inception, 3 reduction
        let convs = |s: usize| {
            let seg = &m.segments[s];
            m.layers[seg.start..seg.end]
                .iter()
                .filter(|l| matches!(l.spec.op, Op::Conv2d { .. }))
                .count()
        };
        assert_eq!(convs(0), 1);
        assert_eq!(convs(1), 4);
        assert_eq!(convs(2), 3);
    }

    #[test]
    fn forward_shape() {
        let m: Model<f64> = build_chemception(&spec(1, 4, 16, 1, 1), 1).unwrap();
        let x = Tensor::filled(&[3, 16, 16, 1], 0.1);
        assert_eq!(m.predict(&x).unwrap().shape, vec![3, 1]);
    }

    #[test]
    fn parameter_count_closed_form() {
        for s in [spec(1, 4, 16, 1, 1), spec(2, 8, 40, 4, 10), spec(3, 16, 80, 1, 10)] {
            let m: Model<f32> = build_chemception(&s, 0).unwrap();
            assert_eq!(m.parameter_count(), chemception_parameter_count(&s));
        }
    }

    #[test]
    fn too_small_extent() {
        let e = build_chemception::<f32>(&spec(3, 4, 8, 1, 1), 0).unwrap_err();
        assert_eq!(e.kind(), "SpecError");
        assert!(build_chemception::<f32>(&spec(1, 3, 16, 1, 1), 0).is_err());
    }

    #[test]
    fn builder_is_pure() {
        let s = spec(2, 8, 40, 4, 10);
        let a: Model<f32> = build_chemception(&s, 9).unwrap();
        let b: Model<f32> = build_chemception(&s, 9).unwrap();
        assert_eq!(a, b);
        let c: Model<f32> = build_chemception(&s, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_projection_is_identity() {
        let s = spec(2, 4, 16, 1, 1);
        let mut m: Model<f64> = build_chemception(&s, 2).unwrap();
        for l in &mut m.layers {
            if l.spec.name.ends_with("_projection") {
                l.params
                    .iter_mut()
                    .for_each(|p| p.data.iter_mut().for_each(|v| *v = 0.0));
            }
        }
        let x = Tensor::from_vec(
            &[1, 16, 16, 1],
            (0..256).map(|i| ((i * 37) % 11) as f64 / 10.0).collect(),
        )
        .unwrap();
        let trace = m.forward(&x).unwrap();
        let stem = m.layer_index("stem_relu").unwrap();
        let ir = m.layer_index("inception_resnet_1_relu").unwrap();
        assert_eq!(trace.outputs[stem], trace.outputs[ir]);
    }
}
