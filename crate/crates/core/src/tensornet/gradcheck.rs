//! Central finite-difference check of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::error::Result;
use super::model::{Init, Model, ModelBuilder};
use super::ops::{Op, Padding};
use super::tensor::Tensor;

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Compares backward against central differences for every parameter and
/// input entry, under the scalar objective Σ cᵢ·yᵢ with random weights c.
pub fn gradient_check(model: &Model<f64>, x: &Tensor<f64>, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = model.forward(x)?;
    let dist = Uniform::new(-1.0, 1.0).expect("valid range");
    let weights = Tensor {
        shape: trace.output().shape.clone(),
        data: (0..trace.output().len()).map(|_| dist.sample(&mut rng)).collect(),
    };
    let objective = |m: &Model<f64>, x: &Tensor<f64>| -> Result<f64> {
        let y = m.predict(x)?;
        Ok(y.data.iter().zip(&weights.data).map(|(a, b)| a * b).sum())
    };
    let grads = model.backward(&trace, &weights)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut probe = model.clone();
    for (li, layer) in model.layers.iter().enumerate() {
        for (pi, p) in layer.params.iter().enumerate() {
            for k in 0..p.len() {
                let orig = p.data[k];
                probe.layers[li].params[pi].data[k] = orig + STEP;
                let up = objective(&probe, x)?;
                probe.layers[li].params[pi].data[k] = orig - STEP;
                let dn = objective(&probe, x)?;
                probe.layers[li].params[pi].data[k] = orig;
                let numeric = (up - dn) / (2.0 * STEP);
                worst = worst.max(rel_err(grads.params[li][pi][k], numeric));
                checked += 1;
            }
        }
    }
    if let Some(dx) = &grads.input {
        let mut xp = x.clone();
        for k in 0..x.len() {
            let orig = x.data[k];
            xp.data[k] = orig + STEP;
            let up = objective(model, &xp)?;
            xp.data[k] = orig - STEP;
            let dn = objective(model, &xp)?;
            xp.data[k] = orig;
            worst = worst.max(rel_err(dx.data[k], (up - dn) / (2.0 * STEP)));
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        checked,
    })
}

/// Worst relative error over all random cases of one layer family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCheck {
    pub family: &'static str,
    pub cases: usize,
    pub max_rel_error: f64,
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let dist = Uniform::new(-1.0, 1.0).expect("valid range");
    Tensor::from_vec(shape, (0..n).map(|_| dist.sample(rng)).collect()).expect("shape matches")
}

/// input → op, with biases randomized so their gradients are exercised.
fn single(op: Op, sample: &[usize], seed: u64) -> Result<Model<f64>> {
    let mut b = ModelBuilder::<f64>::new(seed);
    b.segment("all");
    let x = b.add("input", Op::Input { shape: sample.to_vec() }, &[], Init::Zeros)?;
    b.add("op", op, &[x], Init::GlorotUniform)?;
    let mut m = b.finish()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    let dist = Uniform::new(-0.5, 0.5).expect("valid range");
    for p in &mut m.layers[1].params {
        p.data.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    }
    Ok(m)
}

fn conv(kernel: usize, stride: usize, padding: Padding, in_channels: usize, filters: usize) -> Op {
    Op::Conv2d {
        kernel,
        stride,
        padding,
        in_channels,
        filters,
    }
}

/// Runs `trials` random shapes for every layer family: convolutions over all
/// kernel/stride/padding variants, pointwise activations, pools, dense,
/// GRU in both output modes, and a residual + concat graph.
pub fn layer_suite(trials: usize, seed: u64) -> Result<Vec<FamilyCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<FamilyCheck> = Vec::new();
    let mut record = |family: &'static str, r: GradCheck| match out.iter_mut().find(|f| f.family == family) {
        Some(f) => {
            f.cases += 1;
            f.max_rel_error = f.max_rel_error.max(r.max_rel_error);
        }
        None => out.push(FamilyCheck {
            family,
            cases: 1,
            max_rel_error: r.max_rel_error,
        }),
    };
    let dim = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| Uniform::new(lo, hi).expect("valid range").sample(rng);
    for trial in 0..trials as u64 {
        for &(k, s) in &[(1, 1), (3, 1), (3, 2), (4, 2), (4, 1), (1, 2)] {
            for padding in [Padding::Same, Padding::Valid] {
                let (h, w) = (dim(&mut rng, k.max(2), 7), dim(&mut rng, k.max(2), 7));
                let (ci, co) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 4));
                let m = single(conv(k, s, padding, ci, co), &[h, w, ci], trial)?;
                let x = random_tensor(&mut rng, &[2, h, w, ci]);
                record("conv2d", gradient_check(&m, &x, trial)?);
            }
        }

        let (h, w, c) = (dim(&mut rng, 2, 7), dim(&mut rng, 2, 7), dim(&mut rng, 1, 4));
        let x = random_tensor(&mut rng, &[2, h, w, c]);
        let pools = [
            (
                "maxpool",
                Op::MaxPool {
                    size: 3,
                    stride: 2,
                    padding: Padding::Same,
                },
            ),
            (
                "maxpool",
                Op::MaxPool {
                    size: 2,
                    stride: 1,
                    padding: Padding::Valid,
                },
            ),
            ("relu", Op::Relu),
            ("sigmoid", Op::Sigmoid),
            ("global_avg_pool", Op::GlobalAvgPool),
        ];
        for (family, op) in pools {
            record(family, gradient_check(&single(op, &[h, w, c], trial)?, &x, trial)?);
        }
        let units = dim(&mut rng, 1, 5);
        let dense = single(
            Op::Dense {
                inputs: h * w * c,
                units,
            },
            &[h, w, c],
            trial,
        )?;
        record("dense", gradient_check(&dense, &x, trial)?);

        let (t, d, u) = (dim(&mut rng, 1, 6), dim(&mut rng, 1, 5), dim(&mut rng, 1, 5));
        let xs = random_tensor(&mut rng, &[2, t, d]);
        for return_sequences in [false, true] {
            let op = Op::Gru {
                inputs: d,
                units: u,
                return_sequences,
            };
            record("gru", gradient_check(&single(op, &[t, d], trial)?, &xs, trial)?);
        }

        let (h, w, c) = (dim(&mut rng, 2, 6), dim(&mut rng, 2, 6), dim(&mut rng, 1, 4));
        let mut b = ModelBuilder::<f64>::new(trial);
        b.segment("all");
        let x = b.add("input", Op::Input { shape: vec![h, w, c] }, &[], Init::Zeros)?;
        let a = b.add("a", conv(3, 1, Padding::Same, c, 2), &[x], Init::GlorotUniform)?;
        let s = b.add("s", Op::Sigmoid, &[a], Init::Zeros)?;
        let cat = b.add("cat", Op::Concat, &[x, s], Init::Zeros)?;
        let proj = b.add("proj", conv(3, 1, Padding::Same, c + 2, c), &[cat], Init::GlorotUniform)?;
        b.add("sum", Op::Add, &[x, proj], Init::Zeros)?;
        let m = b.finish()?;
        let input = random_tensor(&mut rng, &[2, h, w, c]);
        record("residual_concat", gradient_check(&m, &input, trial)?);
    }
    Ok(out)
}
