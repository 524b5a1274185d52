use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::error::{NetError, Result};
use super::ops::{Aux, Op};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Weight initialization scheme; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Normal with std √(2 / fan_in), for layers followed by relu.
    HeNormal,
    /// Uniform on ±√(6 / (fan_in + fan_out)), for heads, projections and GRUs.
    GlorotUniform,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<usize>,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S> {
    pub spec: LayerSpec,
    pub params: Vec<Tensor<S>>,
    /// Per-sample output shape.
    pub out_shape: Vec<usize>,
}

/// Named contiguous layer range `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub end: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Linear outputs trained jointly on several regression targets.
    MultitaskLinear,
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub n_outputs: usize,
    pub kind: HeadKind,
}

/// Layer graph in topological order with a partition into segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub layers: Vec<Layer<S>>,
    pub segments: Vec<Segment>,
    /// Attachments stored alongside the weights (normalization stats,
    /// descriptor registry, vocabulary, ...).
    pub meta: BTreeMap<String, serde_json::Value>,
    /// RMSprop running averages of squared gradients, per layer per parameter.
    pub(crate) sq_avg: Vec<Vec<Vec<S>>>,
}

/// Forward activations kept for backward.
#[derive(Debug, Clone)]
pub struct Trace<S> {
    pub outputs: Vec<Tensor<S>>,
    aux: Vec<Aux<S>>,
}

impl<S: Scalar> Trace<S> {
    pub fn output(&self) -> &Tensor<S> {
        self.outputs.last().expect("model has layers")
    }
}

/// Parameter gradients per layer per parameter. Layers whose gradients were
/// not requested hold empty lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub params: Vec<Vec<Vec<S>>>,
    pub input: Option<Tensor<S>>,
}

fn init_param<S: Scalar>(op: &Op, index: usize, shape: &[usize], init: Init, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let n: usize = shape.iter().product();
    // the last parameter of every op is its bias
    let is_bias = index + 1 == op.param_shapes().len();
    if is_bias || init == Init::Zeros {
        return Tensor::zeros(shape);
    }
    let (fan_in, fan_out) = op.fans(index);
    let data = match init {
        Init::HeNormal => {
            let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            (0..n).map(|_| S::of(d.sample(rng))).collect()
        }
        Init::GlorotUniform => {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let d = Uniform::new_inclusive(-lim, lim).expect("valid range");
            (0..n).map(|_| S::of(d.sample(rng))).collect()
        }
        Init::Zeros => unreachable!(),
    };
    Tensor {
        shape: shape.to_vec(),
        data,
    }
}

/// Incremental model construction with seeded initialization.
pub struct ModelBuilder<S> {
    layers: Vec<Layer<S>>,
    segments: Vec<Segment>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> ModelBuilder<S> {
    pub fn new(seed: u64) -> Self {
        ModelBuilder {
            layers: Vec::new(),
            segments: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Starts a new segment at the next layer.
    pub fn segment(&mut self, name: impl Into<String>) {
        let at = self.layers.len();
        if let Some(last) = self.segments.last_mut() {
            last.end = at;
        }
        self.segments.push(Segment {
            name: name.into(),
            start: at,
            end: at,
            trainable: true,
        });
    }

    /// Number of layers added so far.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn out_shape(&self, layer: usize) -> &[usize] {
        &self.layers[layer].out_shape
    }

    pub fn add(&mut self, name: impl Into<String>, op: Op, inputs: &[usize], init: Init) -> Result<usize> {
        let spec = LayerSpec {
            name: name.into(),
            op,
            inputs: inputs.to_vec(),
            init,
        };
        let layer = build_layer(&self.layers, spec, |op, i, shape, init| {
            init_param(op, i, shape, init, &mut self.rng)
        })?;
        self.layers.push(layer);
        Ok(self.layers.len() - 1)
    }

    pub fn finish(mut self) -> Result<Model<S>> {
        if let Some(last) = self.segments.last_mut() {
            last.end = self.layers.len();
        }
        Model::assemble(self.layers, self.segments, BTreeMap::new())
    }
}

pub(crate) fn build_layer<S: Scalar>(
    existing: &[Layer<S>],
    spec: LayerSpec,
    mut make: impl FnMut(&Op, usize, &[usize], Init) -> Tensor<S>,
) -> Result<Layer<S>> {
    for &i in &spec.inputs {
        if i >= existing.len() {
            return Err(NetError::Spec(format!(
                "layer {} reads from layer {i} which does not precede it",
                spec.name
            )));
        }
    }
    let shapes: Vec<&[usize]> = spec.inputs.iter().map(|&i| existing[i].out_shape.as_slice()).collect();
    let out_shape = spec.op.output_shape(&shapes)?;
    let params = spec
        .op
        .param_shapes()
        .iter()
        .enumerate()
        .map(|(i, (_, shape))| make(&spec.op, i, shape, spec.init))
        .collect();
    Ok(Layer {
        spec,
        params,
        out_shape,
    })
}

impl<S: Scalar> Model<S> {
    pub(crate) fn assemble(
        layers: Vec<Layer<S>>,
        segments: Vec<Segment>,
        meta: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        if layers.is_empty() || !matches!(layers[0].spec.op, Op::Input { .. }) {
            return Err(NetError::Spec("first layer must be the input".into()));
        }
        let mut at = 0;
        for s in &segments {
            if s.start != at || s.end <= s.start {
                return Err(NetError::Spec(format!(
                    "segment {} does not continue the partition",
                    s.name
                )));
            }
            at = s.end;
        }
        if at != layers.len() {
            return Err(NetError::Spec("segments do not cover every layer".into()));
        }
        let sq_avg = layers
            .iter()
            .map(|l| l.params.iter().map(|p| vec![S::zero(); p.len()]).collect())
            .collect();
        Ok(Model {
            layers,
            segments,
            meta,
            sq_avg,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.layers[0].out_shape
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").out_shape.iter().product()
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.spec.name == name)
    }

    pub fn segment_of(&self, layer: usize) -> usize {
        self.segments
            .iter()
            .position(|s| (s.start..s.end).contains(&layer))
            .expect("segments partition layers")
    }

    pub fn is_trainable(&self, layer: usize) -> bool {
        self.segments[self.segment_of(layer)].trainable
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.params).map(|p| p.len()).sum()
    }

    pub fn trainable_parameter_count(&self) -> usize {
        (0..self.layers.len())
            .filter(|&i| self.is_trainable(i))
            .flat_map(|i| &self.layers[i].params)
            .map(|p| p.len())
            .sum()
    }

    pub fn segment_parameter_count(&self, segment: usize) -> usize {
        let s = &self.segments[segment];
        self.layers[s.start..s.end]
            .iter()
            .flat_map(|l| &l.params)
            .map(|p| p.len())
            .sum()
    }

    pub fn set_segment_trainable(&mut self, segment: usize, trainable: bool) -> Result<()> {
        let len = self.segments.len();
        let s = self.segments.get_mut(segment).ok_or(NetError::IndexOutOfRange {
            what: "segments",
            index: segment,
            len,
        })?;
        s.trainable = trainable;
        Ok(())
    }

    /// Freezes everything except the top `k` segments.
    pub fn train_top_segments(&mut self, k: usize) -> Result<()> {
        let n = self.segments.len();
        if k > n {
            return Err(NetError::IndexOutOfRange {
                what: "segments",
                index: k,
                len: n,
            });
        }
        for (i, s) in self.segments.iter_mut().enumerate() {
            s.trainable = i >= n - k;
        }
        Ok(())
    }

    pub fn reset_optimizer(&mut self) {
        for layer in &mut self.sq_avg {
            for p in layer {
                p.iter_mut().for_each(|v| *v = S::zero());
            }
        }
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<Trace<S>> {
        let want = self.input_shape();
        if x.shape.len() != want.len() + 1 || &x.shape[1..] != want {
            let mut expected = vec![x.batch()];
            expected.extend_from_slice(want);
            return Err(NetError::shape("model input", &expected, &x.shape));
        }
        if !x.all_finite() {
            return Err(NetError::NonFinite {
                layer: self.layers[0].spec.name.clone(),
            });
        }
        let mut outputs: Vec<Tensor<S>> = Vec::with_capacity(self.layers.len());
        let mut aux = Vec::with_capacity(self.layers.len());
        outputs.push(x.clone());
        aux.push(Aux::None);
        for layer in &self.layers[1..] {
            let inputs: Vec<&Tensor<S>> = layer.spec.inputs.iter().map(|&i| &outputs[i]).collect();
            let (out, a) = layer.spec.op.forward(&layer.params, &inputs, &layer.out_shape);
            if !out.all_finite() {
                return Err(NetError::NonFinite {
                    layer: layer.spec.name.clone(),
                });
            }
            outputs.push(out);
            aux.push(a);
        }
        Ok(Trace { outputs, aux })
    }

    pub fn predict(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut trace = self.forward(x)?;
        Ok(trace.outputs.pop().expect("non-empty"))
    }

    /// Gradients of every parameter and of the input.
    pub fn backward(&self, trace: &Trace<S>, grad_out: &Tensor<S>) -> Result<Gradients<S>> {
        self.backward_from(trace, grad_out, 0, |_| true)
    }

    /// Gradients of trainable parameters only; propagation stops below the
    /// lowest trainable layer.
    pub fn backward_trainable(&self, trace: &Trace<S>, grad_out: &Tensor<S>) -> Result<Gradients<S>> {
        let lowest = (0..self.layers.len())
            .find(|&i| self.is_trainable(i))
            .unwrap_or(self.layers.len());
        self.backward_from(trace, grad_out, lowest, |i| self.is_trainable(i))
    }

    fn backward_from(
        &self,
        trace: &Trace<S>,
        grad_out: &Tensor<S>,
        lowest: usize,
        wants_params: impl Fn(usize) -> bool,
    ) -> Result<Gradients<S>> {
        let n = self.layers.len();
        if grad_out.shape != trace.output().shape {
            return Err(NetError::shape(
                "output gradient",
                &trace.output().shape,
                &grad_out.shape,
            ));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..n).map(|_| None).collect();
        grads[n - 1] = Some(grad_out.clone());
        let mut params: Vec<Vec<Vec<S>>> = vec![Vec::new(); n];
        for i in (lowest.max(1)..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let layer = &self.layers[i];
            let inputs: Vec<&Tensor<S>> = layer.spec.inputs.iter().map(|&j| &trace.outputs[j]).collect();
            let want_inputs = layer.spec.inputs.iter().any(|&j| j >= lowest);
            let want_params = !layer.params.is_empty() && wants_params(i);
            let (dx, dp) = layer.spec.op.backward(
                &layer.params,
                &inputs,
                &trace.outputs[i],
                &trace.aux[i],
                &g,
                want_inputs,
                want_params,
            );
            params[i] = dp;
            for (&j, d) in layer.spec.inputs.iter().zip(dx) {
                let Some(d) = d else { continue };
                if j < lowest {
                    continue;
                }
                match &mut grads[j] {
                    Some(acc) => {
                        for (a, &v) in acc.data.iter_mut().zip(&d.data) {
                            *a += v;
                        }
                    }
                    slot => *slot = Some(d),
                }
            }
        }
        Ok(Gradients {
            params,
            input: if lowest == 0 { grads[0].take() } else { None },
        })
    }

    /// Swaps the last segment for a freshly initialized dense head.
    pub fn replace_head(&mut self, head: HeadSpec, seed: u64) -> Result<()> {
        let last = self.segments.last().expect("model has segments").clone();
        if last.start == 0 {
            return Err(NetError::Spec("model has no body below its head".into()));
        }
        let feature = self.layers[last.start]
            .spec
            .inputs
            .first()
            .copied()
            .ok_or_else(|| NetError::Spec("head reads no input".into()))?;
        self.layers.truncate(last.start);
        self.sq_avg.truncate(last.start);
        self.segments.pop();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = self.layers.len();
        let width = self.layers[feature].out_shape.iter().product();
        for spec in head_layers(head, feature, width, start) {
            let layer = build_layer(&self.layers, spec, |op, i, shape, init| {
                init_param(op, i, shape, init, &mut rng)
            })?;
            self.sq_avg
                .push(layer.params.iter().map(|p| vec![S::zero(); p.len()]).collect());
            self.layers.push(layer);
        }
        self.segments.push(Segment {
            name: last.name,
            start,
            end: self.layers.len(),
            trainable: true,
        });
        Ok(())
    }
}

/// Layer specs of a dense head reading from `feature`, to be appended
/// starting at layer index `start`.
pub fn head_layers(head: HeadSpec, feature: usize, width: usize, start: usize) -> Vec<LayerSpec> {
    let mut specs = vec![LayerSpec {
        name: "head_dense".into(),
        op: Op::Dense {
            inputs: width,
            units: head.n_outputs,
        },
        inputs: vec![feature],
        init: Init::GlorotUniform,
    }];
    if head.kind == HeadKind::Sigmoid {
        specs.push(LayerSpec {
            name: "head_sigmoid".into(),
            op: Op::Sigmoid,
            inputs: vec![start],
            init: Init::Zeros,
        });
    }
    specs
}
