//! Layer kernels. Image tensors are NHWC, sequences are (batch, time,
//! feature). Convolution kernels are stored as [k, k, in, out].

use serde::{Deserialize, Serialize};

use super::error::{NetError, Result};
use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Op {
    Input {
        shape: Vec<usize>,
    },
    Conv2d {
        kernel: usize,
        stride: usize,
        padding: Padding,
        in_channels: usize,
        filters: usize,
    },
    Relu,
    Sigmoid,
    Add,
    Concat,
    MaxPool {
        size: usize,
        stride: usize,
        padding: Padding,
    },
    GlobalAvgPool,
    Dense {
        inputs: usize,
        units: usize,
    },
    Gru {
        inputs: usize,
        units: usize,
        return_sequences: bool,
    },
}

/// Per-layer values kept from the forward pass for backward.
#[derive(Debug, Clone)]
pub enum Aux<S> {
    None,
    Argmax(Vec<usize>),
    Gru {
        z: Vec<S>,
        r: Vec<S>,
        n: Vec<S>,
        /// Hidden states including the initial zero state: [B, T+1, U].
        h: Vec<S>,
    },
}

/// Output length and leading pad for one spatial axis.
pub fn conv_geometry(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Some((out, total / 2))
        }
        Padding::Valid => (input >= kernel).then(|| ((input - kernel) / stride + 1, 0)),
    }
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Conv2d { .. } => "conv2d",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::Add => "add",
            Op::Concat => "concat",
            Op::MaxPool { .. } => "max_pool",
            Op::GlobalAvgPool => "global_avg_pool",
            Op::Dense { .. } => "dense",
            Op::Gru { .. } => "gru",
        }
    }

    /// Named parameter shapes in storage order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            Op::Conv2d {
                kernel,
                in_channels,
                filters,
                ..
            } => vec![
                ("kernel", vec![kernel, kernel, in_channels, filters]),
                ("bias", vec![filters]),
            ],
            Op::Dense { inputs, units } => vec![("kernel", vec![inputs, units]), ("bias", vec![units])],
            Op::Gru { inputs, units, .. } => vec![
                ("input_kernel", vec![inputs, 3 * units]),
                ("recurrent_kernel", vec![units, 3 * units]),
                ("bias", vec![3 * units]),
            ],
            _ => Vec::new(),
        }
    }

    /// (fan_in, fan_out) of the parameter at `index`, used by initializers.
    pub fn fans(&self, index: usize) -> (usize, usize) {
        match *self {
            Op::Conv2d {
                kernel,
                in_channels,
                filters,
                ..
            } => (kernel * kernel * in_channels, kernel * kernel * filters),
            Op::Dense { inputs, units } => (inputs, units),
            Op::Gru { inputs, units, .. } => {
                if index == 0 {
                    (inputs, 3 * units)
                } else {
                    (units, 3 * units)
                }
            }
            _ => (1, 1),
        }
    }

    /// Per-sample output shape given per-sample input shapes.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        let arity = match self {
            Op::Input { .. } => 0,
            Op::Add | Op::Concat => inputs.len().max(2),
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(NetError::Spec(format!(
                "{} takes {arity} inputs, got {}",
                self.name(),
                inputs.len()
            )));
        }
        let image = |s: &[usize]| -> Result<(usize, usize, usize)> {
            match *s {
                [h, w, c] => Ok((h, w, c)),
                _ => Err(NetError::Spec(format!(
                    "{} expects an H×W×C input, got {s:?}",
                    self.name()
                ))),
            }
        };
        match self {
            Op::Input { shape } => Ok(shape.clone()),
            Op::Conv2d {
                kernel,
                stride,
                padding,
                in_channels,
                filters,
            } => {
                let (h, w, c) = image(inputs[0])?;
                if c != *in_channels {
                    return Err(NetError::shape("conv2d channels", &[*in_channels], &[c]));
                }
                let oh = conv_geometry(h, *kernel, *stride, *padding);
                let ow = conv_geometry(w, *kernel, *stride, *padding);
                match (oh, ow) {
                    (Some((oh, _)), Some((ow, _))) => Ok(vec![oh, ow, *filters]),
                    _ => Err(NetError::Spec(format!("input {h}×{w} smaller than kernel {kernel}"))),
                }
            }
            Op::MaxPool { size, stride, padding } => {
                let (h, w, c) = image(inputs[0])?;
                match (
                    conv_geometry(h, *size, *stride, *padding),
                    conv_geometry(w, *size, *stride, *padding),
                ) {
                    (Some((oh, _)), Some((ow, _))) => Ok(vec![oh, ow, c]),
                    _ => Err(NetError::Spec(format!("input {h}×{w} smaller than pool {size}"))),
                }
            }
            Op::Relu | Op::Sigmoid => Ok(inputs[0].to_vec()),
            Op::Add => {
                for s in &inputs[1..] {
                    if *s != inputs[0] {
                        return Err(NetError::shape("add", inputs[0], s));
                    }
                }
                Ok(inputs[0].to_vec())
            }
            Op::Concat => {
                let lead = &inputs[0][..inputs[0].len() - 1];
                let mut channels = 0;
                for s in inputs {
                    if s.is_empty() || &s[..s.len() - 1] != lead {
                        return Err(NetError::shape("concat", inputs[0], s));
                    }
                    channels += s[s.len() - 1];
                }
                let mut out = lead.to_vec();
                out.push(channels);
                Ok(out)
            }
            Op::GlobalAvgPool => {
                let (_, _, c) = image(inputs[0])?;
                Ok(vec![c])
            }
            Op::Dense { inputs: n, units } => {
                let got: usize = inputs[0].iter().product();
                if got != *n {
                    return Err(NetError::shape("dense inputs", &[*n], &[got]));
                }
                Ok(vec![*units])
            }
            Op::Gru {
                inputs: d,
                units,
                return_sequences,
            } => match *inputs[0] {
                [t, f] if f == *d => Ok(if *return_sequences {
                    vec![t, *units]
                } else {
                    vec![*units]
                }),
                _ => Err(NetError::shape("gru input", &[0, *d], inputs[0])),
            },
        }
    }

    pub fn forward<S: Scalar>(
        &self,
        params: &[Tensor<S>],
        inputs: &[&Tensor<S>],
        out_shape: &[usize],
    ) -> (Tensor<S>, Aux<S>) {
        let batch = inputs.first().map(|t| t.batch()).unwrap_or(0);
        let mut shape = vec![batch];
        shape.extend_from_slice(out_shape);
        match self {
            Op::Input { .. } => unreachable!("input layers are fed directly"),
            Op::Conv2d {
                kernel,
                stride,
                padding,
                ..
            } => (
                conv_forward(inputs[0], &params[0], &params[1], *kernel, *stride, *padding, &shape),
                Aux::None,
            ),
            Op::Relu => (map(inputs[0], |v| if v > S::zero() { v } else { S::zero() }), Aux::None),
            Op::Sigmoid => (map(inputs[0], sigmoid), Aux::None),
            Op::Add => {
                let mut out = inputs[0].clone();
                for t in &inputs[1..] {
                    for (o, &v) in out.data.iter_mut().zip(&t.data) {
                        *o += v;
                    }
                }
                (out, Aux::None)
            }
            Op::Concat => (concat_forward(inputs, &shape), Aux::None),
            Op::MaxPool { size, stride, padding } => {
                let (out, arg) = maxpool_forward(inputs[0], *size, *stride, *padding, &shape);
                (out, Aux::Argmax(arg))
            }
            Op::GlobalAvgPool => (gap_forward(inputs[0]), Aux::None),
            Op::Dense { inputs: n, units } => {
                let x = inputs[0];
                let mut out = Tensor::zeros(&shape);
                for b in 0..batch {
                    out.data[b * units..(b + 1) * units].copy_from_slice(&params[1].data);
                }
                gemm(&x.data, &params[0].data, &mut out.data, batch, *n, *units);
                (out, Aux::None)
            }
            Op::Gru {
                units,
                return_sequences,
                ..
            } => gru_forward(inputs[0], params, *units, *return_sequences, &shape),
        }
    }

    /// Returns (input gradients, parameter gradients). Input gradients are
    /// only produced when `want_inputs`; parameter gradients only when
    /// `want_params`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<S: Scalar>(
        &self,
        params: &[Tensor<S>],
        inputs: &[&Tensor<S>],
        output: &Tensor<S>,
        aux: &Aux<S>,
        grad: &Tensor<S>,
        want_inputs: bool,
        want_params: bool,
    ) -> (Vec<Option<Tensor<S>>>, Vec<Vec<S>>) {
        let none = |n: usize| (0..n).map(|_| None).collect::<Vec<_>>();
        match self {
            Op::Input { .. } => (Vec::new(), Vec::new()),
            Op::Conv2d {
                kernel,
                stride,
                padding,
                ..
            } => {
                let (dx, dw, db) = conv_backward(
                    inputs[0],
                    &params[0],
                    grad,
                    *kernel,
                    *stride,
                    *padding,
                    want_inputs,
                    want_params,
                );
                let pg = if want_params { vec![dw, db] } else { Vec::new() };
                (vec![dx], pg)
            }
            Op::Relu => {
                if !want_inputs {
                    return (none(1), Vec::new());
                }
                let mut dx = grad.clone();
                for (d, &x) in dx.data.iter_mut().zip(&inputs[0].data) {
                    if x <= S::zero() {
                        *d = S::zero();
                    }
                }
                (vec![Some(dx)], Vec::new())
            }
            Op::Sigmoid => {
                if !want_inputs {
                    return (none(1), Vec::new());
                }
                let mut dx = grad.clone();
                for (d, &y) in dx.data.iter_mut().zip(&output.data) {
                    *d *= y * (S::one() - y);
                }
                (vec![Some(dx)], Vec::new())
            }
            Op::Add => {
                if !want_inputs {
                    return (none(inputs.len()), Vec::new());
                }
                (inputs.iter().map(|_| Some(grad.clone())).collect(), Vec::new())
            }
            Op::Concat => {
                if !want_inputs {
                    return (none(inputs.len()), Vec::new());
                }
                (
                    concat_backward(inputs, grad).into_iter().map(Some).collect(),
                    Vec::new(),
                )
            }
            Op::MaxPool { .. } => {
                if !want_inputs {
                    return (none(1), Vec::new());
                }
                let Aux::Argmax(arg) = aux else {
                    unreachable!("max pool caches argmax")
                };
                let mut dx = Tensor::zeros(&inputs[0].shape);
                for (&src, &g) in arg.iter().zip(&grad.data) {
                    dx.data[src] += g;
                }
                (vec![Some(dx)], Vec::new())
            }
            Op::GlobalAvgPool => {
                if !want_inputs {
                    return (none(1), Vec::new());
                }
                let x = inputs[0];
                let (b, h, w, c) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
                let scale = S::one() / S::of((h * w) as f64);
                let mut dx = Tensor::zeros(&x.shape);
                for bi in 0..b {
                    let g = &grad.data[bi * c..(bi + 1) * c];
                    for px in 0..h * w {
                        let base = (bi * h * w + px) * c;
                        for (d, &gv) in dx.data[base..base + c].iter_mut().zip(g) {
                            *d = gv * scale;
                        }
                    }
                }
                (vec![Some(dx)], Vec::new())
            }
            Op::Dense { inputs: n, units } => {
                let x = inputs[0];
                let batch = x.batch();
                let dx = want_inputs.then(|| {
                    let mut dx = Tensor::zeros(&x.shape);
                    gemm_bt(&grad.data, &params[0].data, &mut dx.data, batch, *units, *n);
                    dx
                });
                let pg = if want_params {
                    let mut dw = vec![S::zero(); n * units];
                    gemm_at(&x.data, &grad.data, &mut dw, batch, *n, *units);
                    let mut db = vec![S::zero(); *units];
                    for b in 0..batch {
                        for (d, &g) in db.iter_mut().zip(&grad.data[b * units..(b + 1) * units]) {
                            *d += g;
                        }
                    }
                    vec![dw, db]
                } else {
                    Vec::new()
                };
                (vec![dx], pg)
            }
            Op::Gru {
                units,
                return_sequences,
                ..
            } => {
                let (dx, pg) = gru_backward(
                    inputs[0],
                    params,
                    aux,
                    grad,
                    *units,
                    *return_sequences,
                    want_inputs,
                    want_params,
                );
                (vec![dx], pg)
            }
        }
    }
}

#[inline]
fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

fn map<S: Scalar>(x: &Tensor<S>, f: impl Fn(S) -> S) -> Tensor<S> {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

/// out[m×n] += a[m×k] · b[k×n]
pub(crate) fn gemm<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
}

/// out[k×n] += aᵀ · b where a is [m×k] and b is [m×n].
pub(crate) fn gemm_at<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            for (o, &bv) in out[p * n..(p + 1) * n].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out[m×n] += a · bᵀ where a is [m×k] and b is [n×k].
pub(crate) fn gemm_bt<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

fn conv_forward<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
    k: usize,
    stride: usize,
    padding: Padding,
    out_shape: &[usize],
) -> Tensor<S> {
    let (b, h, w, ci) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (oh, ow, co) = (out_shape[1], out_shape[2], out_shape[3]);
    let (_, pt) = conv_geometry(h, k, stride, padding).expect("validated geometry");
    let (_, pl) = conv_geometry(w, k, stride, padding).expect("validated geometry");
    let mut out = Tensor::zeros(out_shape);
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let obase = ((bi * oh + oy) * ow + ox) * co;
                let acc = &mut out.data[obase..obase + co];
                acc.copy_from_slice(&bias.data);
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pl as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let ibase = ((bi * h + iy as usize) * w + ix as usize) * ci;
                        let wbase = (ky * k + kx) * ci * co;
                        for c in 0..ci {
                            let xv = x.data[ibase + c];
                            if xv == S::zero() {
                                continue;
                            }
                            let wrow = &weight.data[wbase + c * co..wbase + (c + 1) * co];
                            for (a, &wv) in acc.iter_mut().zip(wrow) {
                                *a += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn conv_backward<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    grad: &Tensor<S>,
    k: usize,
    stride: usize,
    padding: Padding,
    want_inputs: bool,
    want_params: bool,
) -> (Option<Tensor<S>>, Vec<S>, Vec<S>) {
    let (b, h, w, ci) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (oh, ow, co) = (grad.shape[1], grad.shape[2], grad.shape[3]);
    let (_, pt) = conv_geometry(h, k, stride, padding).expect("validated geometry");
    let (_, pl) = conv_geometry(w, k, stride, padding).expect("validated geometry");
    let mut dx = want_inputs.then(|| Tensor::zeros(&x.shape));
    let mut dw = if want_params {
        vec![S::zero(); weight.len()]
    } else {
        Vec::new()
    };
    let mut db = if want_params { vec![S::zero(); co] } else { Vec::new() };
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let obase = ((bi * oh + oy) * ow + ox) * co;
                let g = &grad.data[obase..obase + co];
                if g.iter().all(|v| *v == S::zero()) {
                    continue;
                }
                if want_params {
                    for (d, &gv) in db.iter_mut().zip(g) {
                        *d += gv;
                    }
                }
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pl as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let ibase = ((bi * h + iy as usize) * w + ix as usize) * ci;
                        let wbase = (ky * k + kx) * ci * co;
                        for c in 0..ci {
                            let off = wbase + c * co;
                            if let Some(dx) = dx.as_mut() {
                                dx.data[ibase + c] += dot(g, &weight.data[off..off + co]);
                            }
                            if want_params {
                                let xv = x.data[ibase + c];
                                if xv != S::zero() {
                                    for (d, &gv) in dw[off..off + co].iter_mut().zip(g) {
                                        *d += xv * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

fn maxpool_forward<S: Scalar>(
    x: &Tensor<S>,
    size: usize,
    stride: usize,
    padding: Padding,
    out_shape: &[usize],
) -> (Tensor<S>, Vec<usize>) {
    let (b, h, w, c) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let (_, pt) = conv_geometry(h, size, stride, padding).expect("validated geometry");
    let (_, pl) = conv_geometry(w, size, stride, padding).expect("validated geometry");
    let mut out = Tensor::zeros(out_shape);
    let mut arg = vec![0usize; out.len()];
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best: Option<(S, usize)> = None;
                    for ky in 0..size {
                        let iy = (oy * stride + ky) as isize - pt as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..size {
                            let ix = (ox * stride + kx) as isize - pl as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = ((bi * h + iy as usize) * w + ix as usize) * c + ch;
                            let v = x.data[idx];
                            if best.is_none_or(|(bv, _)| v > bv) {
                                best = Some((v, idx));
                            }
                        }
                    }
                    let (v, idx) = best.expect("window overlaps input");
                    let o = ((bi * oh + oy) * ow + ox) * c + ch;
                    out.data[o] = v;
                    arg[o] = idx;
                }
            }
        }
    }
    (out, arg)
}

fn gap_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let (b, h, w, c) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let mut out = Tensor::zeros(&[b, c]);
    let scale = S::one() / S::of((h * w) as f64);
    for bi in 0..b {
        let acc = &mut out.data[bi * c..(bi + 1) * c];
        for px in 0..h * w {
            let base = (bi * h * w + px) * c;
            for (a, &v) in acc.iter_mut().zip(&x.data[base..base + c]) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a *= scale;
        }
    }
    out
}

fn concat_forward<S: Scalar>(inputs: &[&Tensor<S>], out_shape: &[usize]) -> Tensor<S> {
    let co = *out_shape.last().expect("non-empty shape");
    let mut out = Tensor::zeros(out_shape);
    let rows = out.len() / co;
    let mut offset = 0;
    for t in inputs {
        let c = *t.shape.last().expect("non-empty shape");
        for r in 0..rows {
            out.data[r * co + offset..r * co + offset + c].copy_from_slice(&t.data[r * c..(r + 1) * c]);
        }
        offset += c;
    }
    out
}

fn concat_backward<S: Scalar>(inputs: &[&Tensor<S>], grad: &Tensor<S>) -> Vec<Tensor<S>> {
    let co = *grad.shape.last().expect("non-empty shape");
    let rows = grad.len() / co;
    let mut offset = 0;
    inputs
        .iter()
        .map(|t| {
            let c = *t.shape.last().expect("non-empty shape");
            let mut d = Tensor::zeros(&t.shape);
            for r in 0..rows {
                d.data[r * c..(r + 1) * c].copy_from_slice(&grad.data[r * co + offset..r * co + offset + c]);
            }
            offset += c;
            d
        })
        .collect()
}

// Gate order inside the 3U blocks: update z, reset r, candidate n.
// n = tanh(x·Wn + (r ⊙ h)·Un + bn); h' = (1 − z) ⊙ n + z ⊙ h.
fn gru_forward<S: Scalar>(
    x: &Tensor<S>,
    params: &[Tensor<S>],
    u: usize,
    return_sequences: bool,
    out_shape: &[usize],
) -> (Tensor<S>, Aux<S>) {
    let (b, t, d) = (x.shape[0], x.shape[1], x.shape[2]);
    let (wi, wh, bias) = (&params[0].data, &params[1].data, &params[2].data);
    let g3 = 3 * u;
    let mut pre = vec![S::zero(); b * t * g3];
    for row in 0..b * t {
        pre[row * g3..(row + 1) * g3].copy_from_slice(bias);
    }
    gemm(&x.data, wi, &mut pre, b * t, d, g3);
    let mut z = vec![S::zero(); b * t * u];
    let mut r = vec![S::zero(); b * t * u];
    let mut n = vec![S::zero(); b * t * u];
    let mut h = vec![S::zero(); b * (t + 1) * u];
    let mut hu = vec![S::zero(); 2 * u];
    let mut rh = vec![S::zero(); u];
    let mut nu = vec![S::zero(); u];
    for bi in 0..b {
        for ti in 0..t {
            let hp_off = (bi * (t + 1) + ti) * u;
            let gate = (bi * t + ti) * u;
            let p = &pre[(bi * t + ti) * g3..(bi * t + ti + 1) * g3];
            hu.iter_mut().for_each(|v| *v = S::zero());
            for k in 0..u {
                let hv = h[hp_off + k];
                if hv == S::zero() {
                    continue;
                }
                for (a, &wv) in hu.iter_mut().zip(&wh[k * g3..k * g3 + 2 * u]) {
                    *a += hv * wv;
                }
            }
            for j in 0..u {
                z[gate + j] = sigmoid(p[j] + hu[j]);
                r[gate + j] = sigmoid(p[u + j] + hu[u + j]);
                rh[j] = r[gate + j] * h[hp_off + j];
            }
            nu.iter_mut().for_each(|v| *v = S::zero());
            for k in 0..u {
                let rv = rh[k];
                if rv == S::zero() {
                    continue;
                }
                for (a, &wv) in nu.iter_mut().zip(&wh[k * g3 + 2 * u..(k + 1) * g3]) {
                    *a += rv * wv;
                }
            }
            for j in 0..u {
                let nv = (p[2 * u + j] + nu[j]).tanh();
                n[gate + j] = nv;
                let zv = z[gate + j];
                h[hp_off + u + j] = (S::one() - zv) * nv + zv * h[hp_off + j];
            }
        }
    }
    let mut out = Tensor::zeros(out_shape);
    for bi in 0..b {
        if return_sequences {
            for ti in 0..t {
                let src = (bi * (t + 1) + ti + 1) * u;
                out.data[(bi * t + ti) * u..(bi * t + ti + 1) * u].copy_from_slice(&h[src..src + u]);
            }
        } else {
            let src = (bi * (t + 1) + t) * u;
            out.data[bi * u..(bi + 1) * u].copy_from_slice(&h[src..src + u]);
        }
    }
    (out, Aux::Gru { z, r, n, h })
}

#[allow(clippy::too_many_arguments)]
fn gru_backward<S: Scalar>(
    x: &Tensor<S>,
    params: &[Tensor<S>],
    aux: &Aux<S>,
    grad: &Tensor<S>,
    u: usize,
    return_sequences: bool,
    want_inputs: bool,
    want_params: bool,
) -> (Option<Tensor<S>>, Vec<Vec<S>>) {
    let Aux::Gru { z, r, n, h } = aux else {
        unreachable!("gru caches gates")
    };
    let (b, t, d) = (x.shape[0], x.shape[1], x.shape[2]);
    let (wi, wh) = (&params[0].data, &params[1].data);
    let g3 = 3 * u;
    let mut da = vec![S::zero(); b * t * g3];
    let mut dwh = vec![S::zero(); if want_params { u * g3 } else { 0 }];
    let mut dh = vec![S::zero(); u];
    let mut dhp = vec![S::zero(); u];
    let mut rh = vec![S::zero(); u];
    for bi in 0..b {
        dh.iter_mut().for_each(|v| *v = S::zero());
        for ti in (0..t).rev() {
            if return_sequences {
                let g = &grad.data[(bi * t + ti) * u..(bi * t + ti + 1) * u];
                for (a, &gv) in dh.iter_mut().zip(g) {
                    *a += gv;
                }
            } else if ti == t - 1 {
                dh.copy_from_slice(&grad.data[bi * u..(bi + 1) * u]);
            }
            let hp_off = (bi * (t + 1) + ti) * u;
            let gate = (bi * t + ti) * u;
            let a = &mut da[(bi * t + ti) * g3..(bi * t + ti + 1) * g3];
            for j in 0..u {
                let (zv, nv, hp) = (z[gate + j], n[gate + j], h[hp_off + j]);
                let dn = dh[j] * (S::one() - zv);
                let dz = dh[j] * (hp - nv);
                dhp[j] = dh[j] * zv;
                a[2 * u + j] = dn * (S::one() - nv * nv);
                a[j] = dz * zv * (S::one() - zv);
                rh[j] = r[gate + j] * hp;
            }
            // candidate path through (r ⊙ h)·Un
            for k in 0..u {
                let row = &wh[k * g3 + 2 * u..(k + 1) * g3];
                let drh = dot(&a[2 * u..], row);
                let rv = r[gate + k];
                let hp = h[hp_off + k];
                dhp[k] += drh * rv;
                a[u + k] = drh * hp * rv * (S::one() - rv);
                if want_params && rh[k] != S::zero() {
                    for (dw, &av) in dwh[k * g3 + 2 * u..(k + 1) * g3].iter_mut().zip(&a[2 * u..]) {
                        *dw += rh[k] * av;
                    }
                }
            }
            for k in 0..u {
                let hp = h[hp_off + k];
                let row = &wh[k * g3..k * g3 + 2 * u];
                dhp[k] += dot(&a[..2 * u], row);
                if want_params && hp != S::zero() {
                    for (dw, &av) in dwh[k * g3..k * g3 + 2 * u].iter_mut().zip(&a[..2 * u]) {
                        *dw += hp * av;
                    }
                }
            }
            std::mem::swap(&mut dh, &mut dhp);
        }
    }
    let dx = want_inputs.then(|| {
        let mut dx = Tensor::zeros(&x.shape);
        gemm_bt(&da, wi, &mut dx.data, b * t, g3, d);
        dx
    });
    let pg = if want_params {
        let mut dwi = vec![S::zero(); d * g3];
        gemm_at(&x.data, &da, &mut dwi, b * t, d, g3);
        let mut db = vec![S::zero(); g3];
        for row in da.chunks(g3) {
            for (o, &v) in db.iter_mut().zip(row) {
                *o += v;
            }
        }
        vec![dwi, dwh, db]
    } else {
        Vec::new()
    };
    (dx, pg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_geometry() {
        assert_eq!(conv_geometry(40, 4, 2, Padding::Same), Some((20, 1)));
        assert_eq!(conv_geometry(5, 3, 2, Padding::Same), Some((3, 1)));
        assert_eq!(conv_geometry(10, 1, 1, Padding::Same), Some((10, 0)));
        assert_eq!(conv_geometry(10, 3, 1, Padding::Valid), Some((8, 0)));
        assert_eq!(conv_geometry(2, 3, 1, Padding::Valid), None);
    }

    #[test]
    fn gemm_variants_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2×3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5).collect(); // 3×4
        let mut c = vec![0.0; 8];
        gemm(&a, &b, &mut c, 2, 3, 4);
        assert_eq!(c, vec![10.0, 11.5, 13.0, 14.5, 28.0, 34.0, 40.0, 46.0]);
        // aᵀ·c has shape 3×4 with a as [2×3]
        let mut at = vec![0.0; 12];
        gemm_at(&a, &c, &mut at, 2, 3, 4);
        assert_eq!(at[0], 0.0 * 10.0 + 3.0 * 28.0);
        let bt: Vec<f64> = (0..4)
            .flat_map(|j| (0..3).map(move |p| ((p * 4 + j) as f64) * 0.5))
            .collect();
        let mut c2 = vec![0.0; 8];
        gemm_bt(&a, &bt, &mut c2, 2, 3, 4);
        assert_eq!(c, c2);
    }
}
