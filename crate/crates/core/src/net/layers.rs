//! Forward and reverse-mode passes for every layer kind.

use super::params::{check_params, Grads, Params};
use super::spec::{Layer, NetworkSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Momentum of the batch-norm running statistics.
pub const BN_MOMENTUM: f64 = 0.99;
/// Variance epsilon of batch normalization.
pub const BN_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm normalizes with batch statistics.
    Train,
    /// Batch norm normalizes with running statistics.
    Infer,
}

#[derive(Debug, Clone)]
enum Cache<T> {
    None,
    BatchNorm { normalized: Vec<T>, inv_std: Vec<T>, mean: Vec<T>, var: Vec<T> },
}

/// Every intermediate tensor of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    pub mode: Mode,
    /// `values[0]` is the input, `values[i + 1]` the output of layer `i`.
    pub values: Vec<Tensor<T>>,
    caches: Vec<Cache<T>>,
}

impl<T: Scalar> Activations<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.values.last().unwrap()
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.values.pop().unwrap()
    }
}

fn batched(batch: usize, shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len() + 1);
    s.push(batch);
    s.extend_from_slice(shape);
    s
}

pub fn forward<T: Scalar>(spec: &NetworkSpec, params: &Params<T>, x: &Tensor<T>, mode: Mode) -> Result<Activations<T>> {
    let shapes = spec.shapes()?;
    check_params(spec, params)?;
    if x.shape().len() != spec.input_shape.len() + 1 || x.shape()[1..] != spec.input_shape[..] {
        return Err(Error::shape(format!(
            "input shape {:?} does not match network input {:?}",
            x.shape(),
            spec.input_shape
        )));
    }
    let batch = x.batch();
    let mut values = Vec::with_capacity(spec.layers.len() + 1);
    let mut caches = Vec::with_capacity(spec.layers.len());
    values.push(x.clone());
    for (idx, layer) in spec.layers.iter().enumerate() {
        let input = &values[idx];
        let out_shape = batched(batch, &shapes[idx + 1]);
        let (out, cache) = match layer {
            Layer::Dense { units } => {
                let y = dense_forward(input, params.tensor(idx, 0), params.tensor(idx, 1), *units);
                (Tensor::new(out_shape, y)?, Cache::None)
            }
            Layer::Relu => {
                let y = input.data().iter().map(|&v| v.max(T::zero())).collect();
                (Tensor::new(out_shape, y)?, Cache::None)
            }
            Layer::Flatten | Layer::Reshape { .. } => (input.clone().reshaped(out_shape)?, Cache::None),
            Layer::Conv2d { kernel, stride, .. } => {
                let taps = Taps::conv(&shapes[idx + 1], &shapes[idx], *kernel, *stride);
                let y = conv_forward(input, params, idx, &taps, &shapes[idx], &shapes[idx + 1], false);
                (Tensor::new(out_shape, y)?, Cache::None)
            }
            Layer::Conv2dTranspose { kernel, stride, .. } => {
                let taps = Taps::conv(&shapes[idx], &shapes[idx + 1], *kernel, *stride);
                let y = conv_forward(input, params, idx, &taps, &shapes[idx], &shapes[idx + 1], true);
                (Tensor::new(out_shape, y)?, Cache::None)
            }
            Layer::BatchNorm => {
                let (y, cache) = batch_norm_forward(input, params, idx, mode);
                (Tensor::new(out_shape, y)?, cache)
            }
        };
        if !out.is_finite() {
            return Err(Error::NonFinite(format!("output of layer {idx} ({})", layer.name())));
        }
        values.push(out);
        caches.push(cache);
    }
    Ok(Activations { mode, values, caches })
}

/// Reverse-mode pass. Returns parameter gradients and the gradient with
/// respect to the network input.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    acts: &Activations<T>,
    output_grad: &Tensor<T>,
) -> Result<(Grads<T>, Tensor<T>)> {
    let shapes = spec.shapes()?;
    check_params(spec, params)?;
    if acts.mode != Mode::Train {
        return Err(Error::invalid("backward needs activations from a train-mode forward pass"));
    }
    if acts.values.len() != spec.layers.len() + 1 || acts.caches.len() != spec.layers.len() {
        return Err(Error::invalid("activations do not belong to this network"));
    }
    let batch = acts.values[0].batch();
    for (i, v) in acts.values.iter().enumerate() {
        if v.shape() != batched(batch, &shapes[i]) {
            return Err(Error::invalid("activations do not belong to this network"));
        }
    }
    if output_grad.shape() != acts.output().shape() {
        return Err(Error::shape(format!(
            "output gradient shape {:?} does not match output {:?}",
            output_grad.shape(),
            acts.output().shape()
        )));
    }

    let mut grads = Params::zeros_like(params);
    let mut grad = output_grad.clone();
    for idx in (0..spec.layers.len()).rev() {
        let input = &acts.values[idx];
        let in_shape = input.shape().to_vec();
        grad = match &spec.layers[idx] {
            Layer::Dense { units } => {
                let kernel = params.tensor(idx, 0);
                let (dx, dw, db) = dense_backward(input, kernel, grad.data(), *units);
                grads.layers[idx][0].value.data_mut().copy_from_slice(&dw);
                grads.layers[idx][1].value.data_mut().copy_from_slice(&db);
                Tensor::new(in_shape, dx)?
            }
            Layer::Relu => {
                let dx = input
                    .data()
                    .iter()
                    .zip(grad.data())
                    .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                Tensor::new(in_shape, dx)?
            }
            Layer::Flatten | Layer::Reshape { .. } => grad.reshaped(in_shape)?,
            Layer::Conv2d { kernel, stride, .. } => {
                let taps = Taps::conv(&shapes[idx + 1], &shapes[idx], *kernel, *stride);
                let dx =
                    conv_backward(input, &grad, params, &mut grads, idx, &taps, &shapes[idx], &shapes[idx + 1], false);
                Tensor::new(in_shape, dx)?
            }
            Layer::Conv2dTranspose { kernel, stride, .. } => {
                let taps = Taps::conv(&shapes[idx], &shapes[idx + 1], *kernel, *stride);
                let dx =
                    conv_backward(input, &grad, params, &mut grads, idx, &taps, &shapes[idx], &shapes[idx + 1], true);
                Tensor::new(in_shape, dx)?
            }
            Layer::BatchNorm => {
                let dx = batch_norm_backward(&acts.caches[idx], &grad, params, &mut grads, idx)?;
                Tensor::new(in_shape, dx)?
            }
        };
    }
    Ok((grads, grad))
}

/// Folds the batch statistics of a train-mode pass into the running
/// statistics of every batch-norm layer.
pub fn commit_batch_stats<T: Scalar>(params: &mut Params<T>, acts: &Activations<T>) {
    let m = T::lit(BN_MOMENTUM);
    for (idx, cache) in acts.caches.iter().enumerate() {
        if let Cache::BatchNorm { mean, var, .. } = cache {
            for (slot, batch) in [(2, mean), (3, var)] {
                for (r, &b) in params.layers[idx][slot].value.data_mut().iter_mut().zip(batch) {
                    *r = m * *r + (T::one() - m) * b;
                }
            }
        }
    }
}

fn dense_forward<T: Scalar>(x: &Tensor<T>, kernel: &[T], bias: &[T], units: usize) -> Vec<T> {
    let fan_in = x.row_len();
    let mut y = Vec::with_capacity(x.batch() * units);
    for b in 0..x.batch() {
        let mut row = bias.to_vec();
        for (i, &xi) in x.row(b).iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let w = &kernel[i * units..(i + 1) * units];
            for (r, &wv) in row.iter_mut().zip(w) {
                *r += xi * wv;
            }
        }
        y.extend_from_slice(&row);
    }
    debug_assert_eq!(kernel.len(), fan_in * units);
    y
}

fn dense_backward<T: Scalar>(x: &Tensor<T>, kernel: &[T], dy: &[T], units: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let fan_in = x.row_len();
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); fan_in * units];
    let mut db = vec![T::zero(); units];
    for b in 0..x.batch() {
        let g = &dy[b * units..(b + 1) * units];
        for (d, &gv) in db.iter_mut().zip(g) {
            *d += gv;
        }
        let xr = x.row(b);
        let dxr = &mut dx[b * fan_in..(b + 1) * fan_in];
        for i in 0..fan_in {
            let w = &kernel[i * units..(i + 1) * units];
            dxr[i] = w.iter().zip(g).map(|(&a, &c)| a * c).sum();
            let xi = xr[i];
            if xi != T::zero() {
                for (d, &gv) in dw[i * units..(i + 1) * units].iter_mut().zip(g) {
                    *d += xi * gv;
                }
            }
        }
    }
    (dx, dw, db)
}

/// Kernel taps linking the "small" side of a same-padded convolution (the
/// strided side) to the "big" side: `big = small * stride + k - pad`.
struct Taps {
    /// (small pixel index, big pixel index, kernel offset kh * k + kw)
    links: Vec<(usize, usize, usize)>,
}

impl Taps {
    fn conv(small: &[usize], big: &[usize], kernel: usize, stride: usize) -> Taps {
        let (sh, sw) = (small[0], small[1]);
        let (bh, bw) = (big[0], big[1]);
        let pad_h = ((sh - 1) * stride + kernel).saturating_sub(bh) / 2;
        let pad_w = ((sw - 1) * stride + kernel).saturating_sub(bw) / 2;
        let mut links = Vec::new();
        for i in 0..sh {
            for j in 0..sw {
                for kh in 0..kernel {
                    let Some(bi) = (i * stride + kh).checked_sub(pad_h).filter(|&v| v < bh) else {
                        continue;
                    };
                    for kw in 0..kernel {
                        let Some(bj) = (j * stride + kw).checked_sub(pad_w).filter(|&v| v < bw) else {
                            continue;
                        };
                        links.push((i * sw + j, bi * bw + bj, kh * kernel + kw));
                    }
                }
            }
        }
        Taps { links }
    }
}

/// Shared convolution forward. For a plain convolution the output is the
/// small side; for a transposed one the output is the big side.
fn conv_forward<T: Scalar>(
    x: &Tensor<T>,
    params: &Params<T>,
    idx: usize,
    taps: &Taps,
    in_shape: &[usize],
    out_shape: &[usize],
    transposed: bool,
) -> Vec<T> {
    let kernel = params.tensor(idx, 0);
    let bias = params.tensor(idx, 1);
    let cin = in_shape[2];
    let f = out_shape[2];
    let out_pixels = out_shape[0] * out_shape[1];
    let mut y = vec![T::zero(); x.batch() * out_pixels * f];
    for b in 0..x.batch() {
        let xs = x.row(b);
        let ys = &mut y[b * out_pixels * f..(b + 1) * out_pixels * f];
        for px in ys.chunks_mut(f) {
            px.copy_from_slice(bias);
        }
        for &(small, big, k) in &taps.links {
            let (ip, op) = if transposed { (small, big) } else { (big, small) };
            let out = &mut ys[op * f..(op + 1) * f];
            for ci in 0..cin {
                let xv = xs[ip * cin + ci];
                if xv == T::zero() {
                    continue;
                }
                let w = &kernel[(k * cin + ci) * f..(k * cin + ci + 1) * f];
                for (o, &wv) in out.iter_mut().zip(w) {
                    *o += xv * wv;
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    dy: &Tensor<T>,
    params: &Params<T>,
    grads: &mut Grads<T>,
    idx: usize,
    taps: &Taps,
    in_shape: &[usize],
    out_shape: &[usize],
    transposed: bool,
) -> Vec<T> {
    let kernel = params.tensor(idx, 0);
    let cin = in_shape[2];
    let f = out_shape[2];
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); kernel.len()];
    let mut db = vec![T::zero(); f];
    for b in 0..x.batch() {
        let xs = x.row(b);
        let gs = dy.row(b);
        for px in gs.chunks(f) {
            for (d, &g) in db.iter_mut().zip(px) {
                *d += g;
            }
        }
        let dxs = &mut dx[b * xs.len()..(b + 1) * xs.len()];
        for &(small, big, k) in &taps.links {
            let (ip, op) = if transposed { (small, big) } else { (big, small) };
            let g = &gs[op * f..(op + 1) * f];
            for ci in 0..cin {
                let row = (k * cin + ci) * f;
                let w = &kernel[row..row + f];
                dxs[ip * cin + ci] += w.iter().zip(g).map(|(&a, &c)| a * c).sum::<T>();
                let xv = xs[ip * cin + ci];
                if xv != T::zero() {
                    for (d, &gv) in dw[row..row + f].iter_mut().zip(g) {
                        *d += xv * gv;
                    }
                }
            }
        }
    }
    grads.layers[idx][0].value.data_mut().copy_from_slice(&dw);
    grads.layers[idx][1].value.data_mut().copy_from_slice(&db);
    dx
}

fn batch_norm_forward<T: Scalar>(x: &Tensor<T>, params: &Params<T>, idx: usize, mode: Mode) -> (Vec<T>, Cache<T>) {
    let gamma = params.tensor(idx, 0);
    let beta = params.tensor(idx, 1);
    let c = gamma.len();
    let data = x.data();
    let rows = data.len() / c;
    let eps = T::lit(BN_EPSILON);
    match mode {
        Mode::Infer => {
            let mean = params.tensor(idx, 2);
            let var = params.tensor(idx, 3);
            let scale: Vec<T> = (0..c).map(|k| gamma[k] / (var[k] + eps).sqrt()).collect();
            let y = data
                .chunks(c)
                .flat_map(|row| (0..c).map(|k| scale[k] * (row[k] - mean[k]) + beta[k]).collect::<Vec<_>>())
                .collect();
            (y, Cache::None)
        }
        Mode::Train => {
            let n = T::lit(rows as f64);
            let mut mean = vec![T::zero(); c];
            for row in data.chunks(c) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![T::zero(); c];
            for row in data.chunks(c) {
                for k in 0..c {
                    let d = row[k] - mean[k];
                    var[k] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= n);
            let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            let mut normalized = Vec::with_capacity(data.len());
            let mut y = Vec::with_capacity(data.len());
            for row in data.chunks(c) {
                for k in 0..c {
                    let h = (row[k] - mean[k]) * inv_std[k];
                    normalized.push(h);
                    y.push(gamma[k] * h + beta[k]);
                }
            }
            (y, Cache::BatchNorm { normalized, inv_std, mean, var })
        }
    }
}

fn batch_norm_backward<T: Scalar>(
    cache: &Cache<T>,
    dy: &Tensor<T>,
    params: &Params<T>,
    grads: &mut Grads<T>,
    idx: usize,
) -> Result<Vec<T>> {
    let Cache::BatchNorm { normalized, inv_std, .. } = cache else {
        return Err(Error::invalid("batch-norm cache missing from activations"));
    };
    let gamma = params.tensor(idx, 0);
    let c = gamma.len();
    let g = dy.data();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (grow, hrow) in g.chunks(c).zip(normalized.chunks(c)) {
        for k in 0..c {
            dgamma[k] += grow[k] * hrow[k];
            dbeta[k] += grow[k];
        }
    }
    let n = T::lit((g.len() / c) as f64);
    let mut dx = Vec::with_capacity(g.len());
    for (grow, hrow) in g.chunks(c).zip(normalized.chunks(c)) {
        for k in 0..c {
            dx.push(gamma[k] * inv_std[k] / n * (n * grow[k] - dbeta[k] - hrow[k] * dgamma[k]));
        }
    }
    grads.layers[idx][0].value.data_mut().copy_from_slice(&dgamma);
    grads.layers[idx][1].value.data_mut().copy_from_slice(&dbeta);
    Ok(dx)
}
