//! Dual-branch action-value network.
//!
//! ```text
//! image ─ [conv 3x3 ─ relu ─ maxpool 2x2] x N ─ flatten ─ dense.. ─┐
//!                                                                  ├ concat ─ dense.. ─ dense(2)
//! continuous ─ dense.. ───────────────────────────────────────────┘
//! ```
//!
//! Every hidden layer is rectified; the two outputs are linear.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{max_pool, max_pool_backward, relu_backward, relu_in_place, Conv2d, Dense};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub const ACTIONS: usize = 2;
pub const CONTINUOUS_INPUTS: usize = 5;

/// Samples per parallel gradient chunk. Fixed so that summation order, and
/// therefore the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[rows, cols, channels]` of the image input.
    pub image_shape: [usize; 3],
    pub continuous_inputs: usize,
    pub conv_filters: usize,
    pub conv_layers: usize,
    pub image_dense: Vec<usize>,
    pub continuous_dense: Vec<usize>,
    pub merge_dense: Vec<usize>,
}

impl NetworkSpec {
    /// Full-size architecture: three 64-filter conv/pool stages, dense 500-100
    /// on the image, five dense-100 layers on the continuous inputs and two
    /// dense-200 layers after the merge.
    pub fn full(image_shape: [usize; 3]) -> Self {
        NetworkSpec {
            image_shape,
            continuous_inputs: CONTINUOUS_INPUTS,
            conv_filters: 64,
            conv_layers: 3,
            image_dense: vec![500, 100],
            continuous_dense: vec![100; 5],
            merge_dense: vec![200, 200],
        }
    }

    /// Reduced architecture used for desk-scale experiments.
    pub fn reduced(image_shape: [usize; 3]) -> Self {
        NetworkSpec {
            image_shape,
            continuous_inputs: CONTINUOUS_INPUTS,
            conv_filters: 8,
            conv_layers: 2,
            image_dense: vec![64, 32],
            continuous_dense: vec![32, 32],
            merge_dense: vec![64, 64],
        }
    }

    /// Spatial size and channel count after the conv/pool stack.
    pub fn conv_output(&self) -> (usize, usize, usize) {
        let [mut h, mut w, mut c] = self.image_shape;
        for _ in 0..self.conv_layers {
            h /= 2;
            w /= 2;
            c = self.conv_filters;
        }
        (h, w, c)
    }

    pub fn flatten_len(&self) -> usize {
        let (h, w, c) = self.conv_output();
        h * w * c
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_shape.iter().any(|&d| d == 0) {
            return Err(Error::arg("image dimensions must be positive"));
        }
        if self.conv_layers > 0 && self.conv_filters == 0 {
            return Err(Error::arg("conv_filters must be positive"));
        }
        if self.flatten_len() == 0 {
            return Err(Error::arg(format!(
                "image {:?} vanishes after {} pooling stages",
                self.image_shape, self.conv_layers
            )));
        }
        let all = self.image_dense.iter().chain(&self.continuous_dense).chain(&self.merge_dense);
        if all.clone().any(|&n| n == 0) {
            return Err(Error::arg("dense layer widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork<T> {
    spec: NetworkSpec,
    convs: Vec<Conv2d<T>>,
    image_dense: Vec<Dense<T>>,
    continuous_dense: Vec<Dense<T>>,
    merge_dense: Vec<Dense<T>>,
    output: Dense<T>,
}

/// One training sample: the action taken and its regression target.
#[derive(Clone, Debug)]
pub struct Sample<'a, T> {
    pub image: &'a Tensor<T>,
    pub continuous: &'a [T],
    pub action: usize,
    pub target: T,
}

/// Per-parameter-tensor gradients in [`QNetwork::params`] order.
pub type Gradients<T> = Vec<Vec<T>>;

struct Trace<T> {
    /// Input to each conv layer (the first is the image).
    conv_in: Vec<Vec<T>>,
    /// Rectified conv outputs (pre-pool).
    conv_out: Vec<Vec<T>>,
    pool_arg: Vec<Vec<usize>>,
    /// Flattened image features feeding the image dense stack.
    flat: Vec<T>,
    image_act: Vec<Vec<T>>,
    continuous_in: Vec<T>,
    continuous_act: Vec<Vec<T>>,
    merged: Vec<T>,
    merge_act: Vec<Vec<T>>,
    q: [T; ACTIONS],
}

fn dense_stack<T: Real>(
    layers: &[Dense<T>],
    input: &[T],
    acts: &mut Vec<Vec<T>>,
) {
    let mut x = input.to_vec();
    for l in layers {
        let mut y = Vec::with_capacity(l.outputs);
        l.forward(&x, &mut y);
        relu_in_place(&mut y);
        acts.push(y.clone());
        x = y;
    }
}

fn dense_stack_backward<T: Real>(
    layers: &[Dense<T>],
    input: &[T],
    acts: &[Vec<T>],
    mut grad: Vec<T>,
    grads: &mut [Vec<T>],
) -> Vec<T> {
    for k in (0..layers.len()).rev() {
        relu_backward(&acts[k], &mut grad);
        let x = if k == 0 { input } else { &acts[k - 1] };
        let (gw, rest) = grads[2 * k..].split_at_mut(1);
        grad = layers[k].backward(x, &grad, &mut gw[0], &mut rest[0]);
    }
    grad
}

impl<T: Real> QNetwork<T> {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut convs = Vec::new();
        let mut ch = spec.image_shape[2];
        for _ in 0..spec.conv_layers {
            convs.push(Conv2d::init(ch, spec.conv_filters, rng));
            ch = spec.conv_filters;
        }
        let chain = |sizes: &[usize], mut n: usize, rng: &mut R| {
            let mut v = Vec::new();
            for &m in sizes {
                v.push(Dense::init(n, m, rng));
                n = m;
            }
            (v, n)
        };
        let (image_dense, img_out) = chain(&spec.image_dense, spec.flatten_len(), rng);
        let (continuous_dense, cont_out) = chain(&spec.continuous_dense, spec.continuous_inputs, rng);
        let (merge_dense, merge_out) = chain(&spec.merge_dense, img_out + cont_out, rng);
        let output = Dense::init(merge_out, ACTIONS, rng);
        Ok(QNetwork {
            spec,
            convs,
            image_dense,
            continuous_dense,
            merge_dense,
            output,
        })
    }

    /// Same architecture with every weight and bias zero.
    pub fn zeroed(spec: NetworkSpec) -> Result<Self> {
        let mut net = Self::new(spec, &mut crate::rng::rng_for(0, 0))?;
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = T::zero());
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Parameter tensors in a fixed order: conv, image dense, continuous
    /// dense, merge dense, output; weight before bias for each layer.
    pub fn params(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = Vec::new();
        for c in &self.convs {
            v.push(&c.weight);
            v.push(&c.bias);
        }
        for d in self.dense_layers() {
            v.push(&d.weight);
            v.push(&d.bias);
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut v: Vec<&mut Vec<T>> = Vec::new();
        for c in &mut self.convs {
            v.push(&mut c.weight);
            v.push(&mut c.bias);
        }
        let dense = self
            .image_dense
            .iter_mut()
            .chain(self.continuous_dense.iter_mut())
            .chain(self.merge_dense.iter_mut())
            .chain(std::iter::once(&mut self.output));
        for d in dense {
            v.push(&mut d.weight);
            v.push(&mut d.bias);
        }
        v
    }

    /// Shapes of the tensors returned by [`params`](Self::params).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut v = Vec::new();
        for c in &self.convs {
            v.push(c.weight_shape().to_vec());
            v.push(vec![c.out_channels]);
        }
        for d in self.dense_layers() {
            v.push(vec![d.outputs, d.inputs]);
            v.push(vec![d.outputs]);
        }
        v
    }

    fn dense_layers(&self) -> impl Iterator<Item = &Dense<T>> {
        self.image_dense
            .iter()
            .chain(&self.continuous_dense)
            .chain(&self.merge_dense)
            .chain(std::iter::once(&self.output))
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        self.params().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    fn check_inputs(&self, image: &Tensor<T>, continuous: &[T]) -> Result<()> {
        if image.shape() != self.spec.image_shape {
            return Err(Error::ShapeMismatch {
                expected: self.spec.image_shape.to_vec(),
                actual: image.shape().to_vec(),
            });
        }
        if continuous.len() != self.spec.continuous_inputs {
            return Err(Error::ShapeMismatch {
                expected: vec![self.spec.continuous_inputs],
                actual: vec![continuous.len()],
            });
        }
        Ok(())
    }

    /// Action values `Q(s, a)` for both actions.
    pub fn forward(&self, image: &Tensor<T>, continuous: &[T]) -> Result<[T; ACTIONS]> {
        self.check_inputs(image, continuous)?;
        Ok(self.trace(image.data(), continuous).q)
    }

    fn trace(&self, image: &[T], continuous: &[T]) -> Trace<T> {
        let [mut h, mut w, _] = self.spec.image_shape;
        let mut conv_in = Vec::with_capacity(self.convs.len());
        let mut conv_out = Vec::with_capacity(self.convs.len());
        let mut pool_arg = Vec::with_capacity(self.convs.len());
        let mut x = image.to_vec();
        for conv in &self.convs {
            let mut y = Vec::new();
            conv.forward(&x, h, w, &mut y);
            relu_in_place(&mut y);
            let (pooled, arg) = max_pool(&y, h, w, conv.out_channels);
            conv_in.push(x);
            conv_out.push(y);
            pool_arg.push(arg);
            x = pooled;
            h /= 2;
            w /= 2;
        }
        let flat = x;

        let mut image_act = Vec::new();
        dense_stack(&self.image_dense, &flat, &mut image_act);
        let mut continuous_act = Vec::new();
        dense_stack(&self.continuous_dense, continuous, &mut continuous_act);

        let mut merged = image_act.last().unwrap_or(&flat).clone();
        merged.extend_from_slice(continuous_act.last().map_or(continuous, |v| v.as_slice()));
        let mut merge_act = Vec::new();
        dense_stack(&self.merge_dense, &merged, &mut merge_act);

        let mut out = Vec::with_capacity(ACTIONS);
        self.output.forward(merge_act.last().unwrap_or(&merged), &mut out);
        Trace {
            conv_in,
            conv_out,
            pool_arg,
            flat,
            image_act,
            continuous_in: continuous.to_vec(),
            continuous_act,
            merged,
            merge_act,
            q: [out[0], out[1]],
        }
    }

    /// Backpropagates `dq` (gradient w.r.t. the two outputs) through `tr`.
    fn backprop(&self, tr: &Trace<T>, dq: [T; ACTIONS], grads: &mut Gradients<T>) {
        let nc = 2 * self.convs.len();
        let ni = 2 * self.image_dense.len();
        let nk = 2 * self.continuous_dense.len();
        let nm = 2 * self.merge_dense.len();
        let (conv_g, rest) = grads.split_at_mut(nc);
        let (img_g, rest) = rest.split_at_mut(ni);
        let (cont_g, rest) = rest.split_at_mut(nk);
        let (merge_g, out_g) = rest.split_at_mut(nm);

        let merge_top = tr.merge_act.last().unwrap_or(&tr.merged);
        let (gw, gb) = out_g.split_at_mut(1);
        let g = self.output.backward(merge_top, &dq, &mut gw[0], &mut gb[0]);
        let g = dense_stack_backward(&self.merge_dense, &tr.merged, &tr.merge_act, g, merge_g);

        let img_len = tr.image_act.last().map_or(tr.flat.len(), |v| v.len());
        let (g_img, g_cont) = g.split_at(img_len);
        dense_stack_backward(
            &self.continuous_dense,
            &tr.continuous_in,
            &tr.continuous_act,
            g_cont.to_vec(),
            cont_g,
        );
        let mut g = dense_stack_backward(&self.image_dense, &tr.flat, &tr.image_act, g_img.to_vec(), img_g);

        let [h0, w0, _] = self.spec.image_shape;
        let mut dims = Vec::with_capacity(self.convs.len());
        let (mut h, mut w) = (h0, w0);
        for _ in &self.convs {
            dims.push((h, w));
            h /= 2;
            w /= 2;
        }
        for k in (0..self.convs.len()).rev() {
            let (h, w) = dims[k];
            let conv = &self.convs[k];
            let mut dy = max_pool_backward(&g, &tr.pool_arg[k], tr.conv_out[k].len());
            relu_backward(&tr.conv_out[k], &mut dy);
            let (gw, gb) = conv_g[2 * k..2 * k + 2].split_at_mut(1);
            g = conv.backward(&tr.conv_in[k], h, w, &dy, &mut gw[0], &mut gb[0]);
        }
    }

    /// Mean squared error of `Q(s, a_taken)` against the targets, and its
    /// gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, batch: &[Sample<'_, T>]) -> Result<(T, Gradients<T>)> {
        if batch.is_empty() {
            return Err(Error::Precondition("empty training batch".into()));
        }
        for s in batch {
            self.check_inputs(s.image, s.continuous)?;
            if s.action >= ACTIONS {
                return Err(Error::arg(format!("action index {} out of range", s.action)));
            }
        }
        let n = T::from_f64(batch.len() as f64);
        let two = T::from_f64(2.0);
        let partial: Vec<(T, Gradients<T>)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grads = self.zero_grads();
                let mut loss = T::zero();
                for s in chunk {
                    let tr = self.trace(s.image.data(), s.continuous);
                    let err = tr.q[s.action] - s.target;
                    loss += err * err;
                    let mut dq = [T::zero(); ACTIONS];
                    dq[s.action] = two * err / n;
                    self.backprop(&tr, dq, &mut grads);
                }
                (loss, grads)
            })
            .collect();
        let mut iter = partial.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss += l;
            for (acc, part) in grads.iter_mut().zip(g) {
                for (a, b) in acc.iter_mut().zip(part) {
                    *a += b;
                }
            }
        }
        Ok((loss / n, grads))
    }

    /// Converts every parameter to another precision.
    pub fn cast<U: Real>(&self) -> QNetwork<U> {
        let conv = |c: &Conv2d<T>| Conv2d {
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            weight: c.weight.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
            bias: c.bias.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        };
        let dense = |d: &Dense<T>| Dense {
            inputs: d.inputs,
            outputs: d.outputs,
            weight: d.weight.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
            bias: d.bias.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        };
        QNetwork {
            spec: self.spec.clone(),
            convs: self.convs.iter().map(conv).collect(),
            image_dense: self.image_dense.iter().map(dense).collect(),
            continuous_dense: self.continuous_dense.iter().map(dense).collect(),
            merge_dense: self.merge_dense.iter().map(dense).collect(),
            output: dense(&self.output),
        }
    }

    /// Overwrites parameters from tensors in [`params`](Self::params) order.
    pub(crate) fn load_params(&mut self, values: Vec<Vec<T>>) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::arg(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            if slot.len() != v.len() {
                return Err(Error::arg("parameter tensor length mismatch"));
            }
            **slot = v;
        }
        Ok(())
    }
}
