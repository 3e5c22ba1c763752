//! Layer kernels: 3x3 same-padded convolution, 2x2 max-pooling and dense.
//!
//! Activations are stored `[rows, cols, channels]`. Convolution weights are
//! laid out `[ky][kx][in][out]` so the innermost loop runs over output
//! channels.

use rand::Rng;

use super::tensor::Real;

pub const KERNEL: usize = 3;

fn glorot<T: Real, R: Rng + ?Sized>(n: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n)
        .map(|_| T::from_f64(rng.random_range(-limit..=limit)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs][inputs]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            inputs,
            outputs,
            weight: glorot(inputs * outputs, inputs, outputs, rng),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn forward(&self, x: &[T], y: &mut Vec<T>) {
        debug_assert_eq!(x.len(), self.inputs);
        y.clear();
        for o in 0..self.outputs {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += *w * *v;
            }
            y.push(acc);
        }
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, x: &[T], dy: &[T], gw: &mut [T], gb: &mut [T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.inputs];
        for o in 0..self.outputs {
            let g = dy[o];
            if g == T::zero() {
                continue;
            }
            gb[o] += g;
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[ky][kx][in][out]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            weight: vec![T::zero(); KERNEL * KERNEL * in_channels * out_channels],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn init<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let k2 = KERNEL * KERNEL;
        Conv2d {
            in_channels,
            out_channels,
            weight: glorot(k2 * in_channels * out_channels, k2 * in_channels, k2 * out_channels, rng),
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [KERNEL, KERNEL, self.in_channels, self.out_channels]
    }

    /// Stride-1, zero-padded ("same") convolution of an `h x w` image.
    pub fn forward(&self, x: &[T], h: usize, w: usize, y: &mut Vec<T>) {
        let (ci, co) = (self.in_channels, self.out_channels);
        y.clear();
        y.resize(h * w * co, T::zero());
        for oy in 0..h {
            for ox in 0..w {
                let out = &mut y[(oy * w + ox) * co..(oy * w + ox + 1) * co];
                out.copy_from_slice(&self.bias);
                for ky in 0..KERNEL {
                    let iy = oy as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = ox as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let px = &x[(iy as usize * w + ix as usize) * ci..][..ci];
                        let wk = &self.weight[(ky * KERNEL + kx) * ci * co..][..ci * co];
                        for (i, &v) in px.iter().enumerate() {
                            if v == T::zero() {
                                continue;
                            }
                            let wrow = &wk[i * co..(i + 1) * co];
                            for (o, &wv) in out.iter_mut().zip(wrow) {
                                *o += v * wv;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn backward(&self, x: &[T], h: usize, w: usize, dy: &[T], gw: &mut [T], gb: &mut [T]) -> Vec<T> {
        let (ci, co) = (self.in_channels, self.out_channels);
        let mut dx = vec![T::zero(); h * w * ci];
        for oy in 0..h {
            for ox in 0..w {
                let g = &dy[(oy * w + ox) * co..(oy * w + ox + 1) * co];
                if g.iter().all(|&v| v == T::zero()) {
                    continue;
                }
                for (b, &v) in gb.iter_mut().zip(g) {
                    *b += v;
                }
                for ky in 0..KERNEL {
                    let iy = oy as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = ox as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let base = (iy as usize * w + ix as usize) * ci;
                        let koff = (ky * KERNEL + kx) * ci * co;
                        for i in 0..ci {
                            let v = x[base + i];
                            let wrow = &self.weight[koff + i * co..koff + (i + 1) * co];
                            let grow = &mut gw[koff + i * co..koff + (i + 1) * co];
                            let mut acc = T::zero();
                            for o in 0..co {
                                grow[o] += v * g[o];
                                acc += wrow[o] * g[o];
                            }
                            dx[base + i] += acc;
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Non-overlapping 2x2 max-pool; odd trailing rows/columns are dropped.
/// Returns the pooled image and, per output value, the flat index of the
/// selected input.
pub fn max_pool<T: Real>(x: &[T], h: usize, w: usize, c: usize) -> (Vec<T>, Vec<usize>) {
    let (ph, pw) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(ph * pw * c);
    let mut arg = Vec::with_capacity(ph * pw * c);
    for py in 0..ph {
        for px in 0..pw {
            for ch in 0..c {
                let mut best = (py * 2 * w + px * 2) * c + ch;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ((py * 2 + dy) * w + px * 2 + dx) * c + ch;
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                y.push(x[best]);
                arg.push(best);
            }
        }
    }
    (y, arg)
}

pub fn max_pool_backward<T: Real>(dy: &[T], arg: &[usize], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in dy.iter().zip(arg) {
        dx[i] += g;
    }
    dx
}

pub fn relu_in_place<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Masks `grad` where the rectified output is zero.
pub fn relu_backward<T: Real>(out: &[T], grad: &mut [T]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}
