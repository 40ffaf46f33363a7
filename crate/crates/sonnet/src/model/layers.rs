//! Hand-written neural layers over `ndarray`, forward and backward.
//!
//! Conventions shared by every layer:
//!
//! * Temporal activations are `(batch, channels, time)` `f64` tensors; dense
//!   activations are `(batch, features)`.
//! * `forward` is pure; `backward` consumes the same inputs the forward pass
//!   saw, writes parameter gradients into the layer's `d*` fields
//!   (overwriting, not accumulating), and returns the input gradient.
//! * Batch normalization is the only layer with train/eval behavior: batch
//!   statistics (and a running-statistics update) in training, frozen
//!   running statistics in evaluation. Everything downstream inherits
//!   determinism in eval mode from this.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// How a temporal convolution pads its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad both sides so the output length equals the input length.
    Same,
    /// Zero-pad only the past so outputs never see future frames
    /// (length-preserving).
    Causal,
}

/// 1-D convolution over time, optionally dilated.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// Weights, `(out_channels, in_channels, kernel)`.
    pub w: Array3<f64>,
    pub b: Array1<f64>,
    pub dw: Array3<f64>,
    pub db: Array1<f64>,
    pub dilation: usize,
    pub padding: Padding,
}

impl Conv1d {
    /// He-initialized convolution.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        padding: Padding,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let std = (2.0 / (in_channels * kernel) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        Conv1d {
            w: Array3::from_shape_fn((out_channels, in_channels, kernel), |_| normal.sample(rng)),
            b: Array1::zeros(out_channels),
            dw: Array3::zeros((out_channels, in_channels, kernel)),
            db: Array1::zeros(out_channels),
            dilation,
            padding,
        }
    }

    fn pad_left(&self) -> usize {
        let reach = (self.w.dim().2 - 1) * self.dilation;
        match self.padding {
            Padding::Same => reach / 2,
            Padding::Causal => reach,
        }
    }

    /// Gathers the receptive field of every output step into a
    /// `(in_channels * kernel, time)` matrix (zero outside the input).
    fn im2col(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (c_in, t_len) = x.dim();
        let k = self.w.dim().2;
        let pad = self.pad_left() as isize;
        let mut col = Array2::zeros((c_in * k, t_len));
        for kk in 0..k {
            let shift = (kk * self.dilation) as isize - pad;
            for c in 0..c_in {
                for t in 0..t_len {
                    let src = t as isize + shift;
                    if src >= 0 && (src as usize) < t_len {
                        col[(c * k + kk, t)] = x[(c, src as usize)];
                    }
                }
            }
        }
        col
    }

    /// `(batch, in, time) -> (batch, out, time)`.
    pub fn forward(&self, x: &Array3<f64>) -> Array3<f64> {
        let (n, _, t_len) = x.dim();
        let (c_out, c_in, k) = self.w.dim();
        let w2 = self
            .w
            .view()
            .into_shape_with_order((c_out, c_in * k))
            .expect("contiguous weights");
        let mut y = Array3::zeros((n, c_out, t_len));
        for s in 0..n {
            let col = self.im2col(x.index_axis(Axis(0), s));
            let mut out = w2.dot(&col);
            for (mut row, &bias) in out.rows_mut().into_iter().zip(self.b.iter()) {
                row += bias;
            }
            y.index_axis_mut(Axis(0), s).assign(&out);
        }
        y
    }

    /// Writes `dw`/`db` and returns `dx`. `x` must be the forward input.
    pub fn backward(&mut self, x: &Array3<f64>, dy: &Array3<f64>) -> Array3<f64> {
        let (n, _, t_len) = x.dim();
        let (c_out, c_in, k) = self.w.dim();
        let w2 = self
            .w
            .view()
            .into_shape_with_order((c_out, c_in * k))
            .expect("contiguous weights");
        let pad = self.pad_left() as isize;

        let mut dw2 = Array2::<f64>::zeros((c_out, c_in * k));
        self.db.fill(0.0);
        let mut dx = Array3::zeros(x.dim());
        for s in 0..n {
            let col = self.im2col(x.index_axis(Axis(0), s));
            let dy_s = dy.index_axis(Axis(0), s);
            dw2 = dw2 + dy_s.dot(&col.t());
            self.db += &dy_s.sum_axis(Axis(1));

            // Scatter d(col) back onto the input timeline.
            let dcol = w2.t().dot(&dy_s);
            let mut dx_s = dx.index_axis_mut(Axis(0), s);
            for kk in 0..k {
                let shift = (kk * self.dilation) as isize - pad;
                for c in 0..c_in {
                    for t in 0..t_len {
                        let src = t as isize + shift;
                        if src >= 0 && (src as usize) < t_len {
                            dx_s[(c, src as usize)] += dcol[(c * k + kk, t)];
                        }
                    }
                }
            }
        }
        self.dw = dw2.into_shape_with_order((c_out, c_in, k)).expect("weight shape");
        dx
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Per-channel batch normalization over `(batch, time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub dgamma: Array1<f64>,
    pub dbeta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Forward-pass cache needed by [`BatchNorm1d::backward`].
#[derive(Debug, Clone)]
pub struct BnCache {
    x_hat: Array3<f64>,
    inv_std: Array1<f64>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            dgamma: Array1::zeros(channels),
            dbeta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    /// Training forward: batch statistics normalize, running statistics are
    /// nudged toward them.
    pub fn forward_train(&mut self, x: &Array3<f64>) -> (Array3<f64>, BnCache) {
        let (n, c, t_len) = x.dim();
        let count = (n * t_len) as f64;
        let mut mean = Array1::zeros(c);
        let mut var = Array1::zeros(c);
        for ch in 0..c {
            let slice = x.index_axis(Axis(1), ch);
            let m = slice.sum() / count;
            let v = slice.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / count;
            mean[ch] = m;
            var[ch] = v;
        }
        self.running_mean = &self.running_mean * (1.0 - self.momentum) + &mean * self.momentum;
        self.running_var = &self.running_var * (1.0 - self.momentum) + &var * self.momentum;

        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut x_hat = x.clone();
        let mut y = Array3::zeros(x.dim());
        for ch in 0..c {
            let m = mean[ch];
            let is = inv_std[ch];
            let (g, b) = (self.gamma[ch], self.beta[ch]);
            let mut xh = x_hat.index_axis_mut(Axis(1), ch);
            xh.mapv_inplace(|v| (v - m) * is);
            y.index_axis_mut(Axis(1), ch).assign(&xh.mapv(|v| g * v + b));
        }
        (y, BnCache { x_hat, inv_std })
    }

    /// Evaluation forward: frozen running statistics, no side effects.
    pub fn forward_eval(&self, x: &Array3<f64>) -> Array3<f64> {
        let c = x.dim().1;
        let mut y = x.clone();
        for ch in 0..c {
            let m = self.running_mean[ch];
            let is = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            let (g, b) = (self.gamma[ch], self.beta[ch]);
            y.index_axis_mut(Axis(1), ch).mapv_inplace(|v| (v - m) * is * g + b);
        }
        y
    }

    /// Batch-statistics backward. Writes `dgamma`/`dbeta`, returns `dx`.
    pub fn backward(&mut self, cache: &BnCache, dy: &Array3<f64>) -> Array3<f64> {
        let (n, c, t_len) = dy.dim();
        let count = (n * t_len) as f64;
        let mut dx = Array3::zeros(dy.dim());
        for ch in 0..c {
            let x_hat = cache.x_hat.index_axis(Axis(1), ch);
            let dy_c = dy.index_axis(Axis(1), ch);
            let dgamma = (&x_hat * &dy_c).sum();
            let dbeta = dy_c.sum();
            self.dgamma[ch] = dgamma;
            self.dbeta[ch] = dbeta;

            let scale = self.gamma[ch] * cache.inv_std[ch];
            let mut dx_c = dx.index_axis_mut(Axis(1), ch);
            // dx = scale/count * (count*dy - dbeta - x_hat*dgamma)
            dx_c.assign(
                &((&dy_c * count - dbeta - &x_hat * dgamma) * (scale / count)),
            );
        }
        dx
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }
}

/// Fully connected layer on `(batch, features)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(out, in)`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / in_features as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        Dense {
            w: Array2::from_shape_fn((out_features, in_features), |_| normal.sample(rng)),
            b: Array1::zeros(out_features),
            dw: Array2::zeros((out_features, in_features)),
            db: Array1::zeros(out_features),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        // `assign` keeps dw in its original standard layout; a matmul result
        // can come back transposed-stride, which would break slice views.
        self.dw.assign(&dy.t().dot(x));
        self.db.assign(&dy.sum_axis(Axis(0)));
        dy.dot(&self.w)
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Element-wise ReLU keeping the activation mask implicit in the output.
pub fn relu3(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu2(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Backward of ReLU given the forward *input*.
pub fn relu3_backward(x: &Array3<f64>, dy: &Array3<f64>) -> Array3<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub fn relu2_backward(x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Max pooling over time, width 2 / stride 2, truncating an odd tail frame.
/// Returns the pooled tensor and the argmax offsets (0 = earlier frame wins
/// ties).
pub fn maxpool2(x: &Array3<f64>) -> (Array3<f64>, Array3<u8>) {
    let (n, c, t_len) = x.dim();
    let t_out = t_len / 2;
    let mut y = Array3::zeros((n, c, t_out));
    let mut arg = Array3::zeros((n, c, t_out));
    for s in 0..n {
        for ch in 0..c {
            for t in 0..t_out {
                let a = x[(s, ch, 2 * t)];
                let b = x[(s, ch, 2 * t + 1)];
                if b > a {
                    y[(s, ch, t)] = b;
                    arg[(s, ch, t)] = 1;
                } else {
                    y[(s, ch, t)] = a;
                }
            }
        }
    }
    (y, arg)
}

/// Scatters pooled gradients back to the pre-pool timeline.
pub fn maxpool2_backward(
    input_dim: (usize, usize, usize),
    arg: &Array3<u8>,
    dy: &Array3<f64>,
) -> Array3<f64> {
    let mut dx = Array3::zeros(input_dim);
    let (n, c, t_out) = dy.dim();
    for s in 0..n {
        for ch in 0..c {
            for t in 0..t_out {
                dx[(s, ch, 2 * t + arg[(s, ch, t)] as usize)] += dy[(s, ch, t)];
            }
        }
    }
    dx
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy on logits.
///
/// Returns the mean loss and the logit gradient `(sigmoid(z) - y) / n`.
pub fn bce_with_logits(logits: &Array1<f64>, targets: &Array1<f64>) -> (f64, Array1<f64>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut dz = Array1::zeros(logits.len());
    for (i, (&z, &y)) in logits.iter().zip(targets.iter()).enumerate() {
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        dz[i] = (sigmoid(z) - y) / n;
    }
    (loss / n, dz)
}

/// Draws a standard-normal tensor (testing helper for gradient checks).
#[cfg(test)]
pub fn randn3(dim: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Array3<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    Array3::from_shape_fn(dim, |_| normal.sample(rng))
}
