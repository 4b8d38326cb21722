//! Dense-layer building blocks shared by the classifier, the perceptron
//! mappers and the autoencoder gates. Batches are row-major `(batch, dim)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

/// Fully connected layer; `w` is `(in, out)` so that `y = x·w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f32>,
    pub b: Array1<f32>,
}

impl Dense {
    /// He-uniform initialization, zero bias.
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / inputs.max(1) as f32).sqrt();
        let w = Array2::from_shape_simple_fn((inputs, outputs), || rng.gen_range(-bound..bound));
        Dense {
            w,
            b: Array1::zeros(outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }

    /// Gradients of this layer given its input `x` and `d_out = dL/dy`.
    /// Returns `(dw, db)`; the input gradient is computed separately since
    /// the first layer does not need it.
    pub fn param_grads(&self, x: ArrayView2<'_, f32>, d_out: ArrayView2<'_, f32>) -> (Array2<f32>, Array1<f32>) {
        (x.t().dot(&d_out), d_out.sum_axis(Axis(0)))
    }

    pub fn input_grad(&self, d_out: ArrayView2<'_, f32>) -> Array2<f32> {
        d_out.dot(&self.w.t())
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

pub fn relu_inplace(z: &mut Array2<f32>) {
    z.mapv_inplace(|v| v.max(0.0));
}

/// Zero the gradient wherever the ReLU output was zero.
pub fn relu_backward(grad: &mut Array2<f32>, activated: ArrayView2<'_, f32>) {
    Zip::from(grad).and(activated).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
}

/// Numerically stable softmax of one logit vector, in f64.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = logits.iter().map(|&v| f64::from(v - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Shannon entropy (nats) of the softmax of `logits`.
pub fn softmax_entropy(logits: &[f32]) -> f64 {
    softmax(logits)
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// Mean cross-entropy of `logits` against `labels`, scaled by `weight`, and
/// its gradient with respect to the logits.
pub fn cross_entropy(logits: ArrayView2<'_, f32>, labels: &[usize], weight: f32) -> (f64, Array2<f32>) {
    let n = logits.nrows();
    assert_eq!(n, labels.len(), "one label per row");
    let mut grad = Array2::zeros(logits.raw_dim());
    if n == 0 {
        return (0.0, grad);
    }
    let mut loss = 0.0f64;
    let scale = weight / n as f32;
    for (i, (row, mut g)) in logits.outer_iter().zip(grad.outer_iter_mut()).enumerate() {
        let row = row.as_slice().map(<[f32]>::to_vec).unwrap_or_else(|| row.to_vec());
        let p = softmax(&row);
        loss -= p[labels[i]].max(1e-300).ln();
        for (j, gj) in g.iter_mut().enumerate() {
            let target = if j == labels[i] { 1.0 } else { 0.0 };
            *gj = (p[j] - target) as f32 * scale;
        }
    }
    (f64::from(weight) * loss / n as f64, grad)
}

/// Mean squared error over all entries, and its gradient.
pub fn mse(pred: ArrayView2<'_, f32>, target: ArrayView2<'_, f32>) -> (f64, Array2<f32>) {
    let count = pred.len().max(1) as f32;
    let diff = &pred - &target;
    let loss = diff.iter().map(|&d| f64::from(d) * f64::from(d)).sum::<f64>() / f64::from(count);
    (loss, diff * (2.0 / count))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_f64(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin_f64(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Plain or momentum SGD on one parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
}

impl Sgd {
    pub fn step2(&self, param: &mut Array2<f32>, grad: &Array2<f32>, velocity: &mut Array2<f32>) {
        if self.momentum == 0.0 {
            param.scaled_add(-self.lr, grad);
        } else {
            let (lr, mu) = (self.lr, self.momentum);
            Zip::from(param).and(velocity).and(grad).for_each(|p, v, &g| {
                *v = mu * *v + g;
                *p -= lr * *v;
            });
        }
    }

    pub fn step1(&self, param: &mut Array1<f32>, grad: &Array1<f32>, velocity: &mut Array1<f32>) {
        if self.momentum == 0.0 {
            param.scaled_add(-self.lr, grad);
        } else {
            let (lr, mu) = (self.lr, self.momentum);
            Zip::from(param).and(velocity).and(grad).for_each(|p, v, &g| {
                *v = mu * *v + g;
                *p -= lr * *v;
            });
        }
    }
}

/// Gather rows of a row-major feature buffer into a batch matrix.
pub fn gather_rows(rows: &[&[f32]]) -> Array2<f32> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), dim));
    for (mut dst, src) in out.outer_iter_mut().zip(rows) {
        dst.assign(&ArrayView1::from(*src));
    }
    out
}
