//! A small 1-D convolutional network with hand-written backpropagation.
//!
//! Activations are `channels × width` matrices; convolutions slide along the
//! width (time) axis and mix all input channels. All parameters live in one
//! flat vector so the optimiser and the persistence format stay trivial.

use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    /// Zero-padded convolution keeping the width (`kernel / 2` on each side).
    Conv { cin: usize, cout: usize, kernel: usize },
    Relu,
    /// Non-overlapping average pooling; a trailing partial window is dropped.
    AvgPool { factor: usize },
    /// Flattens its input row-major.
    Dense { inputs: usize, outputs: usize },
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Conv { cin, cout, kernel } => cout * cin * kernel + cout,
            Layer::Dense { inputs, outputs } => outputs * inputs + outputs,
            Layer::Relu | Layer::AvgPool { .. } => 0,
        }
    }

    pub fn output_shape(&self, (c, w): (usize, usize)) -> Result<(usize, usize), SurrogateError> {
        match *self {
            Layer::Conv { cin, cout, kernel } if cin == c && kernel > 0 => Ok((cout, w)),
            Layer::Relu => Ok((c, w)),
            Layer::AvgPool { factor } if factor > 0 && w >= factor => Ok((c, w / factor)),
            Layer::Dense { inputs, outputs } if inputs == c * w => Ok((outputs, 1)),
            _ => Err(SurrogateError::Shape(format!("{self:?} cannot take {c}×{w}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input: (usize, usize),
    pub layers: Vec<Layer>,
    #[serde(skip)]
    pub params: Vec<f64>,
}

/// Per-class loss weights of the binary cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w0: f64,
    pub w1: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights { w0: 1.0, w1: 1.0 };

    /// Inverse class frequency, normalised so a balanced set gets unit weights.
    pub fn inverse_frequency(ones: usize, total: usize) -> Self {
        if ones == 0 || ones == total {
            return ClassWeights::UNIT;
        }
        let pos = ones as f64 / total as f64;
        ClassWeights { w0: 0.5 / (1.0 - pos), w1: 0.5 / pos }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Weighted binary cross-entropy of logits against the first `len` labels,
/// averaged over those positions, and its gradient in the logits.
pub fn bce_with_logits(logits: &[f64], labels: &[u8], len: usize, w: ClassWeights) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; logits.len()];
    if len == 0 {
        return (0.0, grad);
    }
    let n = len as f64;
    let mut loss = 0.0;
    for i in 0..len {
        let z = logits[i];
        if labels[i] == 1 {
            loss += w.w1 * softplus(-z);
            grad[i] = w.w1 * (sigmoid(z) - 1.0) / n;
        } else {
            loss += w.w0 * softplus(z);
            grad[i] = w.w0 * sigmoid(z) / n;
        }
    }
    (loss / n, grad)
}

/// Output probability kept strictly inside (0, 1).
pub fn probability(logit: f64) -> f64 {
    sigmoid(logit).clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

fn im2col(x: &ArrayView2<f64>, kernel: usize) -> Array2<f64> {
    let (cin, w) = x.dim();
    let pad = kernel / 2;
    let mut col = Array2::zeros((cin * kernel, w));
    for i in 0..cin {
        for k in 0..kernel {
            let mut row = col.row_mut(i * kernel + k);
            for t in 0..w {
                let src = t + k;
                if src >= pad && src - pad < w {
                    row[t] = x[[i, src - pad]];
                }
            }
        }
    }
    col
}

fn col2im(col: &Array2<f64>, cin: usize, w: usize, kernel: usize) -> Array2<f64> {
    let pad = kernel / 2;
    let mut x = Array2::zeros((cin, w));
    for i in 0..cin {
        for k in 0..kernel {
            let row = col.row(i * kernel + k);
            for t in 0..w {
                let src = t + k;
                if src >= pad && src - pad < w {
                    x[[i, src - pad]] += row[t];
                }
            }
        }
    }
    x
}

fn split_wb(p: &[f64], rows: usize, cols: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
    let (w, b) = p.split_at(rows * cols);
    (ArrayView2::from_shape((rows, cols), w).expect("weight block"), ArrayView1::from(b))
}

fn split_wb_mut(p: &mut [f64], rows: usize, cols: usize) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
    let (w, b) = p.split_at_mut(rows * cols);
    (ArrayViewMut2::from_shape((rows, cols), w).expect("weight block"), ArrayViewMut1::from(b))
}

impl Network {
    /// Random initialisation: He-uniform for convolutions, Glorot-uniform for
    /// dense layers, zero biases.
    pub fn new(input: (usize, usize), layers: Vec<Layer>, seed: u64) -> Result<Self, SurrogateError> {
        let mut shape = input;
        for l in &layers {
            shape = l.output_shape(shape)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for l in &layers {
            let (fan, weights) = match *l {
                Layer::Conv { cin, cout, kernel } => ((6.0 / (cin * kernel) as f64).sqrt(), cout * cin * kernel),
                Layer::Dense { inputs, outputs } => ((6.0 / (inputs + outputs) as f64).sqrt(), outputs * inputs),
                _ => continue,
            };
            params.extend((0..weights).map(|_| rng.gen_range(-fan..fan)));
            params.resize(params.len() + l.param_count() - weights, 0.0);
        }
        Ok(Network { input, layers, params })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn output_len(&self) -> usize {
        let mut shape = self.input;
        for l in &self.layers {
            shape = l.output_shape(shape).expect("validated at construction");
        }
        shape.0 * shape.1
    }

    /// Checks layer shapes and the parameter vector length.
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let mut shape = self.input;
        for l in &self.layers {
            shape = l.output_shape(shape)?;
        }
        if self.params.len() != self.param_count() {
            return Err(SurrogateError::Shape(format!(
                "{} parameters, layers need {}",
                self.params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut o = 0;
        out.push(0);
        for l in &self.layers {
            o += l.param_count();
            out.push(o);
        }
        out
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), SurrogateError> {
        if x.dim() != self.input {
            return Err(SurrogateError::Shape(format!("input {:?}, network expects {:?}", x.dim(), self.input)));
        }
        Ok(())
    }

    /// Activations after every layer, the input first.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let off = self.offsets();
        let mut acts = vec![x.to_owned()];
        for (li, l) in self.layers.iter().enumerate() {
            let p = &self.params[off[li]..off[li + 1]];
            let a = acts.last().expect("input present");
            let next = match *l {
                Layer::Conv { cin, cout, kernel } => {
                    let (w, b) = split_wb(p, cout, cin * kernel);
                    let mut y = w.dot(&im2col(&a.view(), kernel));
                    y += &b.insert_axis(Axis(1));
                    y
                }
                Layer::Relu => a.mapv(|v| v.max(0.0)),
                Layer::AvgPool { factor } => {
                    let (c, width) = a.dim();
                    let wo = width / factor;
                    let mut y = Array2::zeros((c, wo));
                    for j in 0..wo {
                        let win = a.slice(s![.., j * factor..(j + 1) * factor]);
                        y.column_mut(j).assign(&(win.sum_axis(Axis(1)) / factor as f64));
                    }
                    y
                }
                Layer::Dense { inputs, outputs } => {
                    let (w, b) = split_wb(p, outputs, inputs);
                    let flat = ArrayView1::from_shape(inputs, a.as_slice().expect("standard layout"))
                        .expect("flattened input");
                    (w.dot(&flat) + b).insert_axis(Axis(1))
                }
            };
            acts.push(next);
        }
        acts
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, SurrogateError> {
        self.check_input(&x)?;
        Ok(self.activations(x).pop().expect("output").into_iter().collect())
    }

    pub fn loss(&self, x: ArrayView2<f64>, labels: &[u8], len: usize, w: ClassWeights) -> Result<f64, SurrogateError> {
        Ok(bce_with_logits(&self.logits(x)?, labels, len, w).0)
    }

    /// Loss of one sample and its gradient in every parameter.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<f64>,
        labels: &[u8],
        len: usize,
        w: ClassWeights,
    ) -> Result<(f64, Vec<f64>), SurrogateError> {
        self.check_input(&x)?;
        let acts = self.activations(x);
        let out: Vec<f64> = acts.last().expect("output").iter().copied().collect();
        if labels.len() < len || out.len() < len {
            return Err(SurrogateError::Shape(format!("{len} labelled positions, {} outputs", out.len())));
        }
        let (loss, dout) = bce_with_logits(&out, labels, len, w);
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&acts, dout, &mut grad);
        Ok((loss, grad))
    }

    fn backward(&self, acts: &[Array2<f64>], dout: Vec<f64>, grad: &mut [f64]) {
        let off = self.offsets();
        let last = acts.last().expect("output").dim();
        let mut delta = Array2::from_shape_vec(last, dout).expect("output shape");
        for (li, l) in self.layers.iter().enumerate().rev() {
            let p = &self.params[off[li]..off[li + 1]];
            let g = &mut grad[off[li]..off[li + 1]];
            let a = &acts[li];
            delta = match *l {
                Layer::Conv { cin, cout, kernel } => {
                    let col = im2col(&a.view(), kernel);
                    let (w, _) = split_wb(p, cout, cin * kernel);
                    let (mut gw, mut gb) = split_wb_mut(g, cout, cin * kernel);
                    gw += &delta.dot(&col.t());
                    gb += &delta.sum_axis(Axis(1));
                    col2im(&w.t().dot(&delta), cin, a.ncols(), kernel)
                }
                Layer::Relu => {
                    let mut d = delta;
                    d.zip_mut_with(a, |d, &v| {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    d
                }
                Layer::AvgPool { factor } => {
                    let mut d = Array2::zeros(a.dim());
                    for j in 0..delta.ncols() {
                        let col = delta.column(j).to_owned() / factor as f64;
                        for m in 0..factor {
                            d.column_mut(j * factor + m).assign(&col);
                        }
                    }
                    d
                }
                Layer::Dense { inputs, outputs } => {
                    let flat = ArrayView1::from_shape(inputs, a.as_slice().expect("standard layout"))
                        .expect("flattened input");
                    let dy = delta.column(0);
                    let (w, _) = split_wb(p, outputs, inputs);
                    let (mut gw, mut gb) = split_wb_mut(g, outputs, inputs);
                    for (o, mut row) in gw.rows_mut().into_iter().enumerate() {
                        let k = dy[o];
                        if k != 0.0 {
                            row.scaled_add(k, &flat);
                        }
                    }
                    gb += &dy;
                    let dx = w.t().dot(&dy);
                    Array2::from_shape_vec(a.dim(), dx.to_vec()).expect("input shape")
                }
            };
        }
    }

    /// Sets the bias of the final dense layer.
    pub fn set_output_bias(&mut self, bias: f64) {
        let off = self.offsets();
        if let Some((li, Layer::Dense { inputs, outputs })) = self.layers.iter().enumerate().next_back() {
            let start = off[li] + inputs * outputs;
            self.params[start..start + outputs].fill(bias);
        }
    }
}

/// Adam optimiser state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(params: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; params], v: vec![0.0; params], step: 0 }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}
