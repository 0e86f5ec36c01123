//! Layer stack with a recorded forward pass and reverse-mode backward pass.
//!
//! `forward` returns a [`ForwardCache`] holding whatever each layer needs to
//! differentiate itself; `backward` walks the layers in reverse, accumulates
//! parameter gradients in place and returns the gradient of the input.

use serde::{Deserialize, Serialize};

use super::tensor::{init_gaussian, Matrix, ParamTensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    FullyConnected { inputs: usize, outputs: usize },
    LeakyRelu { slope: f64 },
    Relu,
    Tanh,
    Sigmoid,
    /// `momentum` weights the old running statistic:
    /// `running = momentum * running + (1 - momentum) * batch`.
    BatchNorm {
        features: usize,
        momentum: f64,
        epsilon: f64,
    },
}

impl LayerSpec {
    pub fn fc(inputs: usize, outputs: usize) -> Self {
        LayerSpec::FullyConnected { inputs, outputs }
    }

    pub fn leaky(slope: f64) -> Self {
        LayerSpec::LeakyRelu { slope }
    }

    pub fn batch_norm(features: usize) -> Self {
        LayerSpec::BatchNorm {
            features,
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::FullyConnected { inputs, outputs } => inputs > 0 && outputs > 0,
            LayerSpec::LeakyRelu { slope } => slope > 0.0 && slope < 1.0,
            LayerSpec::BatchNorm {
                features,
                momentum,
                epsilon,
            } => features > 0 && (0.0..1.0).contains(&momentum) && epsilon > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadConfig(format!("invalid layer {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in BatchNorm, running averages updated.
    Train,
    /// Running averages in BatchNorm.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub features: usize,
    pub momentum: f64,
    pub epsilon: f64,
    pub gamma: ParamTensor,
    pub beta: ParamTensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    FullyConnected {
        /// `inputs x outputs`
        weight: ParamTensor,
        bias: ParamTensor,
    },
    LeakyRelu(f64),
    Relu,
    Tanh,
    Sigmoid,
    BatchNorm(BatchNorm),
}

#[derive(Debug, Clone)]
enum LayerCache {
    Input(Matrix),
    Output(Matrix),
    Norm {
        xhat: Matrix,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
}

/// Intermediates recorded by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    entries: Vec<LayerCache>,
}

impl Layer {
    pub fn new(spec: &LayerSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            LayerSpec::FullyConnected { inputs, outputs } => Layer::FullyConnected {
                weight: init_gaussian(inputs, outputs, rng),
                bias: init_gaussian(1, outputs, rng),
            },
            LayerSpec::LeakyRelu { slope } => Layer::LeakyRelu(slope),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Tanh => Layer::Tanh,
            LayerSpec::Sigmoid => Layer::Sigmoid,
            LayerSpec::BatchNorm {
                features,
                momentum,
                epsilon,
            } => Layer::BatchNorm(BatchNorm {
                features,
                momentum,
                epsilon,
                gamma: ParamTensor::filled(1, features, 1.0),
                beta: ParamTensor::zeros(1, features),
                running_mean: vec![0.0; features],
                running_var: vec![1.0; features],
            }),
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::FullyConnected { weight, .. } => LayerSpec::FullyConnected {
                inputs: weight.shape().0,
                outputs: weight.shape().1,
            },
            Layer::LeakyRelu(s) => LayerSpec::LeakyRelu { slope: *s },
            Layer::Relu => LayerSpec::Relu,
            Layer::Tanh => LayerSpec::Tanh,
            Layer::Sigmoid => LayerSpec::Sigmoid,
            Layer::BatchNorm(bn) => LayerSpec::BatchNorm {
                features: bn.features,
                momentum: bn.momentum,
                epsilon: bn.epsilon,
            },
        }
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            Layer::FullyConnected { weight, bias } => vec![weight, bias],
            Layer::BatchNorm(bn) => vec![&mut bn.gamma, &mut bn.beta],
            _ => Vec::new(),
        }
    }

    fn params(&self) -> Vec<&ParamTensor> {
        match self {
            Layer::FullyConnected { weight, bias } => vec![weight, bias],
            Layer::BatchNorm(bn) => vec![&bn.gamma, &bn.beta],
            _ => Vec::new(),
        }
    }

    fn width_in(&self) -> Option<usize> {
        match self {
            Layer::FullyConnected { weight, .. } => Some(weight.shape().0),
            Layer::BatchNorm(bn) => Some(bn.features),
            _ => None,
        }
    }

    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, LayerCache)> {
        if let Some(w) = self.width_in() {
            if x.cols() != w {
                return Err(Error::ShapeMismatch(format!(
                    "layer expects {w} inputs, batch has {}",
                    x.cols()
                )));
            }
        }
        Ok(match self {
            Layer::FullyConnected { weight, bias } => {
                (dense_forward(x, weight, bias), LayerCache::Input(x.clone()))
            }
            Layer::LeakyRelu(s) => {
                let s = *s;
                (x.map(|v| if v > 0.0 { v } else { s * v }), LayerCache::Input(x.clone()))
            }
            Layer::Relu => (x.map(|v| v.max(0.0)), LayerCache::Input(x.clone())),
            Layer::Tanh => {
                let y = x.map(f64::tanh);
                (y.clone(), LayerCache::Output(y))
            }
            Layer::Sigmoid => {
                let y = x.map(sigmoid);
                (y.clone(), LayerCache::Output(y))
            }
            Layer::BatchNorm(bn) => bn.forward(x, mode)?,
        })
    }

    fn backward(&mut self, cache: &LayerCache, dy: &Matrix, accumulate: bool) -> Result<Matrix> {
        match (self, cache) {
            (Layer::FullyConnected { weight, bias }, LayerCache::Input(x)) => {
                Ok(dense_backward(x, weight, bias, dy, accumulate))
            }
            (Layer::LeakyRelu(s), LayerCache::Input(x)) => {
                let s = *s;
                x.zip_map(dy, |v, g| if v > 0.0 { g } else { s * g })
            }
            (Layer::Relu, LayerCache::Input(x)) => x.zip_map(dy, |v, g| if v > 0.0 { g } else { 0.0 }),
            (Layer::Tanh, LayerCache::Output(y)) => y.zip_map(dy, |t, g| g * (1.0 - t * t)),
            (Layer::Sigmoid, LayerCache::Output(y)) => y.zip_map(dy, |p, g| g * p * (1.0 - p)),
            (Layer::BatchNorm(bn), LayerCache::Norm {
                xhat,
                inv_std,
                batch_stats,
            }) => bn.backward(xhat, inv_std, *batch_stats, dy, accumulate),
            _ => Err(Error::MissingCache),
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn dense_forward(x: &Matrix, w: &ParamTensor, b: &ParamTensor) -> Matrix {
    let (n_in, n_out) = w.shape();
    let mut y = Matrix::zeros(x.rows(), n_out);
    for i in 0..x.rows() {
        let out = y.row_mut(i);
        out.copy_from_slice(&b.value);
        for (k, &a) in x.row(i).iter().enumerate().take(n_in) {
            let wk = &w.value[k * n_out..(k + 1) * n_out];
            for (o, &wv) in out.iter_mut().zip(wk) {
                *o += a * wv;
            }
        }
    }
    y
}

fn dense_backward(
    x: &Matrix,
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    dy: &Matrix,
    accumulate: bool,
) -> Matrix {
    let (n_in, n_out) = w.shape();
    let mut dx = Matrix::zeros(x.rows(), n_in);
    for i in 0..x.rows() {
        let g = dy.row(i);
        if accumulate {
            for (bg, &gv) in b.grad.iter_mut().zip(g) {
                *bg += gv;
            }
        }
        let xi = x.row(i);
        let dxi = dx.row_mut(i);
        for k in 0..n_in {
            let wk = &w.value[k * n_out..(k + 1) * n_out];
            dxi[k] = wk.iter().zip(g).map(|(a, b)| a * b).sum();
            if !accumulate {
                continue;
            }
            let a = xi[k];
            let gk = &mut w.grad[k * n_out..(k + 1) * n_out];
            for (gw, &gv) in gk.iter_mut().zip(g) {
                *gw += a * gv;
            }
        }
    }
    dx
}

impl BatchNorm {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, LayerCache)> {
        let (n, f) = x.shape();
        let (mean, var) = match mode {
            Mode::Train => {
                if n == 0 {
                    return Err(Error::ShapeMismatch("empty batch".into()));
                }
                let mut mean = vec![0.0; f];
                for i in 0..n {
                    for (m, v) in mean.iter_mut().zip(x.row(i)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; f];
                for i in 0..n {
                    for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                // biased variance normalizes; the unbiased one feeds the running average
                let unbiased = if n > 1 { (n - 1) as f64 } else { 1.0 };
                for j in 0..f {
                    let sq = var[j];
                    var[j] = sq / n as f64;
                    self.running_mean[j] =
                        self.momentum * self.running_mean[j] + (1.0 - self.momentum) * mean[j];
                    self.running_var[j] =
                        self.momentum * self.running_var[j] + (1.0 - self.momentum) * sq / unbiased;
                }
                (mean, var)
            }
            Mode::Eval => return Ok(self.apply(x, &self.running_mean, &self.running_var, false)),
        };
        Ok(self.apply(x, &mean, &var, true))
    }

    fn apply(&self, x: &Matrix, mean: &[f64], var: &[f64], batch_stats: bool) -> (Matrix, LayerCache) {
        let (n, f) = x.shape();
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut xhat = Matrix::zeros(n, f);
        let mut y = Matrix::zeros(n, f);
        for i in 0..n {
            let xi = x.row(i);
            let hi = xhat.row_mut(i);
            for j in 0..f {
                hi[j] = (xi[j] - mean[j]) * inv_std[j];
            }
            let yi = y.row_mut(i);
            let hi = xhat.row(i);
            for j in 0..f {
                yi[j] = self.gamma.value[j] * hi[j] + self.beta.value[j];
            }
        }
        (
            y,
            LayerCache::Norm {
                xhat,
                inv_std,
                batch_stats,
            },
        )
    }

    fn backward(
        &mut self,
        xhat: &Matrix,
        inv_std: &[f64],
        batch_stats: bool,
        dy: &Matrix,
        accumulate: bool,
    ) -> Result<Matrix> {
        xhat.expect_shape(dy.shape())?;
        let (n, f) = dy.shape();
        let mut sum_g = vec![0.0; f];
        let mut sum_gx = vec![0.0; f];
        for i in 0..n {
            let g = dy.row(i);
            let h = xhat.row(i);
            for j in 0..f {
                sum_g[j] += g[j];
                sum_gx[j] += g[j] * h[j];
            }
        }
        if accumulate {
            for j in 0..f {
                self.beta.grad[j] += sum_g[j];
                self.gamma.grad[j] += sum_gx[j];
            }
        }
        let mut dx = Matrix::zeros(n, f);
        let nf = n as f64;
        for i in 0..n {
            let g = dy.row(i);
            let h = xhat.row(i);
            let out = dx.row_mut(i);
            for j in 0..f {
                let scale = self.gamma.value[j] * inv_std[j];
                out[j] = if batch_stats {
                    // d xhat contributions through the batch mean and variance
                    scale * (g[j] - sum_g[j] / nf - h[j] * sum_gx[j] / nf)
                } else {
                    scale * g[j]
                };
            }
        }
        Ok(dx)
    }
}

/// A sequential stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|s| Layer::new(s, rng))
            .collect::<Result<Vec<_>>>()?;
        let net = Self { layers };
        net.check_chain()?;
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let net = Self { layers };
        net.check_chain()?;
        Ok(net)
    }

    fn check_chain(&self) -> Result<()> {
        let mut width: Option<usize> = None;
        for l in &self.layers {
            if let (Some(w), Some(expected)) = (width, l.width_in()) {
                if w != expected {
                    return Err(Error::BadConfig(format!(
                        "layer expects {expected} inputs but previous layer emits {w}"
                    )));
                }
            }
            width = match l {
                Layer::FullyConnected { weight, .. } => Some(weight.shape().1),
                _ => width.or(l.width_in()),
            };
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(Layer::width_in)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::FullyConnected { weight, .. } => Some(weight.shape().1),
            Layer::BatchNorm(bn) => Some(bn.features),
            _ => None,
        })
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        let mut entries = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &mut self.layers {
            let (y, c) = layer.forward(&cur, mode)?;
            entries.push(c);
            cur = y;
        }
        Ok((cur, ForwardCache { entries }))
    }

    /// Inference pass (running BatchNorm statistics, nothing recorded).
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::BatchNorm(bn) => {
                    if cur.cols() != bn.features {
                        return Err(Error::ShapeMismatch(format!(
                            "batch norm expects {} features, batch has {}",
                            bn.features,
                            cur.cols()
                        )));
                    }
                    bn.apply(&cur, &bn.running_mean, &bn.running_var, false).0
                }
                Layer::FullyConnected { weight, bias } => {
                    if cur.cols() != weight.shape().0 {
                        return Err(Error::ShapeMismatch(format!(
                            "layer expects {} inputs, batch has {}",
                            weight.shape().0,
                            cur.cols()
                        )));
                    }
                    dense_forward(&cur, weight, bias)
                }
                Layer::LeakyRelu(s) => cur.map(|v| if v > 0.0 { v } else { s * v }),
                Layer::Relu => cur.map(|v| v.max(0.0)),
                Layer::Tanh => cur.map(f64::tanh),
                Layer::Sigmoid => cur.map(sigmoid),
            };
        }
        Ok(cur)
    }

    /// Accumulates parameter gradients and returns `d loss / d input`.
    pub fn backward(&mut self, cache: &ForwardCache, grad_out: &Matrix) -> Result<Matrix> {
        self.backward_impl(cache, grad_out, true)
    }

    /// Gradient with respect to the input only; parameter gradients are left
    /// untouched.
    pub fn backward_input(&mut self, cache: &ForwardCache, grad_out: &Matrix) -> Result<Matrix> {
        self.backward_impl(cache, grad_out, false)
    }

    fn backward_impl(&mut self, cache: &ForwardCache, grad_out: &Matrix, accumulate: bool) -> Result<Matrix> {
        if cache.entries.len() != self.layers.len() {
            return Err(Error::MissingCache);
        }
        let mut g = grad_out.clone();
        for (layer, c) in self.layers.iter_mut().zip(&cache.entries).rev() {
            g = layer.backward(c, &g, accumulate)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamTensor::zero_grad);
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Clamps every trainable value to `[-c, c]`.
    pub fn clip_params(&mut self, c: f64) {
        self.params_mut().into_iter().for_each(|p| p.clip(c));
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params()
            .iter()
            .flat_map(|p| p.value.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
