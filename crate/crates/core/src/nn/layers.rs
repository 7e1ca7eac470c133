use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::Parameters;
use crate::error::{Error, Result};

/// Records forward intermediates for one reverse pass.
#[derive(Debug, Clone)]
pub struct GradientTape<C> {
    cache: Option<C>,
}

impl<C> Default for GradientTape<C> {
    fn default() -> Self {
        GradientTape { cache: None }
    }
}

impl<C> GradientTape<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, cache: C) {
        self.cache = Some(cache);
    }

    pub fn is_recorded(&self) -> bool {
        self.cache.is_some()
    }

    pub fn cache(&self) -> Result<&C> {
        self.cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before any forward pass".into()))
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// ReLU derivative with the 0 convention at the kink.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Affine map `y = x W + b` with `W: in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Tensor::zeros(input, output),
            b: Tensor::zeros(1, output),
        }
    }

    /// Uniform in ±1/√fan_in for weights and biases.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Dense {
            w: Tensor::uniform(input, output, bound, rng),
            b: Tensor::uniform(1, output, bound, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut y = self.b.data.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, &wij) in y.iter_mut().zip(self.w.row(i)) {
                *yj += xi * wij;
            }
        }
        y
    }

    /// Row-wise forward over a token matrix.
    pub fn forward_rows(&self, x: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(x.rows, self.output_dim());
        for r in 0..x.rows {
            let y = self.forward(x.row(r));
            out.row_mut(r).copy_from_slice(&y);
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        for (gb, &d) in grad.b.data.iter_mut().zip(dy) {
            *gb += d;
        }
        let mut dx = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            let wrow = self.w.row(i);
            let grow = grad.w.row_mut(i);
            let mut acc = 0.0;
            for j in 0..dy.len() {
                grow[j] += xi * dy[j];
                acc += wrow[j] * dy[j];
            }
            dx[i] = acc;
        }
        dx
    }

    pub fn backward_rows(&self, x: &Tensor, dy: &Tensor, grad: &mut Dense) -> Tensor {
        let mut dx = Tensor::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let d = self.backward(x.row(r), dy.row(r), grad);
            dx.row_mut(r).copy_from_slice(&d);
        }
        dx
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Fully connected tower: ReLU hidden layers, identity scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Inputs and pre-activations of every layer of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Mlp {
            layers: dims.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Mlp {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.output_dim())
            .collect()
    }

    pub fn num_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "tower expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward_logit(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if l < last {
                h.iter_mut().for_each(|v| *v = relu(*v));
            }
        }
        h[0]
    }

    pub fn forward_cached(&self, x: &[f64]) -> (f64, MlpCache) {
        let last = self.layers.len() - 1;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            cache.inputs.push(h);
            h = if l < last {
                z.iter().map(|&v| relu(v)).collect()
            } else {
                z.clone()
            };
            cache.pre.push(z);
        }
        (h[0], cache)
    }

    pub fn record(&self, x: &[f64], tape: &mut GradientTape<MlpCache>) -> Result<f64> {
        self.check_input(x)?;
        let (logit, cache) = self.forward_cached(x);
        tape.record(cache);
        Ok(logit)
    }

    /// Reverse pass from `dL/dlogit`; returns the input gradient.
    pub fn backward(&self, tape: &GradientTape<MlpCache>, dlogit: f64, grads: &mut Mlp) -> Result<Vec<f64>> {
        Ok(self.backward_cache(tape.cache()?, dlogit, grads))
    }

    pub fn backward_cache(&self, cache: &MlpCache, dlogit: f64, grads: &mut Mlp) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut dz = vec![dlogit];
        for l in (0..self.layers.len()).rev() {
            if l < last {
                for (d, &p) in dz.iter_mut().zip(&cache.pre[l]) {
                    *d *= relu_grad(p);
                }
            }
            dz = self.layers[l].backward(&cache.inputs[l], &dz, &mut grads.layers[l]);
        }
        dz
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}
